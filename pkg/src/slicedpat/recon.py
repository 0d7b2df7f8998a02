"""Reconstruction of sound-speed contrast and absorption from separated data.

Pipeline (2D): boundary-limit extrapolation of the ladder block gives the
diagonal two-center integral W(x,x,t)/(4 pi^2); a Volterra solve per
detector converts it to circular means of q; filtered mean inversion gives
q; the signal kernel is reassembled from q and the absorption follows as a
median of data / kernel ratios.  In 3D the limit gives the degenerate
spheroid average N(x,x,t) = M2[q](x, t/2)/(8 pi) directly, skipping the
Volterra stage.
"""

import os

import numpy as np

from . import persist
from .fields import ScalarField, eval_field
from .forward import FOURPI2, SeparatedData, _free_term_2d, _thread_map
from .meanops import (MeanData, ellipsoidal_mean_batch, invert_mean_2d,
                      invert_mean_3d, twocenter_batch)
from .volterra import VolterraProblem, differentiate_rhs, solve_second_kind
from .xforms import TimeSeries

F0_FLOOR_REL = 1e-6
PSI_FLOOR_REL = 1e-8
T_MARGIN_STEPS = 5.0
SUPPORT_MARGIN_CELLS = 2.0


class ReconResult:
    """Recovered contrast and absorption plus a diagnostics report."""

    def __init__(self, q_hat, f_hat, f0, diagnostics=None):
        self.q_hat = q_hat
        self.f_hat = f_hat
        self.f0 = f0
        self.f1_hat = f_hat.copy_like(f_hat.values - f0.values)
        self.diagnostics = dict(diagnostics or {})

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        self.q_hat.save(os.path.join(out_dir, "q_hat"))
        self.f_hat.save(os.path.join(out_dir, "f_hat"))
        self.f0.save(os.path.join(out_dir, "f0"))
        persist.write_json(
            os.path.join(out_dir, "diagnostics.json"),
            {"kind": "recon_result", **_jsonable(self.diagnostics)},
        )

    @classmethod
    def load(cls, out_dir):
        head = persist.read_json(os.path.join(out_dir, "diagnostics.json"))
        if head.pop("kind", None) != "recon_result":
            raise ValueError("not a reconstruction directory")
        return cls(
            ScalarField.load(os.path.join(out_dir, "q_hat")),
            ScalarField.load(os.path.join(out_dir, "f_hat")),
            ScalarField.load(os.path.join(out_dir, "f0")),
            diagnostics=head,
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _extrapolation_weights(offsets):
    # Lagrange basis evaluated at h = 0
    h = np.asarray(offsets, dtype=np.float64)
    w = np.ones(h.size)
    for l in range(h.size):
        for m in range(h.size):
            if m != l:
                w[l] *= h[m] / (h[m] - h[l])
    return w


def _ladder_free_term(dim, times, offsets):
    # contrast vanishes at ladder depth, so the (q+1) factor is 1
    if dim == 2:
        return _free_term_2d(times, offsets) / (2.0 * np.pi)
    ramp = np.maximum(times[None, :] - offsets[:, None], 0.0)
    return ramp / (4.0 * np.pi * offsets[:, None])


def limit_to_gamma(data, f0, x=None, t=None):
    """Extrapolate the ladder brackets to the boundary.

    The bracket at offset h subtracts the exact free-space term, leaving
    the smooth contrast contribution; Richardson extrapolation in h sends
    the section point onto the detector.  Returns (values, residual,
    diagnostics) with arrays of shape (Ndet, Nt); residual is the gap
    between the degree-3 and degree-2 extrapolants.  With a detector point
    x and a time t given, returns that single extrapolated value.
    """
    offsets = data.ladder_offsets
    pts = data.ladder_points()
    n_det, n_lad = pts.shape[:2]
    f0v = eval_field(f0, pts.reshape(-1, data.dim)).reshape(n_det, n_lad)
    if not np.all(np.abs(f0v) > F0_FLOOR_REL * np.max(np.abs(f0.values))):
        raise ValueError("f0 vanishes near boundary")
    times = data.times()
    free = _ladder_free_term(data.dim, times, offsets)
    brackets = data.ladder_values / f0v[:, :, None] - free[None, :, :]
    w3 = _extrapolation_weights(offsets)
    w2 = _extrapolation_weights(offsets[:3])
    deg3 = np.einsum("l,ilt->it", w3, brackets)
    deg2 = np.einsum("l,ilt->it", w2, brackets[:, :3, :])
    residual = np.abs(deg3 - deg2)
    diagnostics = {
        "residual_max": float(np.max(residual)),
        "residual_median": float(np.median(residual)),
        "limit_stage_scale": float(np.max(np.abs(data.ladder_values / f0v[:, :, None]))),
    }
    if x is None and t is None:
        return deg3, residual, diagnostics
    if x is None or t is None:
        raise ValueError("give both x and t or neither")
    i = int(np.argmin(np.linalg.norm(data.detectors.points - np.asarray(x), axis=1)))
    j = int(np.argmin(np.abs(times - float(t))))
    return float(deg3[i, j])


def _padded_radii(values, ds, j0, r_max):
    """Uniform radius grid j0*ds .. >= r_max with zero-padded rows."""
    count = int(np.ceil(r_max / ds - 1e-12))
    radii = ds * np.arange(j0, count + 1)
    out = np.zeros(values.shape[:-1] + (radii.size,))
    keep = min(values.shape[-1], radii.size)
    out[..., :keep] = values[..., :keep]
    return radii, out


def volterra_delta(data):
    """Lower integration cutoff: half the boundary-to-Omega gap, grid aligned."""
    gap = float(data.meta["b_radius"]) - (
        float(np.linalg.norm(np.asarray(data.meta["omega_center"]))) + float(data.meta["omega_radius"])
    )
    ds = 0.5 * data.dt
    j0 = max(1, int(np.ceil(0.5 * gap / ds - 1e-12)))
    return j0 * ds, j0


def circular_means_from_limits(data, gamma_values):
    """Volterra stage: diagonal two-center values to circular means of q.

    gamma_values[i, j] = W(x_i, x_i, t_j)/(4 pi^2) on the data time grid;
    returns (radii, means (Ndet, Nr)) with means on s = t/2 from the cutoff.
    """
    ds = 0.5 * data.dt
    delta, j0 = volterra_delta(data)
    g = 2.0 * np.pi * gamma_values[:, j0:]
    if g.shape[-1] < 5:
        raise ValueError("time record too short for the Volterra stage")
    s_last = delta + ds * (g.shape[-1] - 1)
    prob = VolterraProblem(delta, s_last, ds, TimeSeries(delta, ds, g), "first")
    m1 = solve_second_kind(differentiate_rhs(prob)).samples
    radii = delta + ds * np.arange(g.shape[-1])
    return radii, m1


def _support_mask_field(template, center, radius, margin):
    pts = template.grid_points()
    keep = np.linalg.norm(pts - np.asarray(center), axis=1) <= radius + margin
    return keep.reshape(template.shape)


def _grid_indices(field, points):
    rel = (points - field.origin[None, :]) / field.spacing[None, :]
    idx = np.rint(rel).astype(np.int64)
    on_grid = np.max(np.abs(rel - idx), axis=1) < 1e-6
    inside = np.all((idx >= 0) & (idx < np.array(field.shape)[None, :]), axis=1)
    return idx, on_grid & inside


def median_absorption(interior_values, psi3, distances, times, f0_at_points,
                      t_margin, psi_floor_rel=PSI_FLOOR_REL):
    """Median of data/kernel ratios over admissible samples per point.

    interior_values and psi3 have shape (Nd, Nz, Nt); unrecovered points
    (no admissible sample) fall back to the known background value.
    """
    dt = times[1] - times[0]
    margin = t_margin if t_margin is not None else T_MARGIN_STEPS * dt
    floor = psi_floor_rel * np.max(np.abs(psi3))
    adm = (times[None, None, :] - distances[:, :, None] >= margin) & (
        np.abs(psi3) >= floor
    )
    n_z = psi3.shape[1]
    f_hat = np.array(f0_at_points, dtype=np.float64)
    unrecovered = np.zeros(n_z, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(adm, interior_values / np.where(adm, psi3, 1.0), np.nan)
    for p in range(n_z):
        vals = ratio[:, p, :][adm[:, p, :]]
        if vals.size:
            f_hat[p] = np.median(vals)
        else:
            unrecovered[p] = True
    return f_hat, unrecovered


def _assemble_f_hat(f0, interior_points, f_values, unrecovered):
    out = f0.values.copy()
    idx, ok = _grid_indices(f0, interior_points)
    off_grid = int(np.count_nonzero(~ok))
    sel = ok & ~unrecovered
    out[tuple(idx[sel].T)] = f_values[sel]
    return f0.copy_like(out), off_grid


def _masked_contrast(q_hat, data):
    margin = SUPPORT_MARGIN_CELLS * float(np.max(q_hat.spacing))
    mask = _support_mask_field(
        q_hat, data.meta["omega_center"], float(data.meta["omega_radius"]), margin
    )
    return q_hat.copy_like(np.where(mask, q_hat.values, 0.0))


def recon2d(data, f0, mean_variant="derivative", t_margin=None, threads=1):
    """Recover q and f from 2D separated data and the known background f0."""
    if data.dim != 2:
        raise ValueError("recon2d expects 2D data")
    if not isinstance(data, SeparatedData):
        raise ValueError("recon2d expects SeparatedData")
    gamma_values, residual, diag = limit_to_gamma(data, f0)
    radii, m1 = circular_means_from_limits(data, gamma_values)
    ds = radii[1] - radii[0]
    j0 = int(round(radii[0] / ds))
    radii_full, m1_full = _padded_radii(m1, ds, j0, 2.0 * data.detectors.radius)
    mean_data = MeanData(data.detectors.points, radii_full, m1_full)
    q_hat = invert_mean_2d(mean_data, data.detectors, f0, variant=mean_variant)
    q_used = _masked_contrast(q_hat, data)

    times = data.times()
    det_pts = data.detectors.points[data.interior_indices]
    zp = data.interior_points
    qz = eval_field(q_used, zp)
    distances = np.linalg.norm(det_pts[:, None, :] - zp[None, :, :], axis=2)
    psi3 = np.empty((det_pts.shape[0], zp.shape[0], times.size))

    def one_det(a):
        w = twocenter_batch(q_used, det_pts[a], zp, times)
        free = _free_term_2d(times, distances[a])
        psi3[a] = w / FOURPI2 + (qz[:, None] + 1.0) / (2.0 * np.pi) * free

    _thread_map(one_det, range(det_pts.shape[0]), threads)

    f_vals, unrec = median_absorption(
        data.interior_values, psi3, distances, times, eval_field(f0, zp), t_margin
    )
    f_hat, off_grid = _assemble_f_hat(f0, zp, f_vals, unrec)
    diag.update(
        {
            "volterra_delta": float(radii[0]),
            "unrecovered_cells": int(np.count_nonzero(unrec)),
            "off_grid_points": off_grid,
            "mean_variant": mean_variant,
        }
    )
    return ReconResult(q_hat, f_hat, f0, diagnostics=diag)


def recon3d(data, f0, mean_variant="t2", t_margin=None, threads=1):
    """Recover q and f from 3D separated data and the known background f0."""
    if data.dim != 3:
        raise ValueError("recon3d expects 3D data")
    if not isinstance(data, SeparatedData):
        raise ValueError("recon3d expects SeparatedData")
    gamma_values, residual, diag = limit_to_gamma(data, f0)
    # N(x, x, t) = M2[q](x, t/2)/(8 pi) on the half-time radius grid
    ds = 0.5 * data.dt
    m2 = 8.0 * np.pi * gamma_values[:, 1:]
    radii_full, m2_full = _padded_radii(m2, ds, 1, 2.0 * data.detectors.radius)
    mean_data = MeanData(data.detectors.points, radii_full, m2_full)
    q_hat = invert_mean_3d(mean_data, data.detectors, f0, variant=mean_variant)
    q_used = _masked_contrast(q_hat, data)

    times = data.times()
    det_pts = data.detectors.points[data.interior_indices]
    zp = data.interior_points
    qz = eval_field(q_used, zp)
    distances = np.linalg.norm(det_pts[:, None, :] - zp[None, :, :], axis=2)
    psi3 = np.empty((det_pts.shape[0], zp.shape[0], times.size))

    def one_det(a):
        n_vals = ellipsoidal_mean_batch(q_used, det_pts[a], zp, times)
        ramp = np.maximum(times[None, :] - distances[a][:, None], 0.0)
        free = ramp / (4.0 * np.pi * np.maximum(distances[a][:, None], 1e-300))
        psi3[a] = (qz[:, None] + 1.0) * free + n_vals

    _thread_map(one_det, range(det_pts.shape[0]), threads)

    f_vals, unrec = median_absorption(
        data.interior_values, psi3, distances, times, eval_field(f0, zp), t_margin
    )
    f_hat, off_grid = _assemble_f_hat(f0, zp, f_vals, unrec)
    diag.update(
        {
            "unrecovered_cells": int(np.count_nonzero(unrec)),
            "off_grid_points": off_grid,
            "mean_variant": mean_variant,
        }
    )
    return ReconResult(q_hat, f_hat, f0, diagnostics=diag)


def fixed_point_q3d(psi_values, x_points, z_points, times, template,
                    max_iters=10, tol=1e-4, t_margin=None):
    """Iterative contrast recovery from interior kernel samples.

    psi_values[a, p, j] are samples of the order-3 kernel at detector
    x_points[a], section point z_points[p], time times[j].  Each sweep
    subtracts the spheroid average of the previous iterate and solves the
    remaining affine free-space term for q pointwise by least squares.
    Returns the iterate as a field on the template grid with the
    convergence history attached to its meta attribute.
    """
    psi_values = np.asarray(psi_values, dtype=np.float64)
    x_points = np.atleast_2d(np.asarray(x_points, dtype=np.float64))
    z_points = np.atleast_2d(np.asarray(z_points, dtype=np.float64))
    times = np.asarray(times, dtype=np.float64)
    if psi_values.shape != (x_points.shape[0], z_points.shape[0], times.size):
        raise ValueError("psi_values must have shape (x, z, t)")
    dt = times[1] - times[0]
    margin = t_margin if t_margin is not None else T_MARGIN_STEPS * dt
    d = np.linalg.norm(x_points[:, None, :] - z_points[None, :, :], axis=2)
    adm = (times[None, None, :] - d[:, :, None] >= margin) & (d[:, :, None] > 1e-12)
    ramp = np.where(
        adm,
        np.maximum(times[None, None, :] - d[:, :, None], 0.0)
        / (4.0 * np.pi * np.maximum(d[:, :, None], 1e-300)),
        0.0,
    )
    den = np.sum(ramp * ramp, axis=(0, 2))
    if np.any(den == 0):
        raise ValueError("some section points have no admissible samples")

    idx, ok = _grid_indices(template, z_points)
    if not np.all(ok):
        raise ValueError("section points must lie on the template grid")
    zero = template.copy_like(np.zeros(template.shape))

    def scatter(qv):
        field = template.copy_like(np.zeros(template.shape))
        field.values[tuple(idx.T)] = qv
        return field

    q_prev = np.zeros(z_points.shape[0])
    q_prev_field = zero
    history = []
    warnings = []
    best = (np.inf, q_prev)
    rises = 0
    prev_diff = None
    converged = False
    for _ in range(int(max_iters)):
        if np.any(q_prev != 0.0):
            n_prev = np.stack(
                [
                    ellipsoidal_mean_batch(q_prev_field, x_points[a], z_points, times)
                    for a in range(x_points.shape[0])
                ]
            )
        else:
            n_prev = 0.0
        rhs = psi_values - n_prev
        num = np.sum(ramp * np.where(adm, rhs, 0.0), axis=(0, 2))
        q_new = num / den - 1.0
        diff = float(np.max(np.abs(q_new - q_prev)))
        history.append(diff)
        if diff < best[0]:
            best = (diff, q_new)
        if diff <= tol:
            q_prev = q_new
            converged = True
            break
        if prev_diff is not None and diff > prev_diff:
            rises += 1
            if rises >= 3:
                warnings.append("iteration is not contracting; best iterate returned")
                q_prev = best[1]
                break
        else:
            rises = 0
        prev_diff = diff
        q_prev = q_new
        q_prev_field = scatter(q_new)

    out = scatter(q_prev)
    out.meta = {
        "history": history,
        "converged": converged,
        "iterations": len(history),
        "warnings": warnings,
    }
    return out


def metrics(recon, truth):
    """Relative L2 and sup-norm errors of a reconstruction against truth."""
    if not recon.same_grid(truth):
        raise ValueError("metrics requires matching grids")
    diff = recon.values - truth.values
    t2 = float(np.linalg.norm(truth.values.ravel()))
    d2 = float(np.linalg.norm(diff.ravel()))
    ti = float(np.max(np.abs(truth.values))) if truth.values.size else 0.0
    di = float(np.max(np.abs(diff))) if diff.size else 0.0
    rel_l2 = 0.0 if (t2 == 0.0 and d2 == 0.0) else (np.inf if t2 == 0.0 else d2 / t2)
    rel_linf = 0.0 if (ti == 0.0 and di == 0.0) else (np.inf if ti == 0.0 else di / ti)
    return {"rel_l2": float(rel_l2), "rel_linf": float(rel_linf)}
