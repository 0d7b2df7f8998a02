"""Forward simulation: separated per-section signals and full slab data.

Separated mode produces, for boundary detectors x and section points z, the
order-3 time-integrated signal

    2D:  M(x,z,t) = f(z) [ W(x,z,t)/(4 pi^2)
                           + (q(z)+1)/(2 pi) (t acosh(t/d) - sqrt(t^2-d^2)) ]
    3D:  M(x,z,t) = f(z) [ (q(z)+1) (t-d)_+ / (4 pi d) + N[q](x,z,t) ]

with d = |x-z|, both brackets vanishing for t <= d.  W is the two-center
area integral and N the prolate-spheroid average computed in meanops.

Full mode computes Fourier-domain boundary data for Gaussian slab
illumination over an (offset, orientation) set and `separate_data` undoes
the slab superposition: deconvolve the profile, invert the hyperplane
transform per (detector, wavenumber), return to the time domain, and
integrate three times.  Its output matches the separated simulators on the
same point layout.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import persist
from .fields import DetectorSet, IlluminationSet, ScalarField, eval_field
from .meanops import ellipsoidal_mean_batch, twocenter_batch
from .specfun import hankel0_array
from .xforms import TimeSeries, radon_invert_points, time_antiderivative

FOURPI2 = 4.0 * np.pi**2
DEFAULT_COST_CAP = 4.0e9
DEFAULT_GAIN_CAP = 5.0
_LADDER_GAP_FRAC = 0.9


class CostCapError(RuntimeError):
    """Raised when a full-mode run would exceed its operation budget."""

    def __init__(self, estimate, cap):
        self.estimate = float(estimate)
        self.cap = float(cap)
        super().__init__(
            "estimated work %.3g exceeds the cost cap %.3g" % (estimate, cap)
        )


class SeparatedData:
    """Per-section order-3 signals: a boundary ladder and an interior block.

    ladder_values[i, l, j] is the signal at detector i for the section point
    offset ladder_offsets[l] inward along the detector normal.
    interior_values[a, p, j] is the signal at detector interior_indices[a]
    for section point interior_points[p].  Time axis is t = t0 + j dt.
    """

    def __init__(self, dim, detectors, dt, ladder_offsets, ladder_values,
                 interior_indices, interior_points, interior_values,
                 t0=0.0, integration_order=3, meta=None):
        self.dim = int(dim)
        self.detectors = detectors
        self.t0 = float(t0)
        self.dt = float(dt)
        self.integration_order = int(integration_order)
        self.ladder_offsets = np.asarray(ladder_offsets, dtype=np.float64)
        self.ladder_values = np.ascontiguousarray(ladder_values, dtype=np.float64)
        self.interior_indices = np.asarray(interior_indices, dtype=np.int64)
        self.interior_points = np.ascontiguousarray(interior_points, dtype=np.float64)
        self.interior_values = np.ascontiguousarray(interior_values, dtype=np.float64)
        self.meta = dict(meta or {})
        n_det = len(detectors)
        if self.ladder_values.shape[:2] != (n_det, self.ladder_offsets.size):
            raise ValueError("ladder block shape mismatch")
        if self.interior_values.shape[:2] != (
            self.interior_indices.size,
            self.interior_points.shape[0],
        ):
            raise ValueError("interior block shape mismatch")
        if self.interior_values.shape[-1] != self.ladder_values.shape[-1]:
            raise ValueError("ladder and interior time axes differ")
        self.n_time = self.ladder_values.shape[-1]

    def times(self):
        return self.t0 + self.dt * np.arange(self.n_time)

    def ladder_points(self):
        """Section points x + h nu for every detector, shape (Ndet, L, dim)."""
        x = self.detectors.points[:, None, :]
        nu = self.detectors.inward_normals[:, None, :]
        return x + self.ladder_offsets[None, :, None] * nu

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        head = {
            "kind": "separated_data",
            "dim": self.dim,
            "t0": self.t0,
            "dt": self.dt,
            "n_time": self.n_time,
            "integration_order": self.integration_order,
            "detectors": self.detectors.to_meta(),
            "ladder_offsets": [float(h) for h in self.ladder_offsets],
            "interior_indices": [int(i) for i in self.interior_indices],
            "meta": self.meta,
        }
        persist.write_json(os.path.join(out_dir, "separated.json"), head)
        persist.write_array(os.path.join(out_dir, "ladder_values"), self.ladder_values,
                            {"role": "ladder_values", "t0": self.t0, "dt": self.dt})
        persist.write_array(os.path.join(out_dir, "interior_points"), self.interior_points,
                            {"role": "interior_points"})
        persist.write_array(os.path.join(out_dir, "interior_values"), self.interior_values,
                            {"role": "interior_values", "t0": self.t0, "dt": self.dt})

    @classmethod
    def load(cls, out_dir):
        head = persist.read_json(os.path.join(out_dir, "separated.json"))
        if head.get("kind") != "separated_data":
            raise ValueError("not a separated data directory")
        return cls(
            head["dim"],
            DetectorSet.from_meta(head["detectors"]),
            head["dt"],
            np.asarray(head["ladder_offsets"], dtype=np.float64),
            persist.read_array(os.path.join(out_dir, "ladder_values"))[0],
            np.asarray(head["interior_indices"], dtype=np.int64),
            persist.read_array(os.path.join(out_dir, "interior_points"))[0],
            persist.read_array(os.path.join(out_dir, "interior_values"))[0],
            t0=head["t0"],
            integration_order=head["integration_order"],
            meta=head.get("meta"),
        )


class SinogramData:
    """Fourier-domain slab data indexed (offset, orientation, detector, k)."""

    def __init__(self, illum, detectors, k_grid, values, meta=None):
        self.illum = illum
        self.detectors = detectors
        self.k_grid = np.asarray(k_grid, dtype=np.float64)
        self.values = np.ascontiguousarray(values, dtype=np.complex128)
        self.meta = dict(meta or {})
        want = (
            self.illum.r_samples.size,
            self.illum.theta_samples.shape[0],
            len(detectors),
            self.k_grid.size,
        )
        if self.values.shape != want:
            raise ValueError("sinogram values must have shape %s" % (want,))

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        head = {
            "kind": "sinogram_data",
            "illumination": self.illum.to_meta(),
            "detectors": self.detectors.to_meta(),
            "k_grid": [float(k) for k in self.k_grid],
            "meta": self.meta,
        }
        persist.write_json(os.path.join(out_dir, "sinogram.json"), head)
        persist.write_array(os.path.join(out_dir, "values_re"), np.real(self.values),
                            {"role": "sinogram_re"})
        persist.write_array(os.path.join(out_dir, "values_im"), np.imag(self.values),
                            {"role": "sinogram_im"})

    @classmethod
    def load(cls, out_dir):
        head = persist.read_json(os.path.join(out_dir, "sinogram.json"))
        if head.get("kind") != "sinogram_data":
            raise ValueError("not a sinogram data directory")
        vals = persist.read_array(os.path.join(out_dir, "values_re"))[0] + 1j * persist.read_array(
            os.path.join(out_dir, "values_im")
        )[0]
        return cls(
            IlluminationSet.from_meta(head["illumination"]),
            DetectorSet.from_meta(head["detectors"]),
            np.asarray(head["k_grid"], dtype=np.float64),
            vals,
            meta=head.get("meta"),
        )


def default_time_grid(phantom, eps=0.0):
    """Time step and sample count covering every (x, z) signal support.

    dt is half the grid spacing in 2D and equal to it in 3D (the radial
    mean grids derived from t then resolve the field features), and the
    record covers twice the ball transit plus slab and stencil margins.
    """
    delta = float(np.max(phantom.f0.spacing))
    dt = 0.5 * delta if phantom.dim == 2 else delta
    reach = float(np.linalg.norm(phantom.omega_center)) + phantom.omega_radius
    horizon = 2.0 * (phantom.b_radius + reach) + 5.0 * float(eps) + 6.0 * delta
    n_time = int(np.ceil(horizon / dt)) + 1
    return dt, n_time


def _ladder_offsets_geom(delta, gap):
    h = 0.5 * delta
    if 8.0 * h > _LADDER_GAP_FRAC * gap:
        h = _LADDER_GAP_FRAC * gap / 8.0
    if h <= 0:
        raise ValueError("no room for a boundary ladder outside Omega")
    return h * np.array([1.0, 2.0, 4.0, 8.0])


def default_ladder_offsets(phantom):
    """Geometric 4-point ladder, ratio 2, h_min = half the grid spacing.

    The largest offset is clamped to stay strictly between the boundary and
    Omega so that q = 0 and f = f0 at every ladder point.  Interpolation
    smears grid fields one cell past Omega, so that diagonal is removed
    from the usable gap first.
    """
    delta = float(np.max(phantom.f0.spacing))
    smear = float(np.linalg.norm(phantom.f0.spacing))
    gap = phantom.gamma_omega_distance() - smear
    return _ladder_offsets_geom(delta, gap)


def default_interior_indices(n_det, count=8):
    count = min(int(count), int(n_det))
    idx = np.unique(np.floor(np.linspace(0, n_det, count, endpoint=False)).astype(np.int64))
    return idx


def _interior_points_geom(origin, spacing, shape, center, radius, margin):
    origin = np.asarray(origin, dtype=np.float64)
    spacing = np.asarray(spacing, dtype=np.float64)
    axes = [origin[d] + spacing[d] * np.arange(shape[d]) for d in range(len(shape))]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    keep = np.linalg.norm(pts - np.asarray(center), axis=1) <= radius + margin
    return pts[keep]


def default_interior_points(phantom, margin_cells=1.0):
    """Grid nodes inside Omega dilated by margin_cells cells."""
    f0 = phantom.f0
    margin = float(margin_cells) * float(np.max(f0.spacing))
    return _interior_points_geom(
        f0.origin, f0.spacing, f0.shape, phantom.omega_center, phantom.omega_radius, margin
    )


def _free_term_2d(times, d):
    # double antiderivative of H(t-d)/sqrt(t^2-d^2), vanishing at t = d
    mask = times[None, :] > d[:, None]
    ratio = np.where(mask, times[None, :] / np.maximum(d[:, None], 1e-300), 1.0)
    root = np.sqrt(np.maximum(times[None, :] ** 2 - d[:, None] ** 2, 0.0))
    out = np.where(mask, times[None, :] * np.arccosh(ratio) - root, 0.0)
    return out


def _validate_ladder(phantom, offsets):
    offsets = np.asarray(offsets, dtype=np.float64)
    if offsets.ndim != 1 or offsets.size < 2:
        raise ValueError("ladder needs at least two offsets")
    if np.any(offsets <= 0) or np.any(np.diff(offsets) <= 0):
        raise ValueError("ladder offsets must be positive and increasing")
    x = phantom.gamma.points[:, None, :]
    nu = phantom.gamma.inward_normals[:, None, :]
    pts = (x + offsets[None, :, None] * nu).reshape(-1, phantom.dim)
    if np.any(np.linalg.norm(pts, axis=1) >= phantom.b_radius):
        raise ValueError("ladder points must stay inside the ball")
    if np.any(
        np.linalg.norm(pts - phantom.omega_center, axis=1) <= phantom.omega_radius
    ):
        raise ValueError("ladder points must stay outside Omega")
    qv = eval_field(phantom.q, pts)
    if np.any(qv != 0.0):
        raise ValueError("sound-speed contrast must vanish at ladder points")
    f0v = eval_field(phantom.f0, pts)
    if np.min(np.abs(f0v)) < 1e-12 * np.max(np.abs(phantom.f0.values)):
        raise ValueError("background absorption vanishes at a ladder point")
    return offsets


def _thread_map(fn, tasks, threads):
    if threads <= 1:
        for task in tasks:
            fn(task)
        return
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        list(pool.map(fn, tasks))


def _apply_noise(ladder_values, interior_values, sigma, seed):
    scale = max(
        float(np.max(np.abs(ladder_values))) if ladder_values.size else 0.0,
        float(np.max(np.abs(interior_values))) if interior_values.size else 0.0,
    )
    rng = np.random.default_rng(int(seed))
    ladder_values += sigma * scale * rng.standard_normal(ladder_values.shape)
    interior_values += sigma * scale * rng.standard_normal(interior_values.shape)


def _simulate_separated(phantom, dt, n_time, ladder_offsets, interior_indices,
                        interior_points, threads, noise_sigma, noise_seed,
                        row_fn):
    detectors = phantom.gamma
    n_det = len(detectors)
    dt = float(dt)
    times = dt * np.arange(n_time)
    offsets = _validate_ladder(phantom, ladder_offsets)
    interior_indices = np.asarray(interior_indices, dtype=np.int64)
    interior_points = np.ascontiguousarray(interior_points, dtype=np.float64).reshape(
        -1, phantom.dim
    )
    f_tot = phantom.f_total()
    fz_int = eval_field(f_tot, interior_points)
    qz_int = eval_field(phantom.q, interior_points)

    ladder_values = np.zeros((n_det, offsets.size, n_time))
    interior_values = np.zeros((interior_indices.size, interior_points.shape[0], n_time))
    skipped = np.zeros(1, dtype=np.int64)

    nu = detectors.inward_normals

    def one_ladder(i):
        x = detectors.points[i]
        zp = x[None, :] + offsets[:, None] * nu[i][None, :]
        fz = eval_field(f_tot, zp)
        qz = eval_field(phantom.q, zp)
        ladder_values[i] = row_fn(x, zp, fz, qz, times)

    def one_interior(a):
        x = detectors.points[interior_indices[a]]
        d = np.linalg.norm(interior_points - x[None, :], axis=1)
        live = d > 1e-12
        if not np.all(live):
            skipped[0] += int(np.count_nonzero(~live))
        vals = row_fn(x, interior_points[live], fz_int[live], qz_int[live], times)
        interior_values[a][live] = vals

    _thread_map(one_ladder, range(n_det), threads)
    _thread_map(one_interior, range(interior_indices.size), threads)

    if noise_sigma > 0:
        _apply_noise(ladder_values, interior_values, float(noise_sigma), noise_seed)

    meta = {
        "b_radius": phantom.b_radius,
        "omega_center": [float(c) for c in phantom.omega_center],
        "omega_radius": phantom.omega_radius,
        "grid_spacing": [float(s) for s in phantom.f0.spacing],
        "skipped_detector_cells": int(skipped[0]),
        "noise_sigma": float(noise_sigma),
        "noise_seed": int(noise_seed) if noise_sigma > 0 else None,
    }
    return SeparatedData(
        phantom.dim,
        detectors,
        dt,
        offsets,
        ladder_values,
        interior_indices,
        interior_points,
        interior_values,
        meta=meta,
    )


def _refined_field(field, factor):
    """Resample a field on a grid refined by an integer factor.

    The refined samples come from the field's own interpolant, so the node
    quadrature below converges to the integral of the same function.
    """
    factor = int(factor)
    if factor <= 1:
        return field
    shape = tuple(int(n - 1) * factor + 1 for n in field.shape)
    spacing = field.spacing / factor
    axes = [field.origin[d] + spacing[d] * np.arange(shape[d]) for d in range(field.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = eval_field(field, pts).reshape(shape)
    return ScalarField(field.origin, spacing, vals)


def simulate_separated_2d(phantom, dt=None, n_time=None, ladder_offsets=None,
                          interior_indices=None, interior_points=None,
                          threads=1, noise_sigma=0.0, noise_seed=0,
                          q_oversample=3):
    """Separated-mode signals for a 2D phantom on its detector set."""
    if phantom.dim != 2:
        raise ValueError("simulate_separated_2d expects a 2D phantom")
    if dt is None or n_time is None:
        d0, n0 = default_time_grid(phantom)
        dt = d0 if dt is None else dt
        n_time = n0 if n_time is None else n_time
    if ladder_offsets is None:
        ladder_offsets = default_ladder_offsets(phantom)
    if interior_indices is None:
        interior_indices = default_interior_indices(len(phantom.gamma))
    if interior_points is None:
        interior_points = default_interior_points(phantom)
    q_fine = _refined_field(phantom.q, q_oversample)

    def row_fn(x, zp, fz, qz, times):
        d = np.linalg.norm(zp - x[None, :], axis=1)
        w = twocenter_batch(q_fine, x, zp, times)
        free = _free_term_2d(times, d)
        return fz[:, None] * (
            w / FOURPI2 + (qz[:, None] + 1.0) / (2.0 * np.pi) * free
        )

    return _simulate_separated(
        phantom, dt, n_time, ladder_offsets, interior_indices, interior_points,
        threads, noise_sigma, noise_seed, row_fn
    )


def simulate_separated_3d(phantom, dt=None, n_time=None, ladder_offsets=None,
                          interior_indices=None, interior_points=None,
                          threads=1, noise_sigma=0.0, noise_seed=0):
    """Separated-mode signals for a 3D phantom on its detector set."""
    if phantom.dim != 3:
        raise ValueError("simulate_separated_3d expects a 3D phantom")
    if dt is None or n_time is None:
        d0, n0 = default_time_grid(phantom)
        dt = d0 if dt is None else dt
        n_time = n0 if n_time is None else n_time
    if ladder_offsets is None:
        ladder_offsets = default_ladder_offsets(phantom)
    if interior_indices is None:
        interior_indices = default_interior_indices(len(phantom.gamma))
    if interior_points is None:
        interior_points = default_interior_points(phantom)

    def row_fn(x, zp, fz, qz, times):
        d = np.linalg.norm(zp - x[None, :], axis=1)
        n_vals = ellipsoidal_mean_batch(phantom.q, x, zp, times)
        ramp = np.maximum(times[None, :] - d[:, None], 0.0)
        free = ramp / (4.0 * np.pi * np.maximum(d[:, None], 1e-300))
        return fz[:, None] * ((qz[:, None] + 1.0) * free + n_vals)

    return _simulate_separated(
        phantom, dt, n_time, ladder_offsets, interior_indices, interior_points,
        threads, noise_sigma, noise_seed, row_fn
    )


def _gauss_profile(s, eps):
    return np.exp(-0.5 * (s / eps) ** 2) / (np.sqrt(2.0 * np.pi) * eps)


def _phi_matrix(dim, k, dist):
    if dim == 2:
        return 0.25j * hankel0_array(k * dist)
    return np.exp(1j * k * dist) / (4.0 * np.pi * dist)


def _phi_cell_average(dim, k, cell_volume):
    # fundamental solution averaged over an equal-volume disc or ball
    if dim == 2:
        rc = np.sqrt(cell_volume / np.pi)
        nodes, wts = np.polynomial.legendre.leggauss(12)
        r = 0.5 * rc * (nodes + 1.0)
        w = 0.5 * rc * wts
        vals = 0.25j * hankel0_array(k * r)
        return np.sum(w * r * vals) * 2.0 / rc**2
    rc = (3.0 * cell_volume / (4.0 * np.pi)) ** (1.0 / 3.0)
    return (
        3.0
        / (4.0 * np.pi * rc**3)
        * (np.exp(1j * k * rc) * (1.0 / k**2 - 1j * rc / k) - 1.0 / k**2)
    )


def fourier_cost_estimate(phantom, illum, detectors, n_k):
    """Leading-order operation count of simulate_fourier_full."""
    n_det = len(detectors)
    n_rt = illum.r_samples.size * illum.theta_samples.shape[0]
    n_y = int(np.count_nonzero(phantom.q.values))
    n_z = int(np.count_nonzero(phantom.f0.values + phantom.f1.values))
    return float(n_k) * (float(n_det) * n_y * max(n_z, 1) + float(n_rt) * n_z * n_det)


def simulate_fourier_full(phantom, illum, detectors=None, dt=None, n_time=None,
                          eps=None, dk=None, k_max=None,
                          cost_cap=DEFAULT_COST_CAP, threads=1):
    """Fourier-domain boundary data for Gaussian slab illumination.

    For each slab (offset r, orientation theta), detector x and wavenumber
    k > 0 the value is

        mhat = -ik sum_z f(z) g_eps(theta.z - r) dV
                  [ k^2 sum_y q(y) Phi_k(y,z) Phi_k(x,y) dV
                    + (q(z)+1) Phi_k(x,z) ],

    with Phi_k the outgoing fundamental solution and the singular y = z cell
    replaced by its cell average.  Wavenumbers sit on the midpoint grid
    k_l = (l + 1/2) dk so k = 0 is never touched; negative k follow from
    conjugate symmetry and are not stored.
    """
    if detectors is None:
        detectors = phantom.gamma
    if illum.dim != phantom.dim:
        raise ValueError("illumination dimension does not match the phantom")
    delta = float(np.max(phantom.f0.spacing))
    if eps is None:
        eps = illum.slab_width if illum.slab_width > 0 else delta
    eps = float(eps)
    if dt is None or n_time is None:
        d0, n0 = default_time_grid(phantom, eps=eps)
        dt = d0 if dt is None else dt
        n_time = n0 if n_time is None else n_time
    dt = float(dt)
    horizon = dt * (int(n_time) - 1)
    if k_max is None:
        k_max = np.pi / dt
        if illum.r_samples.size > 1:
            # offsets cannot carry oscillations past their own Nyquist rate
            dr = float(illum.r_samples[1] - illum.r_samples[0])
            k_max = min(k_max, np.pi / dr)
    if dk is None:
        dk = np.pi / (2.0 * horizon + 1.0)
    n_k = int(np.ceil(float(k_max) / float(dk)))
    k_grid = (np.arange(n_k) + 0.5) * float(dk)

    estimate = fourier_cost_estimate(phantom, illum, detectors, n_k)
    if estimate > cost_cap:
        raise CostCapError(estimate, cost_cap)

    cell = float(np.prod(phantom.f0.spacing))
    f_vals = phantom.f0.values + phantom.f1.values
    fmask = f_vals != 0.0
    grid_pts = phantom.f0.grid_points()
    zpts = grid_pts[fmask.ravel()]
    fw = f_vals[fmask] * cell
    qz = phantom.q.values[fmask]

    qmask = phantom.q.values != 0.0
    ypts = grid_pts[qmask.ravel()]
    qw = phantom.q.values[qmask] * cell

    xpts = detectors.points
    n_det = xpts.shape[0]
    n_z = zpts.shape[0]
    dist_xz = np.linalg.norm(xpts[:, None, :] - zpts[None, :, :], axis=2)
    if ypts.shape[0]:
        dist_xy = np.linalg.norm(xpts[:, None, :] - ypts[None, :, :], axis=2)
        dist_yz = np.linalg.norm(ypts[:, None, :] - zpts[None, :, :], axis=2)
        sing = dist_yz < 1e-12 * delta
        dist_yz = np.where(sing, 1.0, dist_yz)
    else:
        dist_xy = dist_yz = sing = None

    r = illum.r_samples
    thetas = illum.theta_samples
    sd = zpts @ thetas.T  # (Nz, Nth)
    wslab = _gauss_profile(sd[None, :, :] - r[:, None, None], eps)
    wslab = np.where(np.abs(sd[None, :, :] - r[:, None, None]) > 6.0 * eps, 0.0, wslab)
    wf = (wslab * fw[None, :, None]).transpose(0, 2, 1).reshape(-1, n_z)  # (Nr*Nth, Nz)

    values = np.zeros((r.size * thetas.shape[0], n_det, n_k), dtype=np.complex128)

    def one_k(l):
        k = k_grid[l]
        phi_xz = _phi_matrix(phantom.dim, k, dist_xz)
        kernel = (qz[None, :] + 1.0) * phi_xz
        if ypts.shape[0]:
            phi_xy = _phi_matrix(phantom.dim, k, dist_xy)
            phi_yz = _phi_matrix(phantom.dim, k, dist_yz)
            if np.any(sing):
                phi_yz = np.where(sing, _phi_cell_average(phantom.dim, k, cell), phi_yz)
            kernel = kernel + k**2 * ((phi_xy * qw[None, :]) @ phi_yz)
        values[:, :, l] = (-1j * k) * (wf @ kernel.T)

    _thread_map(one_k, range(n_k), threads)

    meta = {
        "dim": phantom.dim,
        "eps": eps,
        "dt": dt,
        "n_time": int(n_time),
        "b_radius": phantom.b_radius,
        "omega_center": [float(c) for c in phantom.omega_center],
        "omega_radius": phantom.omega_radius,
        "grid_origin": [float(o) for o in phantom.f0.origin],
        "grid_spacing": [float(s) for s in phantom.f0.spacing],
        "grid_shape": [int(s) for s in phantom.f0.shape],
        "gamma_omega_distance": phantom.gamma_omega_distance(),
    }
    shaped = values.reshape(r.size, thetas.shape[0], n_det, n_k)
    return SinogramData(illum, detectors, k_grid, shaped, meta=meta)


def _deconvolve_slab(values, dr, eps, gain_cap):
    nr = values.shape[0]
    n_pad = 1
    while n_pad < 2 * nr:
        n_pad *= 2
    pad0 = (n_pad - nr) // 2
    arr = np.zeros((n_pad,) + values.shape[1:], dtype=np.complex128)
    arr[pad0:pad0 + nr] = values
    omega = 2.0 * np.pi * np.fft.fftfreq(n_pad, d=dr)
    gain = np.minimum(np.exp(0.5 * (eps * omega) ** 2), gain_cap)
    shape = (n_pad,) + (1,) * (values.ndim - 1)
    out = np.fft.ifft(np.fft.fft(arr, axis=0) * gain.reshape(shape), axis=0)
    return out[pad0:pad0 + nr]


def separate_data(sino, ladder_offsets=None, interior_indices=None,
                  interior_points=None, deconvolve=True,
                  gain_cap=DEFAULT_GAIN_CAP, threads=1):
    """Recover separated per-section signals from full slab data.

    Inverts the slab superposition per (detector, wavenumber): optional
    Gaussian deconvolution in the offset variable (spectral gain capped at
    gain_cap), filtered backprojection onto the requested section points,
    inverse Fourier synthesis on the recorded time grid, and order-3 time
    integration.  Defaults for the point layout are rebuilt from the
    geometry recorded at simulation time.
    """
    meta = sino.meta
    dim = int(meta["dim"])
    dt = float(meta["dt"])
    n_time = int(meta["n_time"])
    eps = float(meta["eps"])
    detectors = sino.detectors
    n_det = len(detectors)
    spacing = np.asarray(meta["grid_spacing"], dtype=np.float64)
    delta = float(np.max(spacing))
    if ladder_offsets is None:
        gap = float(meta["gamma_omega_distance"]) - float(np.linalg.norm(spacing))
        ladder_offsets = _ladder_offsets_geom(delta, gap)
    ladder_offsets = np.asarray(ladder_offsets, dtype=np.float64)
    if interior_indices is None:
        interior_indices = default_interior_indices(n_det)
    interior_indices = np.asarray(interior_indices, dtype=np.int64)
    if interior_points is None:
        interior_points = _interior_points_geom(
            meta["grid_origin"], spacing, meta["grid_shape"],
            meta["omega_center"], float(meta["omega_radius"]), delta,
        )
    interior_points = np.ascontiguousarray(interior_points, dtype=np.float64).reshape(-1, dim)

    r = sino.illum.r_samples
    dr = r[1] - r[0]
    vals = sino.values
    if deconvolve and eps > 0:
        vals = _deconvolve_slab(vals, dr, eps, float(gain_cap))

    k_grid = sino.k_grid
    dk = k_grid[1] - k_grid[0] if k_grid.size > 1 else 2.0 * k_grid[0]
    times = dt * np.arange(n_time)
    synth = np.exp(-1j * np.outer(k_grid, times))  # (Nk, Nt)

    ladder_pts = (
        detectors.points[:, None, :]
        + ladder_offsets[None, :, None] * detectors.inward_normals[:, None, :]
    )
    n_lad = ladder_offsets.size
    in_set = {int(i) for i in interior_indices}

    ladder_values = np.zeros((n_det, n_lad, n_time))
    interior_values = np.zeros((interior_indices.size, interior_points.shape[0], n_time))
    a_of_det = {int(det): a for a, det in enumerate(interior_indices)}

    def one_det(i):
        pts = ladder_pts[i]
        if int(i) in in_set:
            pts = np.concatenate([pts, interior_points], axis=0)
        g = np.empty((pts.shape[0], k_grid.size), dtype=np.complex128)
        for l in range(k_grid.size):
            g[:, l] = radon_invert_points(vals[:, :, i, l], sino.illum, pts)
        block = (dk / np.pi) * np.real(g @ synth)
        series = time_antiderivative(TimeSeries(0.0, dt, block), 3)
        ladder_values[i] = series.samples[:n_lad]
        if int(i) in in_set:
            interior_values[a_of_det[int(i)]] = series.samples[n_lad:]

    _thread_map(one_det, range(n_det), threads)

    out_meta = {
        "source": "full_slab",
        "deconvolved": bool(deconvolve and eps > 0),
        "gain_cap": float(gain_cap),
        "eps": eps,
        "b_radius": meta["b_radius"],
        "omega_center": meta["omega_center"],
        "omega_radius": meta["omega_radius"],
        "grid_spacing": [float(s) for s in spacing],
        "skipped_detector_cells": 0,
    }
    return SeparatedData(
        dim,
        detectors,
        dt,
        ladder_offsets,
        ladder_values,
        interior_indices,
        interior_points,
        interior_values,
        meta=out_meta,
    )
