"""Spherical/circular mean operators, their exact inversions on circular and
spherical detector geometries, the rotational ellipsoidal mean with focal
points (x, z), and the planar two-center kernel integral.

Means are normalized so the mean of the constant 1 is 1.  Inversions follow
the closed-form filtered-backprojection formulas for full boundary data:
in 2D the log-kernel pair (derivative moved onto the data, or the radial
Laplacian applied to the backprojected potential), in 3D the second
derivative of t^2 M and the nested derivative form.
"""

import numpy as np

from . import _kernels
from .fields import ScalarField

# exp of the cell-averaged log distance over a unit square, used to clamp
# grid-node distances when summing integrable log-type singularities
CELL_LOG_RADIUS = 0.34604881609983  # exp(pi/4 - 3/2 - ln(2)/2)
_EVAL_RADIUS_FRAC = 0.999


class MeanData:
    """Mean values on a (center x radius) grid."""

    def __init__(self, centers, radii, values):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
        self.radii = np.asarray(radii, dtype=np.float64)
        self.values = np.asarray(values, dtype=np.float64)
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")
        if self.values.shape != (self.centers.shape[0], self.radii.size):
            raise ValueError("values must have shape (centers, radii)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("mean values must be finite")


def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(int(n))
    return x, w


def _angle_count_2d(r_max, spacing, lo=64, hi=720):
    return int(np.clip(np.ceil(2.0 * np.pi * r_max / spacing), lo, hi))


def _eta_count_3d(r_max, spacing, lo=16, hi=96):
    return int(np.clip(np.ceil(np.pi * r_max / spacing), lo, hi))


def spherical_mean(field, centers, radii, n_angle=None):
    """Normalized means of field over circles/spheres about the centers."""
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    radii = np.asarray(radii, dtype=np.float64)
    spacing = float(np.min(field.spacing))
    r_max = float(np.max(radii))
    if field.dim == 2:
        n = n_angle if n_angle is not None else _angle_count_2d(r_max, spacing)
        vals = _kernels.circle_mean(
            field.values, field.origin[0], field.origin[1],
            field.spacing[0], field.spacing[1], centers, radii, int(n),
        )
    else:
        ne = n_angle if n_angle is not None else _eta_count_3d(r_max, spacing)
        eta, etaw = _gauss_legendre(ne)
        vals = _kernels.sphere_mean(
            field.values, field.origin[0], field.origin[1], field.origin[2],
            field.spacing[0], field.spacing[1], field.spacing[2],
            centers, radii, eta, etaw, int(2 * ne),
        )
    return MeanData(centers, radii, np.asarray(vals))


def _full_radius_grid(data, r_max):
    """Embed data.values into a zero-padded uniform grid 0..r_max."""
    dr = float(data.radii[1] - data.radii[0]) if data.radii.size > 1 else float(data.radii[0])
    n = int(round(r_max / dr)) + 1
    r_full = dr * np.arange(n)
    vals = np.zeros((data.values.shape[0], n))
    idx = np.rint(data.radii / dr).astype(int)
    aligned = np.max(np.abs(data.radii - idx * dr)) < 1e-9 * dr and np.all(idx < n)
    if aligned:
        vals[:, idx] = data.values
    else:
        for p in range(vals.shape[0]):
            vals[p] = np.interp(r_full, data.radii, data.values[p], left=0.0, right=0.0)
    return r_full, vals


def _log_moment_total(rho, L):
    # integral of log|r^2 - rho^2| dr over [0, L]
    a = np.where(np.abs(L - rho) > 0, np.abs(L - rho), 1.0)
    first = np.where(np.abs(L - rho) > 0, (L - rho) * (np.log(a) - 1.0), 0.0)
    return first + (L + rho) * (np.log(L + rho) - 1.0)


def _log_kernel_tables(r_grid, rho_grid):
    """Trapezoid-weighted log kernel with the singular part subtracted.

    Returns (Lmat, corr) so that the integral of g(r) log|r^2 - rho_i^2| dr
    is (Lmat @ g)[i] + g(rho_i) * corr[i].
    """
    dr = r_grid[1] - r_grid[0]
    w = np.full(r_grid.size, dr)
    w[0] = w[-1] = 0.5 * dr
    diff = r_grid[None, :] ** 2 - rho_grid[:, None] ** 2
    mask = np.abs(diff) > 1e-14
    logk = np.where(mask, np.log(np.where(mask, np.abs(diff), 1.0)), 0.0)
    Lmat = logk * w[None, :]
    s = Lmat.sum(axis=1)
    corr = _log_moment_total(rho_grid, float(r_grid[-1])) - s
    return Lmat, corr


def _interp_rows(rows, grid, targets):
    out = np.empty((rows.shape[0], targets.size))
    for p in range(rows.shape[0]):
        out[p] = np.interp(targets, grid, rows[p], left=0.0, right=0.0)
    return out


def invert_mean_2d(data, detectors, template, variant="derivative"):
    """Reconstruct f on the template grid from circular means on Gamma.

    variant "derivative": integrand (d/dr r d/dr M) against the log kernel.
    variant "laplacian": backproject J(rho) = integral r M log|r^2-rho^2| dr
    and apply the radial Laplacian J'' + J'/rho.
    Both carry the constant 1/(2 pi R) with arclength detector weights.
    """
    if variant not in ("derivative", "laplacian"):
        raise ValueError("variant must be derivative or laplacian")
    R = detectors.radius
    if float(data.radii[-1]) < 2.0 * R - 1e-9:
        raise ValueError("radius grid must reach the diameter 2R")
    r_grid, m = _full_radius_grid(data, 2.0 * R)
    dr = r_grid[1] - r_grid[0]
    drho = 0.5 * dr
    rho_grid = drho * np.arange(2 * (r_grid.size - 1) + 1)
    Lmat, corr = _log_kernel_tables(r_grid, rho_grid)

    if variant == "derivative":
        inner = np.gradient(m, dr, axis=1, edge_order=2) * r_grid[None, :]
        g = np.gradient(inner, dr, axis=1, edge_order=2)
    else:
        g = m * r_grid[None, :]
    g_at_rho = _interp_rows(g, r_grid, rho_grid)
    prof = g @ Lmat.T + g_at_rho * corr[None, :]

    if variant == "laplacian":
        # radial Laplacian of the even profile: J'' + J'/rho, 2 J''(0) at 0
        ext = np.concatenate([prof[:, 2:0:-1], prof], axis=1)
        d1 = np.gradient(ext, drho, axis=1, edge_order=2)[:, 2:]
        d2 = np.gradient(np.gradient(ext, drho, axis=1, edge_order=2), drho, axis=1, edge_order=2)[:, 2:]
        vals = d2.copy()
        vals[:, 1:] += d1[:, 1:] / rho_grid[None, 1:]
        vals[:, 0] = 2.0 * d2[:, 0]
        prof = vals

    pts = template.grid_points()
    inside = np.linalg.norm(pts, axis=1) < _EVAL_RADIUS_FRAC * R
    acc = np.zeros(pts.shape[0])
    for p in range(len(detectors)):
        rho = np.linalg.norm(pts[inside] - detectors.points[p], axis=1)
        acc[inside] += detectors.weights[p] * np.interp(rho, rho_grid, prof[p], left=0.0, right=0.0)
    out = acc / (2.0 * np.pi * R)
    return template.copy_like(out.reshape(template.shape))


def invert_mean_3d(data, detectors, template, variant="t2"):
    """Reconstruct f on the template grid from spherical means on Gamma.

    variant "t2": second derivative of t^2 M; variant "nested": the nested
    form d/dt (t d/dt (t M)).  Both backproject the profile divided by the
    evaluation distance with the constant -1/(2 pi R0).
    """
    if variant not in ("t2", "nested"):
        raise ValueError("variant must be t2 or nested")
    R0 = detectors.radius
    if float(data.radii[-1]) < 2.0 * R0 - 1e-9:
        raise ValueError("radius grid must reach the diameter 2R0")
    t_grid, m = _full_radius_grid(data, 2.0 * R0)
    dt = t_grid[1] - t_grid[0]
    if variant == "t2":
        prof = np.gradient(np.gradient(m * t_grid[None, :] ** 2, dt, axis=1, edge_order=2), dt, axis=1, edge_order=2)
    else:
        inner = np.gradient(m * t_grid[None, :], dt, axis=1, edge_order=2) * t_grid[None, :]
        prof = np.gradient(inner, dt, axis=1, edge_order=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        prof = np.where(t_grid[None, :] > 0, prof / t_grid[None, :], 0.0)

    pts = template.grid_points()
    inside = np.linalg.norm(pts, axis=1) < _EVAL_RADIUS_FRAC * R0
    acc = np.zeros(pts.shape[0])
    for p in range(len(detectors)):
        rho = np.linalg.norm(pts[inside] - detectors.points[p], axis=1)
        acc[inside] += detectors.weights[p] * np.interp(rho, t_grid, prof[p], left=0.0, right=0.0)
    out = -acc / (2.0 * np.pi * R0)
    return template.copy_like(out.reshape(template.shape))


def _ellipsoid_nodes(field, t_max):
    ne = _eta_count_3d(0.5 * t_max, float(np.min(field.spacing)), lo=24, hi=96)
    eta, etaw = _gauss_legendre(ne)
    return eta, etaw, 2 * ne


def ellipsoidal_mean_batch(q_field, x, z_points, times, n_eta=None):
    """N[q](x, z, t) for one focal point x against many (z, t) pairs."""
    z_points = np.atleast_2d(np.asarray(z_points, dtype=np.float64))
    times = np.asarray(times, dtype=np.float64)
    if n_eta is None:
        eta, etaw, nphi = _ellipsoid_nodes(q_field, float(np.max(times)) if times.size else 1.0)
    else:
        eta, etaw = _gauss_legendre(n_eta)
        nphi = 2 * int(n_eta)
    return np.asarray(_kernels.ellipsoid_n3d(
        q_field.values,
        q_field.origin[0], q_field.origin[1], q_field.origin[2],
        q_field.spacing[0], q_field.spacing[1], q_field.spacing[2],
        np.asarray(x, dtype=np.float64), z_points, times, eta, etaw, nphi,
    ))


def ellipsoidal_mean(q_field, x, z, t, n_eta=None):
    """Weighted mean of q over the prolate spheroid with foci x, z and
    string length t; 0 when t <= |x - z|.  The degenerate z = x case
    reduces to (1/8 pi) M2[q](x, t/2) and is evaluated on the sphere."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    d = float(np.linalg.norm(x - z))
    if t <= d or t <= 0.0:
        return 0.0
    if d < 1e-14:
        md = spherical_mean(q_field, x[None, :], np.array([0.5 * t]))
        return float(md.values[0, 0]) / (8.0 * np.pi)
    out = ellipsoidal_mean_batch(q_field, x, z[None, :], np.array([t]), n_eta=n_eta)
    return float(out[0, 0])


def support_nodes_2d(q_field):
    """Grid nodes where q is nonzero, with their cell areas."""
    pts = q_field.grid_points()
    vals = q_field.values.ravel()
    nz = vals != 0.0
    area = float(q_field.spacing[0] * q_field.spacing[1])
    return pts[nz], vals[nz] * area


def twocenter_batch(q_field, x, z_points, times):
    """W(x, z, t): area integral of q against the two-center kernel.

    Inner kernel in closed form, 2 K(kappa)/sqrt(t^2-(a-b)^2) for t > a+b,
    summed over the support nodes of q with node distances clamped at the
    cell-averaged log radius.  Node onsets fade in over the time the front
    takes to sweep an equal-area disc cell, so the sum stays smooth in t.
    """
    pts, qw = support_nodes_2d(q_field)
    z_points = np.atleast_2d(np.asarray(z_points, dtype=np.float64))
    times = np.asarray(times, dtype=np.float64)
    if pts.shape[0] == 0:
        return np.zeros((z_points.shape[0], times.size))
    cell = float(np.sqrt(np.prod(q_field.spacing)))
    rmin = CELL_LOG_RADIUS * cell
    wcell = cell / np.sqrt(np.pi)
    x = np.asarray(x, dtype=np.float64)
    return np.asarray(_kernels.twocenter_w(
        pts[:, 0], pts[:, 1], qw, float(x[0]), float(x[1]),
        z_points[:, 0], z_points[:, 1], times, rmin, wcell,
    ))


def twocenter_kernel_2d(q_field, x, z, t):
    """Single-point W(x, z, t); 0 for t <= |x - z|."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if t <= float(np.linalg.norm(x - z)) or t <= 0.0:
        return 0.0
    out = twocenter_batch(q_field, x, z[None, :], np.array([t]))
    return float(out[0, 0])
