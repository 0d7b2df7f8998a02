"""Volterra machinery for the planar reconstruction.

The first-kind equation Phi(t) = integral_delta^t ktilde(t, r) M1(r) dr is
converted to second kind by differentiating in t,

    Phi'(t) = (pi/2) M1(t) + integral_delta^t d_t ktilde(t, r) M1(r) dr,

whose smooth kernel and constant nonvanishing diagonal make the marching
product-trapezoid scheme uniquely solvable.  The scheme is assembled as one
lower-triangular system shared by every detector.
"""

import numpy as np
from scipy.linalg import solve_triangular

from .specfun import complete_elliptic_KE
from .xforms import TimeSeries

_SERIES_ALPHA = 1e-2


class VolterraProblem:
    """Right-hand side samples on [delta, T] plus the equation kind."""

    def __init__(self, delta, T, dt, rhs, kind):
        self.delta = float(delta)
        self.T = float(T)
        self.dt = float(dt)
        self.rhs = rhs
        self.kind = kind
        if self.delta <= 0 or self.T <= self.delta:
            raise ValueError("need 0 < delta < T")
        if kind not in ("first", "second"):
            raise ValueError("kind must be first or second")
        if abs(rhs.t0 - self.delta) > 1e-12 or abs(rhs.dt - self.dt) > 1e-12:
            raise ValueError("rhs grid must start at delta with step dt")


def kernel_ktilde(t, r):
    """ktilde(t, r) = rho K(1 - rho), rho = 2r/(t + r); 0 outside 0 <= r <= t."""
    t = np.asarray(t, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    t, r = np.broadcast_arrays(t, r)
    out = np.zeros(t.shape)
    ok = (r > 0) & (r <= t) & (t > 0)
    if np.any(ok):
        rho = 2.0 * r[ok] / (t[ok] + r[ok])
        alpha = 1.0 - rho
        kk, _ = complete_elliptic_KE(alpha)
        out[ok] = rho * kk
    if out.ndim == 0:
        return float(out)
    return out


def _dK(alpha):
    # dK/dalpha, elliptic-pair form with a series fallback near alpha = 0
    alpha = np.asarray(alpha, dtype=np.float64)
    out = np.empty(alpha.shape)
    small = np.abs(alpha) < _SERIES_ALPHA
    if np.any(small):
        a = alpha[small]
        out[small] = (np.pi / 2.0) * (a / 2.0 + (9.0 / 16.0) * a**3 + (75.0 / 128.0) * a**5)
    big = ~small
    if np.any(big):
        a = alpha[big]
        kk, ee = complete_elliptic_KE(a)
        out[big] = (ee - (1.0 - a * a) * kk) / (a * (1.0 - a * a))
    return out


def kernel_ktilde_dt(t, r):
    """Analytic d/dt of ktilde; equals -pi/(4t) on the diagonal r = t."""
    t = np.asarray(t, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    t, r = np.broadcast_arrays(t, r)
    out = np.zeros(t.shape)
    ok = (r > 0) & (r <= t) & (t > 0)
    if np.any(ok):
        rho = 2.0 * r[ok] / (t[ok] + r[ok])
        alpha = 1.0 - rho
        kk, _ = complete_elliptic_KE(alpha)
        out[ok] = -(rho / (t[ok] + r[ok])) * (kk - rho * _dK(alpha))
    if out.ndim == 0:
        return float(out)
    return out


def differentiate_rhs(problem):
    """Fourth-order finite-difference derivative; first kind -> second kind."""
    if problem.kind != "first":
        raise ValueError("differentiate_rhs expects a first-kind problem")
    f = problem.rhs.samples
    n = f.shape[-1]
    if n < 5:
        raise ValueError("need at least 5 samples to differentiate")
    h = problem.dt
    d = np.empty_like(f)
    d[..., 2:-2] = (-f[..., 4:] + 8.0 * f[..., 3:-1] - 8.0 * f[..., 1:-3] + f[..., :-4]) / (12.0 * h)
    d[..., 0] = (-25.0 * f[..., 0] + 48.0 * f[..., 1] - 36.0 * f[..., 2]
                 + 16.0 * f[..., 3] - 3.0 * f[..., 4]) / (12.0 * h)
    d[..., 1] = (-3.0 * f[..., 0] - 10.0 * f[..., 1] + 18.0 * f[..., 2]
                 - 6.0 * f[..., 3] + f[..., 4]) / (12.0 * h)
    d[..., -1] = (25.0 * f[..., -1] - 48.0 * f[..., -2] + 36.0 * f[..., -3]
                  - 16.0 * f[..., -4] + 3.0 * f[..., -5]) / (12.0 * h)
    d[..., -2] = (3.0 * f[..., -1] + 10.0 * f[..., -2] - 18.0 * f[..., -3]
                  + 6.0 * f[..., -4] - f[..., -5]) / (12.0 * h)
    return VolterraProblem(problem.delta, problem.T, problem.dt,
                           TimeSeries(problem.delta, problem.dt, d), "second")


def second_kind_matrix(delta, dt, n):
    """Lower-triangular product-trapezoid matrix of the second-kind scheme.

    Row i discretizes (pi/2) M1(t_i) + integral_delta^{t_i} d_t ktilde M1 dr
    on the shared grid t_j = delta + j dt; detector independent.
    """
    t = delta + dt * np.arange(n)
    A = np.zeros((n, n))
    ti = t[:, None]
    rj = t[None, :]
    lower = rj <= ti
    D = np.where(lower, kernel_ktilde_dt(np.broadcast_to(ti, (n, n)), np.broadcast_to(rj, (n, n))), 0.0)
    W = np.where(lower, dt, 0.0)
    idx = np.arange(n)
    W[idx, idx] = 0.5 * dt
    W[:, 0] = np.where(lower[:, 0], 0.5 * dt, 0.0)
    W[0, :] = 0.0
    A = W * D
    A[idx, idx] += np.pi / 2.0
    return A


def solve_second_kind(problem):
    """Solve the second-kind equation for M1 on [delta, T].

    rhs samples may carry leading batch axes (one solve per detector); the
    triangular system is factored once and shared.
    """
    if problem.kind != "second":
        raise ValueError("solve_second_kind expects a second-kind problem")
    f = problem.rhs.samples
    n = f.shape[-1]
    A = second_kind_matrix(problem.delta, problem.dt, n)
    b = f.reshape(-1, n).T
    sol = solve_triangular(A, b, lower=True)
    return TimeSeries(problem.delta, problem.dt, sol.T.reshape(f.shape))
