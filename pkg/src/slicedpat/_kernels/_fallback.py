"""NumPy reference implementations of the hot numerical kernels.

This module mirrors the compiled extension ``_core`` one to one: same
functions, same argument conventions, same algorithms.  The package falls
back to it when the extension is unavailable (see ``slicedpat._kernels``).
Per-cell reductions run in a fixed order, so results do not depend on how
callers chunk the work across threads.
"""

import numpy as np

BACKEND = "fallback"

_AGM_TOL = 1e-17
_AGM_MAX = 60

_EULER_GAMMA = 0.5772156649015328606
_BESSEL_SWITCH = 14.0
_SERIES_TERMS = 42
_ASYM_TERMS = 18  # a_0 .. a_17


def elliptic_ke(k):
    """Complete elliptic integrals (K(k), E(k)) for modulus array, |k| < 1.

    AGM iteration: a_0 = 1, b_0 = sqrt(1-k^2), c_0 = k;
    K = pi/(2 a_N), E = K (1 - sum 2^{n-1} c_n^2).
    """
    k = np.ascontiguousarray(k, dtype=np.float64)
    a = np.ones_like(k)
    b = np.sqrt(1.0 - k * k)
    c = np.abs(k)
    s = 0.5 * c * c
    pow2 = 0.5
    for _ in range(_AGM_MAX):
        if c.size == 0 or np.max(np.abs(c)) <= _AGM_TOL:
            break
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        pow2 *= 2.0
        s = s + pow2 * c * c
    kk = np.pi / (2.0 * a)
    ee = kk * (1.0 - s)
    return kk, ee


def _j0y0_series(x):
    # ascending series, x in (0, 14]
    z = 0.25 * x * x
    term = np.ones_like(x)
    j0 = np.ones_like(x)
    ysum = np.zeros_like(x)
    h = 0.0
    for l in range(1, _SERIES_TERMS):
        term = term * (-z) / (l * l)
        j0 = j0 + term
        h = h + 1.0 / l
        # (-1)^{l+1} H_l z^l/(l!)^2  =  -H_l * term
        ysum = ysum - h * term
    y0 = (2.0 / np.pi) * ((np.log(0.5 * x) + _EULER_GAMMA) * j0 + ysum)
    return j0, y0


def _j0y0_asym(x):
    # Hankel asymptotic expansion, x > 14
    inv = 1.0 / x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    a = 1.0
    powx = np.ones_like(x)
    for m in range(_ASYM_TERMS):
        if m > 0:
            a = a * (2 * m - 1) ** 2 / (8.0 * m)
            powx = powx * inv
        if m % 2 == 0:
            p = p + ((-1.0) ** (m // 2)) * a * powx
        else:
            q = q + ((-1.0) ** ((m + 1) // 2)) * a * powx
    theta = x - 0.25 * np.pi
    amp = np.sqrt(2.0 / (np.pi * x))
    ct, st = np.cos(theta), np.sin(theta)
    j0 = amp * (p * ct - q * st)
    y0 = amp * (p * st + q * ct)
    return j0, y0


def bessel_j0y0(x):
    """(J0(x), Y0(x)) for an array of strictly positive arguments."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    j0 = np.empty_like(x)
    y0 = np.empty_like(x)
    lo = x <= _BESSEL_SWITCH
    if np.any(lo):
        j0[lo], y0[lo] = _j0y0_series(x[lo])
    hi = ~lo
    if np.any(hi):
        j0[hi], y0[hi] = _j0y0_asym(x[hi])
    return j0, y0


def twocenter_w(qx, qy, qw, x0, x1, zx, zy, times, rmin, wcell):
    """Two-center kernel integral W(x, z, t) over weighted support nodes.

    W[p, i] = sum_m qw[m] * mu_pm(t_i) * k2(tt, a_m, b_pm) where
    a = |x - y_m|, b = |z_p - y_m| (clamped below by rmin) and
    k2(t, a, b) = 2 K(kappa) / sqrt(t^2 - (a-b)^2) for t > a + b,
    kappa^2 = (t^2 - (a+b)^2) / (t^2 - (a-b)^2).

    A node's contribution switches on over the time window in which the
    level set t = a + b sweeps an equal-area disc cell of radius wcell:
    mu is the covered area fraction of that disc and tt = max(t, a+b+w)
    keeps the kernel argument past the onset, with w = |grad(a+b)| wcell.
    This keeps the node sum continuously differentiable in t, which the
    downstream data-differentiation stages require.
    """
    qx = np.asarray(qx, dtype=np.float64)
    qy = np.asarray(qy, dtype=np.float64)
    qw = np.asarray(qw, dtype=np.float64)
    zx = np.asarray(zx, dtype=np.float64)
    zy = np.asarray(zy, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    ax = np.hypot(qx - x0, qy - x1)
    a = np.maximum(ax, rmin)
    safe_a = np.maximum(ax, 1e-300)
    ux = (qx - x0) / safe_a
    uy = (qy - x1) / safe_a
    out = np.zeros((zx.size, times.size))
    t = times[None, :]
    for p in range(zx.size):
        bz = np.hypot(qx - zx[p], qy - zy[p])
        b = np.maximum(bz, rmin)
        safe_b = np.maximum(bz, 1e-300)
        g = np.hypot(ux + (qx - zx[p]) / safe_b, uy + (qy - zy[p]) / safe_b)
        wc = (np.maximum(g, 0.2) * wcell)[:, None]
        phi0 = (a + b)[:, None]
        v = np.clip((t - phi0) / wc, -1.0, 1.0)
        mu = 0.5 + (v * np.sqrt(1.0 - v * v) + np.arcsin(v)) / np.pi
        if not np.any(mu > 0.0):
            continue
        tt = np.maximum(t, phi0 + wc)
        den = tt * tt - ((a - b) ** 2)[:, None]
        num = tt * tt - phi0 * phi0
        kap = np.sqrt(np.clip(num / den, 0.0, 1.0 - 1e-16))
        kk, _ = elliptic_ke(kap.ravel())
        kk = kk.reshape(kap.shape)
        vals = mu * 2.0 * kk / np.sqrt(den)
        out[p, :] = qw @ vals
    return out


def _frame(e1):
    # deterministic orthonormal complement of unit vector e1
    ax = np.argmin(np.abs(e1))
    v = np.zeros(3)
    v[ax] = 1.0
    e2 = v - np.dot(v, e1) * e1
    e2 /= np.linalg.norm(e2)
    e3 = np.cross(e1, e2)
    return e2, e3


def trilinear(vals, ox, oy, oz, dx, dy, dz, pts):
    """Trilinear interpolation of a 3-d grid at pts (N,3); 0 outside the box."""
    vals = np.asarray(vals, dtype=np.float64)
    nx, ny, nz = vals.shape
    u = (pts[:, 0] - ox) / dx
    v = (pts[:, 1] - oy) / dy
    w = (pts[:, 2] - oz) / dz
    # tolerate division roundoff at the box faces before declaring a point outside
    inside = (
        (u >= -1e-9) & (u <= nx - 1 + 1e-9)
        & (v >= -1e-9) & (v <= ny - 1 + 1e-9)
        & (w >= -1e-9) & (w <= nz - 1 + 1e-9)
    )
    u = np.clip(u, 0, nx - 1 - 1e-12)
    v = np.clip(v, 0, ny - 1 - 1e-12)
    w = np.clip(w, 0, nz - 1 - 1e-12)
    i = u.astype(np.intp)
    j = v.astype(np.intp)
    k = w.astype(np.intp)
    fu = u - i
    fv = v - j
    fw = w - k
    c000 = vals[i, j, k]
    c100 = vals[i + 1, j, k]
    c010 = vals[i, j + 1, k]
    c110 = vals[i + 1, j + 1, k]
    c001 = vals[i, j, k + 1]
    c101 = vals[i + 1, j, k + 1]
    c011 = vals[i, j + 1, k + 1]
    c111 = vals[i + 1, j + 1, k + 1]
    out = (
        c000 * (1 - fu) * (1 - fv) * (1 - fw)
        + c100 * fu * (1 - fv) * (1 - fw)
        + c010 * (1 - fu) * fv * (1 - fw)
        + c110 * fu * fv * (1 - fw)
        + c001 * (1 - fu) * (1 - fv) * fw
        + c101 * fu * (1 - fv) * fw
        + c011 * (1 - fu) * fv * fw
        + c111 * fu * fv * fw
    )
    return np.where(inside, out, 0.0)


def bilinear(vals, ox, oy, dx, dy, pts):
    """Bilinear interpolation of a 2-d grid at pts (N,2); 0 outside the box."""
    vals = np.asarray(vals, dtype=np.float64)
    nx, ny = vals.shape
    u = (pts[:, 0] - ox) / dx
    v = (pts[:, 1] - oy) / dy
    # tolerate division roundoff at the box faces before declaring a point outside
    inside = (u >= -1e-9) & (u <= nx - 1 + 1e-9) & (v >= -1e-9) & (v <= ny - 1 + 1e-9)
    u = np.clip(u, 0, nx - 1 - 1e-12)
    v = np.clip(v, 0, ny - 1 - 1e-12)
    i = u.astype(np.intp)
    j = v.astype(np.intp)
    fu = u - i
    fv = v - j
    out = (
        vals[i, j] * (1 - fu) * (1 - fv)
        + vals[i + 1, j] * fu * (1 - fv)
        + vals[i, j + 1] * (1 - fu) * fv
        + vals[i + 1, j + 1] * fu * fv
    )
    return np.where(inside, out, 0.0)


def ellipsoid_n3d(vals, ox, oy, oz, dx, dy, dz, x, zpts, times, eta, etaw, nphi):
    """Ellipsoidal (prolate spheroid) mean of a 3-d field.

    N[p, i] = (1/(32 pi^2)) sum_eta sum_phi etaw * (2 pi/nphi) * q(y) over the
    spheroid with foci x and zpts[p] and string length times[i]; zero when
    times[i] <= |x - zpts[p]|.
    """
    x = np.asarray(x, dtype=np.float64)
    zpts = np.asarray(zpts, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    etaw = np.asarray(etaw, dtype=np.float64)
    phis = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
    cphi, sphi = np.cos(phis), np.sin(phis)
    nt = times.size
    ne = eta.size
    out = np.zeros((zpts.shape[0], nt))
    wq = np.repeat(etaw, nphi) * (2.0 * np.pi / nphi) / (32.0 * np.pi**2)
    for p in range(zpts.shape[0]):
        z = zpts[p]
        dvec = x - z
        d = np.linalg.norm(dvec)
        if d < 1e-14:
            e1 = np.array([0.0, 0.0, 1.0])
            d = 0.0
        else:
            e1 = dvec / d
        e2, e3 = _frame(e1)
        center = 0.5 * (x + z)
        ok = times > d + 1e-15 if d > 0 else times > 0
        if not np.any(ok):
            continue
        ts = times[ok]
        ax = 0.5 * ts  # c * xi0 = t/2
        rad = 0.5 * np.sqrt(np.maximum(ts * ts - d * d, 0.0))
        # nodes: (nt_ok, ne, nphi, 3)
        axial = ax[:, None] * eta[None, :]
        ring = rad[:, None] * np.sqrt(np.maximum(1.0 - eta * eta, 0.0))[None, :]
        pts = (
            center[None, None, None, :]
            + axial[:, :, None, None] * e1[None, None, None, :]
            + ring[:, :, None, None]
            * (cphi[None, None, :, None] * e2[None, None, None, :] + sphi[None, None, :, None] * e3[None, None, None, :])
        )
        flat = pts.reshape(-1, 3)
        qv = trilinear(vals, ox, oy, oz, dx, dy, dz, flat).reshape(ts.size, ne * nphi)
        out[p, ok] = qv @ wq
    return out


def sphere_mean(vals, ox, oy, oz, dx, dy, dz, centers, radii, eta, etaw, nphi):
    """Normalized spherical means M[c, r] of a 3-d field (mean of 1 is 1)."""
    centers = np.asarray(centers, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    etaw = np.asarray(etaw, dtype=np.float64)
    phis = 2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi
    dirs = np.empty((eta.size, nphi, 3))
    rho = np.sqrt(np.maximum(1.0 - eta * eta, 0.0))
    dirs[:, :, 0] = rho[:, None] * np.cos(phis)[None, :]
    dirs[:, :, 1] = rho[:, None] * np.sin(phis)[None, :]
    dirs[:, :, 2] = eta[:, None]
    w = (np.repeat(etaw, nphi) * (2.0 * np.pi / nphi)) / (4.0 * np.pi)
    dflat = dirs.reshape(-1, 3)
    out = np.empty((centers.shape[0], radii.size))
    for c in range(centers.shape[0]):
        pts = centers[c][None, None, :] + radii[:, None, None] * dflat[None, :, :]
        qv = trilinear(vals, ox, oy, oz, dx, dy, dz, pts.reshape(-1, 3)).reshape(radii.size, -1)
        out[c, :] = qv @ w
    return out


def circle_mean(vals, ox, oy, dx, dy, centers, radii, nphi):
    """Normalized circular means M[c, r] of a 2-d field (mean of 1 is 1)."""
    centers = np.asarray(centers, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    phis = 2.0 * np.pi * np.arange(nphi) / nphi
    dirs = np.stack([np.cos(phis), np.sin(phis)], axis=1)
    out = np.empty((centers.shape[0], radii.size))
    for c in range(centers.shape[0]):
        pts = centers[c][None, None, :] + radii[:, None, None] * dirs[None, :, :]
        qv = bilinear(vals, ox, oy, dx, dy, pts.reshape(-1, 2)).reshape(radii.size, nphi)
        out[c, :] = qv.mean(axis=1)
    return out
