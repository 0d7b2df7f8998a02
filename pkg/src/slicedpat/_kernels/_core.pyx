# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot numerical kernels.

Mirrors ``_fallback`` one to one; see that module for the reference
semantics.  Loops run without the GIL so callers can chunk work across
threads; per-cell reduction order is fixed regardless of chunking.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, log, cos, sin, asin, fabs, hypot, M_PI

cnp.import_array()

BACKEND = "compiled"

cdef double _AGM_TOL = 1e-17
cdef int _AGM_MAX = 60
cdef double _EULER_GAMMA = 0.5772156649015328606
cdef double _BESSEL_SWITCH = 14.0
cdef int _SERIES_TERMS = 42
cdef int _ASYM_TERMS = 18


cdef inline double _agm_k(double k) noexcept nogil:
    cdef double a = 1.0
    cdef double b = sqrt(1.0 - k * k)
    cdef double c = fabs(k)
    cdef double an
    cdef int n = 0
    while c > _AGM_TOL and n < _AGM_MAX:
        c = 0.5 * (a - b)
        an = 0.5 * (a + b)
        b = sqrt(a * b)
        a = an
        n += 1
    return M_PI / (2.0 * a)


cdef inline void _agm_ke(double k, double* kk, double* ee) noexcept nogil:
    cdef double a = 1.0
    cdef double b = sqrt(1.0 - k * k)
    cdef double c = fabs(k)
    cdef double s = 0.5 * c * c
    cdef double pow2 = 0.5
    cdef double an
    cdef int n = 0
    while c > _AGM_TOL and n < _AGM_MAX:
        c = 0.5 * (a - b)
        an = 0.5 * (a + b)
        b = sqrt(a * b)
        a = an
        pow2 *= 2.0
        s += pow2 * c * c
        n += 1
    kk[0] = M_PI / (2.0 * a)
    ee[0] = kk[0] * (1.0 - s)


cdef inline void _j0y0(double x, double* j0, double* y0) noexcept nogil:
    cdef double z, term, js, ys, h, invx, p, q, a, powx, theta, amp, ct, st
    cdef int l, m, sgn
    if x <= _BESSEL_SWITCH:
        z = 0.25 * x * x
        term = 1.0
        js = 1.0
        ys = 0.0
        h = 0.0
        for l in range(1, _SERIES_TERMS):
            term = term * (-z) / (l * l)
            js += term
            h += 1.0 / l
            ys -= h * term
        j0[0] = js
        y0[0] = (2.0 / M_PI) * ((log(0.5 * x) + _EULER_GAMMA) * js + ys)
    else:
        invx = 1.0 / x
        p = 0.0
        q = 0.0
        a = 1.0
        powx = 1.0
        for m in range(_ASYM_TERMS):
            if m > 0:
                a = a * (2 * m - 1) * (2 * m - 1) / (8.0 * m)
                powx *= invx
            if m % 2 == 0:
                sgn = 1 if (m // 2) % 2 == 0 else -1
                p += sgn * a * powx
            else:
                sgn = 1 if ((m + 1) // 2) % 2 == 0 else -1
                q += sgn * a * powx
        theta = x - 0.25 * M_PI
        amp = sqrt(2.0 / (M_PI * x))
        ct = cos(theta)
        st = sin(theta)
        j0[0] = amp * (p * ct - q * st)
        y0[0] = amp * (p * st + q * ct)


def elliptic_ke(k):
    """Complete elliptic integrals (K(k), E(k)) for modulus array, |k| < 1."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] karr = np.ascontiguousarray(k, dtype=np.float64).ravel()
    cdef Py_ssize_t n = karr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kk = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ee = np.empty(n)
    cdef double[::1] kv = karr
    cdef double[::1] ko = kk
    cdef double[::1] eo = ee
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            _agm_ke(kv[i], &ko[i], &eo[i])
    shape = np.shape(k)
    return kk.reshape(shape), ee.reshape(shape)


def bessel_j0y0(x):
    """(J0(x), Y0(x)) for an array of strictly positive arguments."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xarr = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef Py_ssize_t n = xarr.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] j0 = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y0 = np.empty(n)
    cdef double[::1] xv = xarr
    cdef double[::1] jo = j0
    cdef double[::1] yo = y0
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            _j0y0(xv[i], &jo[i], &yo[i])
    shape = np.shape(x)
    return j0.reshape(shape), y0.reshape(shape)


def twocenter_w(qx, qy, qw, double x0, double x1, zx, zy, times, double rmin,
                double wcell):
    """Two-center kernel integral W(x, z, t) over weighted support nodes.

    Each node contribution fades in over the time window in which the
    onset surface t = a + b sweeps an equal-area disc cell (covered-area
    weight mu), keeping the node sum continuously differentiable in t.
    """
    cdef double[::1] qxv = np.ascontiguousarray(qx, dtype=np.float64)
    cdef double[::1] qyv = np.ascontiguousarray(qy, dtype=np.float64)
    cdef double[::1] qwv = np.ascontiguousarray(qw, dtype=np.float64)
    cdef double[::1] zxv = np.ascontiguousarray(zx, dtype=np.float64)
    cdef double[::1] zyv = np.ascontiguousarray(zy, dtype=np.float64)
    cdef double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef Py_ssize_t nm = qxv.shape[0]
    cdef Py_ssize_t nz = zxv.shape[0]
    cdef Py_ssize_t nt = tv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((nz, nt))
    cdef double[:, ::1] ov = out
    cdef cnp.ndarray[cnp.float64_t, ndim=1] am = np.empty(nm)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] uxm = np.empty(nm)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] uym = np.empty(nm)
    cdef double[::1] av = am
    cdef double[::1] uxv = uxm
    cdef double[::1] uyv = uym
    cdef Py_ssize_t p, m, i
    cdef double a, ax, b, bz, s, w, t, tt, den, num, kap2, kap, kk
    cdef double g, wc, phi1, v, mu
    with nogil:
        for m in range(nm):
            ax = hypot(qxv[m] - x0, qyv[m] - x1)
            av[m] = ax if ax > rmin else rmin
            if ax > 1e-300:
                uxv[m] = (qxv[m] - x0) / ax
                uyv[m] = (qyv[m] - x1) / ax
            else:
                uxv[m] = 0.0
                uyv[m] = 0.0
        for p in range(nz):
            for m in range(nm):
                bz = hypot(qxv[m] - zxv[p], qyv[m] - zyv[p])
                b = bz if bz > rmin else rmin
                a = av[m]
                if bz > 1e-300:
                    g = hypot(uxv[m] + (qxv[m] - zxv[p]) / bz,
                              uyv[m] + (qyv[m] - zyv[p]) / bz)
                else:
                    g = hypot(uxv[m], uyv[m])
                if g < 0.2:
                    g = 0.2
                wc = g * wcell
                s = a + b
                w = a - b
                phi1 = s + wc
                for i in range(nt):
                    t = tv[i]
                    if t <= s - wc:
                        continue
                    v = (t - s) / wc
                    if v >= 1.0:
                        mu = 1.0
                        tt = t
                    else:
                        if v > 1.0:
                            v = 1.0
                        elif v < -1.0:
                            v = -1.0
                        mu = 0.5 + (v * sqrt(1.0 - v * v) + asin(v)) / M_PI
                        tt = t if t > phi1 else phi1
                    den = tt * tt - w * w
                    num = tt * tt - s * s
                    kap2 = num / den
                    if kap2 < 0.0:
                        kap2 = 0.0
                    elif kap2 > 1.0 - 1e-16:
                        kap2 = 1.0 - 1e-16
                    kap = sqrt(kap2)
                    kk = _agm_k(kap)
                    ov[p, i] += qwv[m] * mu * 2.0 * kk / sqrt(den)
    return out


cdef inline double _trilin(double[:, :, ::1] v, double ox, double oy, double oz,
                           double dx, double dy, double dz,
                           double px, double py, double pz) noexcept nogil:
    cdef Py_ssize_t nx = v.shape[0]
    cdef Py_ssize_t ny = v.shape[1]
    cdef Py_ssize_t nz = v.shape[2]
    cdef double u = (px - ox) / dx
    cdef double w = (py - oy) / dy
    cdef double s = (pz - oz) / dz
    # tolerate division roundoff at the box faces before declaring a point outside
    if u < -1e-9 or u > nx - 1 + 1e-9 or w < -1e-9 or w > ny - 1 + 1e-9 \
            or s < -1e-9 or s > nz - 1 + 1e-9:
        return 0.0
    if u < 0:
        u = 0.0
    if w < 0:
        w = 0.0
    if s < 0:
        s = 0.0
    if u > nx - 1 - 1e-12:
        u = nx - 1 - 1e-12
    if w > ny - 1 - 1e-12:
        w = ny - 1 - 1e-12
    if s > nz - 1 - 1e-12:
        s = nz - 1 - 1e-12
    cdef Py_ssize_t i = <Py_ssize_t> u
    cdef Py_ssize_t j = <Py_ssize_t> w
    cdef Py_ssize_t k = <Py_ssize_t> s
    cdef double fu = u - i
    cdef double fv = w - j
    cdef double fw = s - k
    return (v[i, j, k] * (1 - fu) * (1 - fv) * (1 - fw)
            + v[i + 1, j, k] * fu * (1 - fv) * (1 - fw)
            + v[i, j + 1, k] * (1 - fu) * fv * (1 - fw)
            + v[i + 1, j + 1, k] * fu * fv * (1 - fw)
            + v[i, j, k + 1] * (1 - fu) * (1 - fv) * fw
            + v[i + 1, j, k + 1] * fu * (1 - fv) * fw
            + v[i, j + 1, k + 1] * (1 - fu) * fv * fw
            + v[i + 1, j + 1, k + 1] * fu * fv * fw)


cdef inline double _bilin(double[:, ::1] v, double ox, double oy,
                          double dx, double dy, double px, double py) noexcept nogil:
    cdef Py_ssize_t nx = v.shape[0]
    cdef Py_ssize_t ny = v.shape[1]
    cdef double u = (px - ox) / dx
    cdef double w = (py - oy) / dy
    # tolerate division roundoff at the box faces before declaring a point outside
    if u < -1e-9 or u > nx - 1 + 1e-9 or w < -1e-9 or w > ny - 1 + 1e-9:
        return 0.0
    if u < 0:
        u = 0.0
    if w < 0:
        w = 0.0
    if u > nx - 1 - 1e-12:
        u = nx - 1 - 1e-12
    if w > ny - 1 - 1e-12:
        w = ny - 1 - 1e-12
    cdef Py_ssize_t i = <Py_ssize_t> u
    cdef Py_ssize_t j = <Py_ssize_t> w
    cdef double fu = u - i
    cdef double fv = w - j
    return (v[i, j] * (1 - fu) * (1 - fv)
            + v[i + 1, j] * fu * (1 - fv)
            + v[i, j + 1] * (1 - fu) * fv
            + v[i + 1, j + 1] * fu * fv)


def trilinear(vals, double ox, double oy, double oz, double dx, double dy, double dz, pts):
    """Trilinear interpolation of a 3-d grid at pts (N,3); 0 outside the box."""
    cdef double[:, :, ::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef double[:, ::1] pv = np.ascontiguousarray(pts, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _trilin(v, ox, oy, oz, dx, dy, dz, pv[i, 0], pv[i, 1], pv[i, 2])
    return out


def bilinear(vals, double ox, double oy, double dx, double dy, pts):
    """Bilinear interpolation of a 2-d grid at pts (N,2); 0 outside the box."""
    cdef double[:, ::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef double[:, ::1] pv = np.ascontiguousarray(pts, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _bilin(v, ox, oy, dx, dy, pv[i, 0], pv[i, 1])
    return out


def ellipsoid_n3d(vals, double ox, double oy, double oz, double dx, double dy, double dz,
                  x, zpts, times, eta, etaw, Py_ssize_t nphi):
    """Ellipsoidal (prolate spheroid) mean of a 3-d field; see _fallback."""
    cdef double[:, :, ::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] zv = np.ascontiguousarray(zpts, dtype=np.float64)
    cdef double[::1] tv = np.ascontiguousarray(times, dtype=np.float64)
    cdef double[::1] ev = np.ascontiguousarray(eta, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(etaw, dtype=np.float64)
    cdef Py_ssize_t nz = zv.shape[0]
    cdef Py_ssize_t nt = tv.shape[0]
    cdef Py_ssize_t ne = ev.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((nz, nt))
    cdef double[:, ::1] ov = out
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cp = np.cos(2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sp = np.sin(2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi)
    cdef double[::1] cpv = cp
    cdef double[::1] spv = sp
    cdef double wphi = (2.0 * M_PI / nphi) / (32.0 * M_PI * M_PI)
    cdef Py_ssize_t p, i, je, jp
    cdef double d, ax, rad, axial, ring, acc, accp, eta_j, se
    cdef double e1x, e1y, e1z, e2x, e2y, e2z, e3x, e3y, e3z
    cdef double cx, cy, cz, px, py, pz, t, m0, m1, m2
    with nogil:
        for p in range(nz):
            e1x = xv[0] - zv[p, 0]
            e1y = xv[1] - zv[p, 1]
            e1z = xv[2] - zv[p, 2]
            d = sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
            if d < 1e-14:
                d = 0.0
                e1x = 0.0
                e1y = 0.0
                e1z = 1.0
            else:
                e1x /= d
                e1y /= d
                e1z /= d
            # deterministic orthonormal frame: axis of smallest |e1| component
            m0 = fabs(e1x)
            m1 = fabs(e1y)
            m2 = fabs(e1z)
            if m0 <= m1 and m0 <= m2:
                e2x = 1.0 - e1x * e1x
                e2y = -e1x * e1y
                e2z = -e1x * e1z
            elif m1 <= m2:
                e2x = -e1y * e1x
                e2y = 1.0 - e1y * e1y
                e2z = -e1y * e1z
            else:
                e2x = -e1z * e1x
                e2y = -e1z * e1y
                e2z = 1.0 - e1z * e1z
            se = sqrt(e2x * e2x + e2y * e2y + e2z * e2z)
            e2x /= se
            e2y /= se
            e2z /= se
            e3x = e1y * e2z - e1z * e2y
            e3y = e1z * e2x - e1x * e2z
            e3z = e1x * e2y - e1y * e2x
            cx = 0.5 * (xv[0] + zv[p, 0])
            cy = 0.5 * (xv[1] + zv[p, 1])
            cz = 0.5 * (xv[2] + zv[p, 2])
            for i in range(nt):
                t = tv[i]
                if d > 0:
                    if t <= d + 1e-15:
                        continue
                elif t <= 0:
                    continue
                ax = 0.5 * t
                rad = t * t - d * d
                rad = 0.5 * sqrt(rad if rad > 0 else 0.0)
                acc = 0.0
                for je in range(ne):
                    eta_j = ev[je]
                    axial = ax * eta_j
                    se = 1.0 - eta_j * eta_j
                    ring = rad * sqrt(se if se > 0 else 0.0)
                    accp = 0.0
                    for jp in range(nphi):
                        px = cx + axial * e1x + ring * (cpv[jp] * e2x + spv[jp] * e3x)
                        py = cy + axial * e1y + ring * (cpv[jp] * e2y + spv[jp] * e3y)
                        pz = cz + axial * e1z + ring * (cpv[jp] * e2z + spv[jp] * e3z)
                        accp += _trilin(v, ox, oy, oz, dx, dy, dz, px, py, pz)
                    acc += wv[je] * accp
                ov[p, i] = acc * wphi
    return out


def sphere_mean(vals, double ox, double oy, double oz, double dx, double dy, double dz,
                centers, radii, eta, etaw, Py_ssize_t nphi):
    """Normalized spherical means M[c, r] of a 3-d field (mean of 1 is 1)."""
    cdef double[:, :, ::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(centers, dtype=np.float64)
    cdef double[::1] rv = np.ascontiguousarray(radii, dtype=np.float64)
    cdef double[::1] ev = np.ascontiguousarray(eta, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(etaw, dtype=np.float64)
    cdef Py_ssize_t nc = cv.shape[0]
    cdef Py_ssize_t nr = rv.shape[0]
    cdef Py_ssize_t ne = ev.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((nc, nr))
    cdef double[:, ::1] ov = out
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cp = np.cos(2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sp = np.sin(2.0 * np.pi * (np.arange(nphi) + 0.5) / nphi)
    cdef double[::1] cpv = cp
    cdef double[::1] spv = sp
    cdef double wphi = (2.0 * M_PI / nphi) / (4.0 * M_PI)
    cdef Py_ssize_t c, i, je, jp
    cdef double r, rho, acc, accp, eta_j, se
    with nogil:
        for c in range(nc):
            for i in range(nr):
                r = rv[i]
                acc = 0.0
                for je in range(ne):
                    eta_j = ev[je]
                    se = 1.0 - eta_j * eta_j
                    rho = r * sqrt(se if se > 0 else 0.0)
                    accp = 0.0
                    for jp in range(nphi):
                        accp += _trilin(v, ox, oy, oz, dx, dy, dz,
                                        cv[c, 0] + rho * cpv[jp],
                                        cv[c, 1] + rho * spv[jp],
                                        cv[c, 2] + r * eta_j)
                    acc += wv[je] * accp
                ov[c, i] = acc * wphi
    return out


def circle_mean(vals, double ox, double oy, double dx, double dy,
                centers, radii, Py_ssize_t nphi):
    """Normalized circular means M[c, r] of a 2-d field (mean of 1 is 1)."""
    cdef double[:, ::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef double[:, ::1] cv = np.ascontiguousarray(centers, dtype=np.float64)
    cdef double[::1] rv = np.ascontiguousarray(radii, dtype=np.float64)
    cdef Py_ssize_t nc = cv.shape[0]
    cdef Py_ssize_t nr = rv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((nc, nr))
    cdef double[:, ::1] ov = out
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cp = np.cos(2.0 * np.pi * np.arange(nphi) / nphi)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sp = np.sin(2.0 * np.pi * np.arange(nphi) / nphi)
    cdef double[::1] cpv = cp
    cdef double[::1] spv = sp
    cdef Py_ssize_t c, i, jp
    cdef double r, acc
    with nogil:
        for c in range(nc):
            for i in range(nr):
                r = rv[i]
                acc = 0.0
                for jp in range(nphi):
                    acc += _bilin(v, ox, oy, dx, dy,
                                  cv[c, 0] + r * cpv[jp], cv[c, 1] + r * spv[jp])
                ov[c, i] = acc / nphi
    return out
