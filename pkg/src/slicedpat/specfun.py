"""Special functions used by the simulation and reconstruction kernels.

Complete elliptic integral K via the arithmetic-geometric mean, Bessel J0 /
Neumann Y0 / Hankel H0^(1) via ascending series and large-argument
asymptotics, and the positive-part ramp.  Evaluation is delegated to the
active kernel backend; this module adds domain validation and the
negative-argument continuations.
"""

import numpy as np

from . import _kernels


def complete_elliptic_K(alpha):
    """K(alpha) = integral of 1/sqrt(1 - alpha^2 sin^2 phi) over [0, pi/2].

    Even in alpha.  Raises ValueError for |alpha| >= 1 (logarithmic
    singularity at the endpoint); callers must handle that limit themselves.
    """
    arr = np.asarray(alpha, dtype=np.float64)
    if np.any(np.abs(arr) >= 1.0):
        raise ValueError("complete_elliptic_K requires |alpha| < 1")
    kk, _ = _kernels.elliptic_ke(arr.ravel())
    kk = kk.reshape(arr.shape)
    if np.isscalar(alpha) or arr.ndim == 0:
        return float(kk)
    return kk


def complete_elliptic_KE(alpha):
    """(K(alpha), E(alpha)) without endpoint validation; internal helper."""
    arr = np.asarray(alpha, dtype=np.float64)
    kk, ee = _kernels.elliptic_ke(arr.ravel())
    return kk.reshape(arr.shape), ee.reshape(arr.shape)


def hankel0(z, which="H0_1"):
    """Bessel-family values of order zero at real z.

    which = "J0": J0(z), entire and even, returned as complex with zero
    imaginary part.  which = "Y0" or "H0_1": z = 0 raises ValueError
    (logarithmic singularity); negative arguments use the analytic
    continuation across the upper half plane,

        Y0(-x) = Y0(x) + 2i J0(x),
        H0_1(-x) = -conj(H0_1(x)),

    which makes (i/4) H0_1(-x) the complex conjugate of (i/4) H0_1(x), the
    symmetry that keeps time-domain fields real.
    """
    if which not in ("J0", "Y0", "H0_1"):
        raise ValueError("which must be one of J0, Y0, H0_1")
    zf = float(z)
    if which == "J0":
        j0, _ = _kernels.bessel_j0y0(np.array([abs(zf)]) if zf != 0.0 else np.array([0.0]))
        if zf == 0.0:
            return complex(1.0, 0.0)
        return complex(j0[0], 0.0)
    if zf == 0.0:
        raise ValueError("Y0 and H0_1 are singular at z = 0")
    j0, y0 = _kernels.bessel_j0y0(np.array([abs(zf)]))
    j0v, y0v = float(j0[0]), float(y0[0])
    if which == "Y0":
        if zf > 0:
            return complex(y0v, 0.0)
        return complex(y0v, 2.0 * j0v)
    h = complex(j0v, y0v)
    if zf > 0:
        return h
    return -h.conjugate()


def bessel_j0(x):
    """J0 on a real array (even continuation for negative arguments)."""
    arr = np.asarray(x, dtype=np.float64)
    j0 = np.ones_like(arr)
    ax = np.abs(arr)
    nz = ax > 0
    if np.any(nz):
        j0[nz], _ = _kernels.bessel_j0y0(ax[nz])
    return j0


def hankel0_array(x):
    """H0^(1) on an array of strictly positive arguments (complex array)."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr <= 0.0):
        raise ValueError("hankel0_array requires strictly positive arguments")
    j0, y0 = _kernels.bessel_j0y0(arr)
    return j0 + 1j * y0


def ramp_plus(t, a):
    """(t - a) H(t - a): zero for t <= a, linear beyond."""
    t = np.asarray(t, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    out = np.where(t > a, t - a, 0.0)
    if out.ndim == 0:
        return float(out)
    return out
