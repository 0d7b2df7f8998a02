"""Numerical kernel backend selection.

Imports the compiled extension ``_core`` when it is available and falls back
to the NumPy reference implementation otherwise.  Set the environment
variable ``SLICEDPAT_FORCE_FALLBACK=1`` to skip the extension; ``BACKEND``
names the active choice ("compiled" or "fallback").
"""

import os

if os.environ.get("SLICEDPAT_FORCE_FALLBACK", "") == "1":
    from . import _fallback as _impl
else:
    try:
        from . import _core as _impl
    except ImportError:
        from . import _fallback as _impl

BACKEND = _impl.BACKEND

elliptic_ke = _impl.elliptic_ke
bessel_j0y0 = _impl.bessel_j0y0
twocenter_w = _impl.twocenter_w
ellipsoid_n3d = _impl.ellipsoid_n3d
sphere_mean = _impl.sphere_mean
circle_mean = _impl.circle_mean
bilinear = _impl.bilinear
trilinear = _impl.trilinear

__all__ = [
    "BACKEND",
    "elliptic_ke",
    "bessel_j0y0",
    "twocenter_w",
    "ellipsoid_n3d",
    "sphere_mean",
    "circle_mean",
    "bilinear",
    "trilinear",
]
