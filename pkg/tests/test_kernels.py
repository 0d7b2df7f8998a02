import numpy as np
import pytest

from slicedpat import _kernels
from slicedpat._kernels import _fallback

compiled_only = pytest.mark.skipif(
    _kernels.BACKEND != "compiled",
    reason="compiled extension not active; nothing to cross-check",
)


def test_backend_reported():
    assert _kernels.BACKEND in ("compiled", "fallback")
    assert _fallback.BACKEND == "fallback"


@compiled_only
def test_elliptic_ke_matches_fallback(rng):
    a = rng.uniform(-0.9999, 0.9999, 400)
    k1, e1 = _kernels.elliptic_ke(a)
    k2, e2 = _fallback.elliptic_ke(a)
    assert np.max(np.abs(k1 - k2)) <= 1e-12 * np.max(np.abs(k2))
    assert np.max(np.abs(e1 - e2)) <= 1e-13


@compiled_only
def test_bessel_matches_fallback(rng):
    x = rng.uniform(0.01, 80.0, 400)
    j1, y1 = _kernels.bessel_j0y0(x)
    j2, y2 = _fallback.bessel_j0y0(x)
    assert np.max(np.abs(j1 - j2)) <= 1e-12
    assert np.max(np.abs(y1 - y2)) <= 1e-12


@compiled_only
def test_interpolators_match_fallback(rng):
    vals2 = rng.standard_normal((9, 7))
    pts = np.column_stack([rng.uniform(-0.3, 1.1, 200), rng.uniform(-0.2, 0.9, 200)])
    a = _kernels.bilinear(vals2, 0.0, 0.0, 0.125, 0.14, pts)
    b = _fallback.bilinear(vals2, 0.0, 0.0, 0.125, 0.14, pts)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)

    vals3 = rng.standard_normal((6, 7, 5))
    p3 = np.column_stack([rng.uniform(-0.1, 0.8, 200) for _ in range(3)])
    a3 = _kernels.trilinear(vals3, 0.0, 0.0, 0.0, 0.15, 0.12, 0.2, p3)
    b3 = _fallback.trilinear(vals3, 0.0, 0.0, 0.0, 0.15, 0.12, 0.2, p3)
    np.testing.assert_allclose(a3, b3, rtol=0, atol=1e-14)


@compiled_only
def test_circle_and_sphere_means_match_fallback(rng):
    vals2 = rng.standard_normal((17, 15))
    centers2 = np.column_stack([rng.uniform(0.2, 1.4, 6), rng.uniform(0.2, 1.2, 6)])
    radii = np.linspace(0.05, 0.5, 9)
    a = _kernels.circle_mean(vals2, 0.0, 0.0, 0.1, 0.1, centers2, radii, 64)
    b = _fallback.circle_mean(vals2, 0.0, 0.0, 0.1, 0.1, centers2, radii, 64)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)

    vals3 = rng.standard_normal((11, 11, 11))
    centers3 = np.column_stack([rng.uniform(0.3, 0.8, 4) for _ in range(3)])
    eta, etaw = np.polynomial.legendre.leggauss(12)
    a3 = _kernels.sphere_mean(vals3, 0.0, 0.0, 0.0, 0.11, 0.11, 0.11,
                              centers3, radii, eta, etaw, 24)
    b3 = _fallback.sphere_mean(vals3, 0.0, 0.0, 0.0, 0.11, 0.11, 0.11,
                               centers3, radii, eta, etaw, 24)
    np.testing.assert_allclose(a3, b3, rtol=0, atol=1e-13)


@compiled_only
def test_twocenter_matches_fallback(rng):
    n = 60
    qx = rng.uniform(-0.3, 0.3, n)
    qy = rng.uniform(-0.3, 0.3, n)
    qw = rng.uniform(0.0, 1e-3, n)
    zx = rng.uniform(-0.4, 0.4, 5)
    zy = rng.uniform(-0.4, 0.4, 5)
    times = np.linspace(0.05, 3.0, 40)
    a = _kernels.twocenter_w(qx, qy, qw, 1.0, 0.0, zx, zy, times, 1e-3, 2e-3)
    b = _fallback.twocenter_w(qx, qy, qw, 1.0, 0.0, zx, zy, times, 1e-3, 2e-3)
    scale = np.max(np.abs(b)) or 1.0
    assert np.max(np.abs(np.asarray(a) - np.asarray(b))) <= 1e-12 * scale


@compiled_only
def test_ellipsoid_mean_matches_fallback(rng):
    vals = rng.standard_normal((9, 9, 9))
    z = np.column_stack([rng.uniform(0.2, 0.7, 4) for _ in range(3)])
    times = np.linspace(0.1, 2.5, 16)
    eta, etaw = np.polynomial.legendre.leggauss(10)
    x = np.array([1.0, 0.1, -0.05])
    a = _kernels.ellipsoid_n3d(vals, 0.0, 0.0, 0.0, 0.12, 0.12, 0.12,
                               x, z, times, eta, etaw, 20)
    b = _fallback.ellipsoid_n3d(vals, 0.0, 0.0, 0.0, 0.12, 0.12, 0.12,
                                x, z, times, eta, etaw, 20)
    np.testing.assert_allclose(np.asarray(a), np.asarray(b), rtol=0, atol=1e-13)
