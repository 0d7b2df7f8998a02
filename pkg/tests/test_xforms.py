import numpy as np
import pytest

from slicedpat.fields import ScalarField, make_illumination
from slicedpat.xforms import (
    Spectrum,
    TimeSeries,
    fourier,
    radon_forward,
    radon_invert,
    radon_invert_points,
    time_antiderivative,
)

from conftest import rel_l2


def gauss_field_2d(n=65, ext=1.0, width=0.3):
    ax = np.linspace(-ext, ext, n)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    vals = np.exp(-((xx - 0.1) ** 2 + (yy + 0.15) ** 2) / width**2)
    return ScalarField([-ext, -ext], [ax[1] - ax[0]] * 2, vals)


def test_timeseries_validation():
    with pytest.raises(ValueError, match="dt"):
        TimeSeries(0.0, 0.0, np.zeros(4))
    with pytest.raises(ValueError, match="finite"):
        TimeSeries(0.0, 0.1, [0.0, np.inf])
    with pytest.raises(ValueError, match="dk"):
        Spectrum(0.0, -1.0, np.zeros(4, dtype=complex))


def test_fourier_matches_direct_sum():
    # the discrete forward transform is the rectangle rule for
    # integral f(t) e^{+ikt} dt on the zero-padded record
    rng = np.random.default_rng(3)
    n = 37
    dt = 0.05
    t0 = 0.2
    samples = rng.standard_normal(n)
    ts = TimeSeries(t0, dt, samples)
    spec = fourier(ts, "forward")
    k = spec.wavenumbers()
    t = ts.times()
    for idx in [0, 5, len(k) // 2, len(k) - 3]:
        direct = dt * np.sum(samples * np.exp(1j * k[idx] * t))
        assert abs(spec.samples[idx] - direct) < 1e-10 * max(1.0, abs(direct))


def test_fourier_roundtrip_exact():
    rng = np.random.default_rng(4)
    ts = TimeSeries(0.75, 0.02, rng.standard_normal((3, 50)))
    back = fourier(fourier(ts, "forward"), "inverse")
    assert back.t0 == ts.t0
    assert back.dt == ts.dt
    np.testing.assert_allclose(back.samples, ts.samples, atol=1e-11)


def test_fourier_direction_validation():
    ts = TimeSeries(0.0, 0.1, np.zeros(8))
    with pytest.raises(ValueError):
        fourier(ts, "inverse")
    with pytest.raises(ValueError):
        fourier(fourier(ts, "forward"), "forward")
    with pytest.raises(ValueError):
        fourier(ts, "sideways")


def test_time_antiderivative():
    dt = 1e-3
    t = dt * np.arange(2001)
    ts = TimeSeries(0.0, dt, t.copy())
    first = time_antiderivative(ts, 1)
    np.testing.assert_allclose(first.samples, 0.5 * t**2, atol=1e-12)
    second = time_antiderivative(ts, 2)
    np.testing.assert_allclose(second.samples, t**3 / 6.0, atol=1e-6)
    with pytest.raises(ValueError, match="order"):
        time_antiderivative(ts, 0)
    with pytest.raises(ValueError, match="t0"):
        time_antiderivative(TimeSeries(0.5, dt, t), 1)


def test_radon_2d_roundtrip():
    field = gauss_field_2d()
    illum = make_illumination(2, 129, 96, 1.6, 0.05)
    sino = radon_forward(field, illum)
    rec = radon_invert(sino, illum, field)
    # compare away from the grid boundary where backprojection support ends
    pts = field.grid_points()
    mask = np.linalg.norm(pts, axis=1) < 0.8
    assert rel_l2(rec.values.ravel()[mask], field.values.ravel()[mask]) < 5e-2


def test_radon_2d_point_and_grid_agree():
    field = gauss_field_2d(n=33)
    illum = make_illumination(2, 65, 48, 1.6, 0.05)
    sino = radon_forward(field, illum)
    rec = radon_invert(sino, illum, field)
    pts = field.grid_points()[::7]
    vals = radon_invert_points(sino, illum, pts)
    np.testing.assert_allclose(vals, rec.values.ravel()[::7], atol=1e-12)


def test_radon_complex_linearity():
    field = gauss_field_2d(n=33)
    illum = make_illumination(2, 65, 48, 1.6, 0.05)
    sino = radon_forward(field, illum)
    pts = field.grid_points()[::11]
    re = radon_invert_points(sino, illum, pts)
    im = radon_invert_points(2.0 * sino, illum, pts)
    both = radon_invert_points(sino + 2j * sino, illum, pts)
    np.testing.assert_allclose(both.real, re, atol=1e-12)
    np.testing.assert_allclose(both.imag, im, atol=1e-12)


def test_radon_3d_roundtrip():
    n = 33
    ax = np.linspace(-1.0, 1.0, n)
    xx, yy, zz = np.meshgrid(ax, ax, ax, indexing="ij")
    vals = np.exp(-((xx - 0.1) ** 2 + yy**2 + (zz + 0.1) ** 2) / 0.35**2)
    field = ScalarField([-1.0] * 3, [ax[1] - ax[0]] * 3, vals)
    illum = make_illumination(3, 65, 200, 1.6, 0.05)
    sino = radon_forward(field, illum)
    rec = radon_invert(sino, illum, field)
    pts = field.grid_points()
    mask = np.linalg.norm(pts, axis=1) < 0.7
    assert rel_l2(rec.values.ravel()[mask], field.values.ravel()[mask]) < 1e-1


def test_radon_shape_mismatch():
    field = gauss_field_2d(n=17)
    illum = make_illumination(2, 33, 24, 1.6, 0.05)
    with pytest.raises(ValueError, match="shape"):
        radon_invert_points(np.zeros((5, 5)), illum, field.grid_points())
