import numpy as np
import pytest

from conftest import phantom2, phantom3
from slicedpat.fields import (DetectorSet, Phantom, ScalarField,
                              circle_detectors, eval_field,
                              make_illumination, make_phantom,
                              sphere_detectors)


def test_scalar_field_geometry():
    f = ScalarField([-1.0, 0.5], [0.25, 0.5], np.zeros((9, 5)))
    lo, hi = f.bbox()
    np.testing.assert_allclose(lo, [-1.0, 0.5])
    np.testing.assert_allclose(hi, [1.0, 2.5])
    pts = f.grid_points()
    assert pts.shape == (45, 2)
    np.testing.assert_allclose(pts[0], [-1.0, 0.5])
    np.testing.assert_allclose(pts[-1], [1.0, 2.5])
    assert f.same_grid(f.copy_like(np.ones((9, 5))))


def test_scalar_field_validation():
    with pytest.raises(ValueError):
        ScalarField([0.0], [0.1], np.zeros(4))
    with pytest.raises(ValueError):
        ScalarField([0.0, 0.0], [0.1, -0.1], np.zeros((4, 4)))
    with pytest.raises(ValueError):
        ScalarField([0.0, 0.0], [0.1, 0.1], np.full((4, 4), np.nan))


def test_eval_field_reproduces_multilinear(rng):
    ax = np.linspace(-1.0, 1.0, 13)
    xx, yy = np.meshgrid(ax, ax, indexing="ij")
    f2 = ScalarField([-1.0, -1.0], [ax[1] - ax[0]] * 2,
                     0.3 - 0.7 * xx + 1.1 * yy + 0.5 * xx * yy)
    pts = rng.uniform(-1.0, 1.0, (200, 2))
    want = 0.3 - 0.7 * pts[:, 0] + 1.1 * pts[:, 1] + 0.5 * pts[:, 0] * pts[:, 1]
    np.testing.assert_allclose(eval_field(f2, pts), want, atol=1e-13)
    # near-exact at nodes (top-edge nodes blend a 1e-12 sliver of a neighbor), zero outside
    np.testing.assert_allclose(eval_field(f2, f2.grid_points()),
                               f2.values.ravel(), atol=1e-11)
    assert eval_field(f2, np.array([2.0, 0.0])) == 0.0


def test_eval_field_3d_nodes(rng):
    vals = rng.standard_normal((6, 5, 7))
    f3 = ScalarField([0.0, 0.0, 0.0], [0.2, 0.25, 0.1], vals)
    np.testing.assert_allclose(eval_field(f3, f3.grid_points()),
                               vals.ravel(), atol=1e-11)


def test_circle_detectors():
    det = circle_detectors(2.0, 16)
    assert len(det) == 16 and det.dim == 2
    np.testing.assert_allclose(np.linalg.norm(det.points, axis=1), 2.0, atol=1e-13)
    np.testing.assert_allclose(det.points + 2.0 * det.inward_normals, 0.0, atol=1e-12)
    assert det.weights.sum() == pytest.approx(4.0 * np.pi)


def test_sphere_detectors():
    det = sphere_detectors(1.5, 200)
    assert det.dim == 3
    np.testing.assert_allclose(np.linalg.norm(det.points, axis=1), 1.5, atol=1e-12)
    assert det.weights.sum() == pytest.approx(4.0 * np.pi * 1.5**2)
    # inward normals point at the origin
    np.testing.assert_allclose(det.inward_normals, -det.points / 1.5, atol=1e-12)


def test_detector_validation():
    pts = np.array([[1.0, 0.0], [0.0, 0.5]])
    with pytest.raises(ValueError):
        DetectorSet(pts, -pts, np.ones(2), 1.0)


def test_make_illumination():
    ill = make_illumination(2, 8, 12, 1.0, 0.05)
    assert ill.r_samples.shape == (8,)
    assert ill.theta_samples.shape[0] == 12
    assert ill.slab_width == pytest.approx(0.05)
    np.testing.assert_allclose(np.linalg.norm(ill.theta_samples, axis=1), 1.0, atol=1e-12)


def test_make_phantom_validation():
    with pytest.raises(ValueError, match="not contained in Omega"):
        phantom2(q_radius=0.6)
    with pytest.raises(ValueError, match="cover the closure"):
        make_phantom({
            "dim": 2, "grid": {"n": 8, "extent": 0.5}, "b_radius": 1.0,
            "omega_radius": 0.3, "detector_count": 4,
            "f0_bumps": [{"center": [0, 0], "radius": 1.6, "amplitude": 1.0}],
        })
    with pytest.raises(ValueError, match="Born-regime"):
        phantom2(q_amp=0.5)
    with pytest.raises(ValueError, match="nonvanishing"):
        make_phantom({
            "dim": 2, "grid": {"n": 8, "extent": 1.1}, "b_radius": 1.0,
            "omega_radius": 0.3, "detector_count": 4,
            "f0_bumps": [],
        })


def test_phantom_accessors():
    ph = phantom2()
    assert ph.dim == 2
    assert ph.gamma_omega_distance() == pytest.approx(0.55)
    f = ph.f_total()
    np.testing.assert_allclose(f.values, ph.f0.values + ph.f1.values)


def test_phantom_roundtrip(tmp_path):
    ph = phantom3(n=10, ndet=16)
    ph.save(str(tmp_path / "ph"))
    back = Phantom.load(str(tmp_path / "ph"))
    np.testing.assert_array_equal(back.f0.values, ph.f0.values)
    np.testing.assert_array_equal(back.f1.values, ph.f1.values)
    np.testing.assert_array_equal(back.q.values, ph.q.values)
    np.testing.assert_allclose(back.gamma.points, ph.gamma.points)
    assert back.omega_radius == ph.omega_radius
    assert back.b_radius == ph.b_radius


def test_field_roundtrip(tmp_path):
    f = ScalarField([-1.0, 0.0, 2.0], [0.1, 0.2, 0.3],
                    np.arange(24.0).reshape(2, 3, 4))
    f.save(str(tmp_path / "f"))
    back = ScalarField.load(str(tmp_path / "f"))
    assert back.same_grid(f)
    np.testing.assert_array_equal(back.values, f.values)
