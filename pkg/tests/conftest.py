import numpy as np
import pytest

from slicedpat.fields import make_phantom


def rel_l2(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.linalg.norm(b)
    if denom == 0:
        return float(np.linalg.norm(a))
    return float(np.linalg.norm(a - b) / denom)


def omega_mask(field, radius, center=None):
    center = np.zeros(field.dim) if center is None else np.asarray(center)
    pts = field.grid_points()
    return (np.linalg.norm(pts - center, axis=1) <= radius).reshape(field.shape)


def phantom2(n=24, ndet=16, omega=0.45, q_amp=0.05, q_radius=0.3,
             f1_amp=0.5, f1_radius=0.25):
    q_bumps = []
    if q_amp:
        q_bumps = [{"center": [-0.05, 0.04], "radius": q_radius, "amplitude": q_amp}]
    f1_bumps = []
    if f1_amp:
        f1_bumps = [{"center": [0.1, -0.05], "radius": f1_radius, "amplitude": f1_amp}]
    return make_phantom({
        "dim": 2,
        "grid": {"n": n, "extent": 1.1},
        "b_radius": 1.0,
        "omega_radius": omega,
        "detector_count": ndet,
        "f0_bumps": [{"center": [0, 0], "radius": 1.6, "amplitude": 1.0}],
        "f1_bumps": f1_bumps,
        "q_bumps": q_bumps,
    })


def phantom3(n=16, ndet=32, omega=0.45, q_amp=0.05, q_radius=0.3,
             f1_amp=0.5, f1_radius=0.25):
    q_bumps = []
    if q_amp:
        q_bumps = [{"center": [-0.05, 0.04, 0.02], "radius": q_radius, "amplitude": q_amp}]
    f1_bumps = []
    if f1_amp:
        f1_bumps = [{"center": [0.1, -0.05, 0.0], "radius": f1_radius, "amplitude": f1_amp}]
    return make_phantom({
        "dim": 3,
        "grid": {"n": n, "extent": 1.1},
        "b_radius": 1.0,
        "omega_radius": omega,
        "detector_count": ndet,
        "f0_bumps": [{"center": [0, 0, 0], "radius": 1.6, "amplitude": 1.0}],
        "f1_bumps": f1_bumps,
        "q_bumps": q_bumps,
    })


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
