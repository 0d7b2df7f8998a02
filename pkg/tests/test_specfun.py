import numpy as np
import pytest
import scipy.integrate
import scipy.special

from slicedpat.specfun import (bessel_j0, complete_elliptic_K,
                               complete_elliptic_KE, hankel0, hankel0_array,
                               ramp_plus)


def k_quadrature(alpha):
    val, _ = scipy.integrate.quad(
        lambda phi: 1.0 / np.sqrt(1.0 - (alpha * np.sin(phi)) ** 2),
        0.0, np.pi / 2.0, epsabs=1e-14, epsrel=1e-13,
    )
    return val


def test_elliptic_k_against_quadrature():
    alphas = np.linspace(-0.999, 0.999, 200)
    ours = complete_elliptic_K(alphas)
    oracle = np.array([k_quadrature(a) for a in alphas])
    assert np.max(np.abs(ours - oracle) / oracle) <= 1e-10


def test_elliptic_k_special_values():
    assert abs(complete_elliptic_K(0.0) - np.pi / 2.0) <= 1e-14
    assert complete_elliptic_K(0.5) == complete_elliptic_K(-0.5)


def test_elliptic_k_domain():
    with pytest.raises(ValueError):
        complete_elliptic_K(1.0)
    with pytest.raises(ValueError):
        complete_elliptic_K(-1.2)


def test_elliptic_e_against_scipy():
    alphas = np.linspace(0.0, 0.995, 40)
    kk, ee = complete_elliptic_KE(alphas)
    assert np.max(np.abs(kk - scipy.special.ellipk(alphas**2))) <= 1e-12
    assert np.max(np.abs(ee - scipy.special.ellipe(alphas**2))) <= 1e-12


def test_bessel_j0_both_branches():
    x = np.concatenate([np.linspace(0.0, 13.9, 80), np.linspace(14.1, 120.0, 80)])
    assert np.max(np.abs(bessel_j0(x) - scipy.special.j0(x))) <= 1e-10


def test_hankel_against_scipy():
    x = np.concatenate([np.linspace(0.05, 13.9, 60), np.linspace(14.1, 90.0, 60)])
    ours = hankel0_array(x)
    oracle = scipy.special.hankel1(0, x)
    assert np.max(np.abs(ours - oracle)) <= 1e-10


def test_hankel_scalar_matches_array():
    for x in (0.3, 2.0, 40.0):
        assert hankel0(x) == pytest.approx(complex(hankel0_array(np.array([x]))[0]), abs=1e-15)


def test_hankel_reflection_keeps_fields_real():
    # (i/4) H0_1(-x) must be the conjugate of (i/4) H0_1(x)
    x = np.linspace(0.1, 30.0, 50)
    plus = 0.25j * hankel0_array(x)
    minus = np.array([0.25j * hankel0(-xi) for xi in x])
    assert np.max(np.abs(minus - np.conj(plus))) <= 1e-12


def test_hankel_zero_raises():
    with pytest.raises(ValueError):
        hankel0(0.0, which="H0_1")
    with pytest.raises(ValueError):
        hankel0(0.0, which="Y0")
    assert hankel0(0.0, which="J0") == 1.0 + 0.0j


def test_hankel_which_validation():
    with pytest.raises(ValueError):
        hankel0(1.0, which="Y1")


def test_ramp_plus():
    t = np.array([-1.0, 0.0, 0.5, 2.0])
    np.testing.assert_allclose(ramp_plus(t, 0.5), np.maximum(t - 0.5, 0.0))
