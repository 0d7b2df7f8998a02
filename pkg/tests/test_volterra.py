import numpy as np
import pytest

from slicedpat.volterra import (
    VolterraProblem,
    differentiate_rhs,
    kernel_ktilde,
    kernel_ktilde_dt,
    second_kind_matrix,
    solve_second_kind,
)
from slicedpat.xforms import TimeSeries


def ktilde_oracle(t, r, n=200):
    # defining integral r * k(2t, r) with k(T, r) = integral dtau over
    # sqrt(tau^2-r^2) sqrt((T-tau)^2-r^2); the sine substitution
    # tau = T/2 + (T/2 - r) sin(u) cancels both endpoint singularities,
    # leaving r * integral du / sqrt((t+r)^2 - (t-r)^2 sin^2 u)
    u, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * np.pi * u
    w = 0.5 * np.pi * w
    s2 = np.sin(u) ** 2
    return r * np.sum(w / np.sqrt((t + r) ** 2 - (t - r) ** 2 * s2))


def forward_apply(delta, t_grid, m1_fn, n=120):
    # high-order quadrature of Phi(t) = integral_delta^t ktilde(t, r) M1(r) dr
    u, w = np.polynomial.legendre.leggauss(n)
    phi = np.empty(t_grid.size)
    for i, t in enumerate(t_grid):
        r = 0.5 * (t - delta) * u + 0.5 * (t + delta)
        phi[i] = 0.5 * (t - delta) * np.sum(w * kernel_ktilde(t, r) * m1_fn(r))
    return phi


def m1_smooth(r):
    return np.sin(3.0 * r) * np.exp(-r) + 0.5


def test_kernel_diagonal_and_domain():
    for t in [0.3, 1.0, 2.7]:
        assert abs(kernel_ktilde(t, t) - np.pi / 2.0) < 1e-12
    assert kernel_ktilde(1.0, 1.5) == 0.0
    assert kernel_ktilde(1.0, 0.0) == 0.0
    assert kernel_ktilde(0.0, 0.0) == 0.0
    assert isinstance(kernel_ktilde(1.0, 0.5), float)


def test_kernel_matches_defining_integral():
    ts = np.linspace(0.2, 2.5, 7)
    for t in ts:
        for r in np.linspace(0.05, 0.95, 7) * t:
            want = ktilde_oracle(t, r)
            got = kernel_ktilde(t, r)
            assert abs(got - want) < 1e-10 * abs(want)


def test_kernel_dt_matches_difference_quotient():
    rng = np.random.default_rng(7)
    t = 0.3 + 2.0 * rng.random(40)
    r = t * (0.05 + 0.9 * rng.random(40))
    h = 1e-6
    fd = (kernel_ktilde(t + h, r) - kernel_ktilde(t - h, r)) / (2.0 * h)
    np.testing.assert_allclose(kernel_ktilde_dt(t, r), fd, rtol=1e-5)


def test_kernel_dt_diagonal():
    for t in [0.5, 1.0, 2.0]:
        assert abs(kernel_ktilde_dt(t, t) + np.pi / (4.0 * t)) < 1e-12


def test_problem_validation():
    rhs = TimeSeries(0.1, 0.01, np.zeros(11))
    with pytest.raises(ValueError, match="delta"):
        VolterraProblem(0.0, 1.0, 0.01, TimeSeries(0.0, 0.01, np.zeros(5)), "first")
    with pytest.raises(ValueError, match="delta"):
        VolterraProblem(0.5, 0.4, 0.01, rhs, "first")
    with pytest.raises(ValueError, match="kind"):
        VolterraProblem(0.1, 1.0, 0.01, rhs, "both")
    with pytest.raises(ValueError, match="grid"):
        VolterraProblem(0.2, 1.0, 0.01, rhs, "first")
    with pytest.raises(ValueError, match="second-kind"):
        solve_second_kind(VolterraProblem(0.1, 1.0, 0.01, rhs, "first"))
    with pytest.raises(ValueError, match="first-kind"):
        differentiate_rhs(VolterraProblem(0.1, 1.0, 0.01, rhs, "second"))


def test_differentiate_rhs_exact_on_cubics():
    delta, dt, n = 0.2, 0.05, 41
    t = delta + dt * np.arange(n)
    rhs = TimeSeries(delta, dt, 2.0 - t + 0.5 * t**2 + 0.25 * t**3)
    prob = VolterraProblem(delta, t[-1], dt, rhs, "first")
    out = differentiate_rhs(prob)
    assert out.kind == "second"
    np.testing.assert_allclose(out.rhs.samples, -1.0 + t + 0.75 * t**2, atol=1e-10)


def test_second_kind_matrix_shape():
    A = second_kind_matrix(0.1, 0.01, 30)
    assert A.shape == (30, 30)
    assert np.all(A[np.triu_indices(30, k=1)] == 0.0)
    np.testing.assert_allclose(np.diag(A)[1:], np.pi / 2.0 + 0.005 * kernel_ktilde_dt(
        0.1 + 0.01 * np.arange(1, 30), 0.1 + 0.01 * np.arange(1, 30)), atol=1e-14)


def test_roundtrip_convergence():
    delta, T = 0.1, 2.1
    sups = {}
    for n in [250, 500]:
        dt = (T - delta) / n
        t = delta + dt * np.arange(n + 1)
        phi = forward_apply(delta, t, m1_smooth)
        prob = VolterraProblem(delta, T, dt, TimeSeries(delta, dt, phi), "first")
        sol = solve_second_kind(differentiate_rhs(prob))
        sups[n] = float(np.max(np.abs(sol.samples - m1_smooth(t))))
    order = np.log2(sups[250] / sups[500])
    assert sups[500] < 5e-3
    assert order > 1.8


def test_solver_batch_matches_single():
    delta, T, n = 0.1, 1.1, 120
    dt = (T - delta) / n
    t = delta + dt * np.arange(n + 1)
    rows = np.stack([np.sin(t), np.cos(2.0 * t), t**2])
    prob = VolterraProblem(delta, T, dt, TimeSeries(delta, dt, rows), "second")
    sol = solve_second_kind(prob)
    for i in range(3):
        single = solve_second_kind(
            VolterraProblem(delta, T, dt, TimeSeries(delta, dt, rows[i]), "second"))
        np.testing.assert_allclose(sol.samples[i], single.samples, atol=1e-13)
