import numpy as np
import pytest
from hypothesis import given, strategies as st

from rotaf.channel import (GroupEmpty, PowerPolicy, draw_channels, effective_noise_power,
                           estimate_group_update, ota_receive, precode, precode_many, rho_t)


def test_rayleigh_moments():
    ch = draw_channels(10**5, np.random.default_rng(0))
    assert np.all(ch.h > 0)
    assert np.mean(ch.h ** 2) == pytest.approx(1.0, abs=0.02)
    assert np.mean(ch.h <= 0.1) == pytest.approx(1 - np.exp(-0.01), abs=0.002)
    assert np.all(np.abs(ch.phase) <= np.pi)
    # phases are uniform: quartile mass is a quarter each
    q = np.histogram(ch.phase, bins=4, range=(-np.pi, np.pi))[0] / 10**5
    np.testing.assert_allclose(q, 0.25, atol=0.01)


def test_rho_fixed_and_analytic():
    assert rho_t(PowerPolicy("fixed", rho=10.0)) == 10.0
    pol = PowerPolicy("analytic", P=1.0)
    assert rho_t(pol, [[2.0, 0.0], [1.0, 0.0]]) == pytest.approx(0.5)
    with pytest.raises(ZeroDivisionError):
        rho_t(pol, np.zeros((3, 2)))
    with pytest.raises(ValueError):
        PowerPolicy("fixed", rho=0.0)
    with pytest.raises(ValueError):
        PowerPolicy("analytic", P=-1.0)


@given(st.integers(0, 10**6), st.floats(0.1, 100))
def test_rho_scale_covariance(seed, c):
    U = np.random.default_rng(seed).standard_normal((5, 3))
    pol = PowerPolicy("analytic", P=2.0)
    assert rho_t(pol, c * U) == pytest.approx(rho_t(pol, U) / c, rel=1e-12)


def test_precode_threshold():
    assert precode([1.0], 0.05, 10.0, 0.1) is None
    assert precode([1.0], 0.1, 10.0, 0.1) is None
    np.testing.assert_allclose(precode([1.0], 0.2, 10.0, 0.1), [5.0])


@given(st.integers(0, 10**6))
def test_precode_arrival_is_rho_hmin_m(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((8, 4))
    h = draw_channels(8, rng).h
    X, active = precode_many(M, h, 3.0, 0.1)
    np.testing.assert_allclose((X * h[:, None])[active], 3.0 * 0.1 * M[active], rtol=1e-12)
    assert np.all(X[~active] == 0)


def test_analytic_power_budget():
    rng = np.random.default_rng(1)
    for _ in range(200):
        M = rng.standard_normal((20, 6)) * rng.uniform(0.01, 10)
        h = draw_channels(20, rng).h
        rho = rho_t(PowerPolicy("analytic", P=1.0), M)
        X, active = precode_many(M, h, rho, 0.1)
        assert np.all(np.einsum("ij,ij->i", X, X)[active] <= 1.0 + 1e-12)


def test_ota_receive_examples():
    m = np.array([1.0, -2.0])
    np.testing.assert_allclose(ota_receive([10 * 0.1 / 0.5 * m], [0.5], 0.0), 10 * 0.1 * m)
    np.testing.assert_array_equal(ota_receive([m, -m], [1.0, 1.0], 0.0), np.zeros(2))
    y = np.array([ota_receive([], [], 0.5, np.random.default_rng(i), dim=10) for i in range(10**4)])
    assert y.var() == pytest.approx(0.5, rel=0.02)
    with pytest.raises(ValueError):
        ota_receive([np.ones(2), np.ones(3)], [1, 1], 0.0)


def test_estimate_group_update():
    m = np.array([0.3, -0.7, 1.1])
    k, rho, hmin = 4, 10.0, 0.1
    y = ota_receive([m] * k, [1.0] * k, 0.0)
    np.testing.assert_allclose(estimate_group_update(y * rho * hmin, rho, hmin, k), m)
    with pytest.raises(GroupEmpty):
        estimate_group_update(y, rho, hmin, 0)


def test_effective_noise_formula():
    assert effective_noise_power(100, 0.01, 0.1, 5, 10.0) == pytest.approx(100 * 0.01 / 25)


def test_estimate_is_unbiased():
    rng = np.random.default_rng(7)
    ms = rng.standard_normal((3, 5))
    rho, hmin, sigma2 = 10.0, 0.1, 0.01
    est = np.zeros(5)
    trials = 10**4
    for _ in range(trials):
        y = ota_receive(list(rho * hmin * ms), [1.0] * 3, sigma2, rng)
        est += estimate_group_update(y, rho, hmin, 3)
    est /= trials
    target = ms.mean(axis=0)
    assert np.linalg.norm(est - target) / np.linalg.norm(target) < 0.01
