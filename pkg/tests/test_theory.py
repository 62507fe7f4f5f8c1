import numpy as np
import pytest
from hypothesis import given, strategies as st

from rotaf.config import preset
from rotaf.core import rng_for
from rotaf.data import make_quadratic
from rotaf.theory import (TheoryConstants, asymptotic_error_a1, asymptotic_error_a2, bound_curve,
                          c_alpha, d_factor, estimate_constants, resampling_coefficient,
                          validate_bounds)


def tc(**kw):
    args = dict(mu=1.0, L=10.0, delta2=0.25, kappa2=0.5, K2=4.0, P=1.0, sigma2=0.01, h_min=0.1,
                p=20, m=5, G=20, B=0, s=1, eta=0.004)
    args.update(kw)
    return TheoryConstants(**args)


def test_c_alpha():
    assert c_alpha(0.0) == 2.0
    assert c_alpha(0.1) == pytest.approx(2.25)
    vals = [c_alpha(a) for a in np.linspace(0, 0.499, 50)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert c_alpha(0.4999999) > 1e6
    with pytest.raises(ValueError):
        c_alpha(0.5)


def test_d_factor():
    assert d_factor(20, 1) == 1.0
    assert d_factor(20, 2) == pytest.approx(19 / 39)
    assert d_factor(20, 3) == pytest.approx(19 / 59)


def test_a1_examples():
    assert asymptotic_error_a1(tc(sigma2=0.0, delta2=0.0, kappa2=0.0)) == 0.0
    base, big_p = tc(delta2=0, kappa2=0), tc(delta2=0, kappa2=0, P=2.0)
    assert asymptotic_error_a1(big_p) == pytest.approx(asymptotic_error_a1(base) / 2)
    mixed = asymptotic_error_a1(tc(P=2.0)) - asymptotic_error_a1(tc(P=2.0, sigma2=0.0))
    assert mixed == pytest.approx((asymptotic_error_a1(tc()) - asymptotic_error_a1(tc(sigma2=0.0))) / 2)
    assert asymptotic_error_a1(tc(B=2)) / asymptotic_error_a1(tc()) == pytest.approx((2.25 / 2) ** 2)
    with pytest.raises(ValueError):
        asymptotic_error_a1(tc(eta=0.01))
    with pytest.raises(ValueError):
        asymptotic_error_a1(tc(B=10))


def test_a2_examples():
    for B in (0, 2, 5):
        assert asymptotic_error_a2(tc(B=B)) == pytest.approx(asymptotic_error_a1(tc(B=B)))
    d = 19 / 39
    assert resampling_coefficient(tc(s=2)) == pytest.approx(4 * (d + (1 - d) / 20))
    assert c_alpha(2 * 2 / 20) == pytest.approx(8 / 3)
    with pytest.raises(ValueError):
        asymptotic_error_a2(tc(s=3, B=4))


@pytest.mark.parametrize("field,values", [("B", [0, 1, 2, 5, 9]), ("sigma2", [0.0, 0.01, 0.1, 1.0]),
                                          ("delta2", [0.0, 0.1, 1.0]), ("kappa2", [0.0, 0.3, 3.0])])
def test_a1_increasing(field, values):
    out = [asymptotic_error_a1(tc(**{field: v})) for v in values]
    assert all(b > a for a, b in zip(out, out[1:]))


@pytest.mark.parametrize("field,values", [("P", [0.5, 1.0, 4.0]), ("m", [1, 2, 5, 10])])
def test_a1_decreasing(field, values):
    out = [asymptotic_error_a1(tc(**{field: v})) for v in values]
    assert all(b < a for a, b in zip(out, out[1:]))


@given(st.floats(0.0, 1e4), st.integers(0, 500))
def test_bound_curve_shape(delta0, T):
    c = tc()
    A = asymptotic_error_a1(c)
    curve = bound_curve(c, delta0, T)
    assert len(curve) == T + 1 and curve[0] == pytest.approx(delta0)
    if delta0 > A:
        assert np.all(np.diff(curve) <= 0)
    assert bound_curve(c, delta0, 100000)[-1] == pytest.approx(A, rel=1e-6)


def test_bound_curve_a2_mode():
    c = tc(s=2, B=2)
    assert bound_curve(c, 9.0, 5, "a2")[-1] != bound_curve(c, 9.0, 5, "a1")[-1]


def problem(outer, kappa):
    return make_quadratic(5, 10, 1.0, 4.0, outer, kappa, np.random.default_rng(0), samples=20)


def test_estimate_constants_homogeneous_noiseless():
    pr = problem(0.0, 0.0)
    cfg = preset("thm1-none-B0").with_overrides({"N": 10, "G": 5})
    ws = np.random.default_rng(1).standard_normal((4, 5))
    c = estimate_constants(pr, ws, np.random.default_rng(2), cfg, draws=50)
    assert c.delta2 == 0.0 and c.kappa2 == 0.0
    assert c.K2 == pytest.approx(1.1 * max(np.sum(pr.grad(w) ** 2) for w in ws))
    assert (c.mu, c.L) == (1.0, 4.0)


def test_estimate_constants_bounds():
    pr = problem(0.7, 1.5)
    cfg = preset("thm1-none-B0").with_overrides({"N": 10, "G": 5, "b": 1})
    c = estimate_constants(pr, np.zeros((2, 5)), np.random.default_rng(2), cfg)
    assert c.delta2 <= 0.7 ** 2 * 1.1
    assert c.kappa2 <= 1.5 ** 2 * 1.1
    with pytest.raises(ValueError):
        estimate_constants(pr, np.empty((0, 5)), np.random.default_rng(0), cfg)


def test_validate_bounds_small():
    rep = validate_bounds(preset("thm1-gaussian-B2").with_overrides({"T": 40}), seeds=range(3))
    assert rep.mode == "a1" and len(rep.empirical) == 41
    assert rep.empirical[0] == pytest.approx(9.0)
    assert rep.passed()
    with pytest.raises(ValueError):
        validate_bounds(preset("table1-iid-s1-B0"))
