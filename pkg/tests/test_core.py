import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rotaf.core import (DimensionError, RngStream, add, check_finite, dot, norm2, rng_for, scale,
                        sub)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_vec_ops_examples():
    assert add([1, 2], [3, 4]).tolist() == [4, 6]
    assert norm2([3, 4]) == 5.0
    assert scale([1, -1], 0).tolist() == [0, 0]
    assert sub([5, 5], [1, 2]).tolist() == [4, 3]
    assert dot([1, 2], [3, 4]) == 11.0


def test_length_mismatch_raises():
    with pytest.raises(DimensionError):
        add([1, 2], [1, 2, 3])
    with pytest.raises(DimensionError):
        dot([1], [1, 2])
    with pytest.raises(DimensionError):
        norm2([[1, 2]])


def test_check_finite():
    check_finite(np.ones(3))
    with pytest.raises(FloatingPointError):
        check_finite(np.array([1.0, np.nan]))
    with pytest.raises(FloatingPointError):
        check_finite(np.array([np.inf]))


@given(arrays(np.float64, 7, elements=finite))
def test_norm_is_sqrt_dot(a):
    assert norm2(a) == np.sqrt(dot(a, a))


@given(arrays(np.float64, 5, elements=finite), arrays(np.float64, 5, elements=finite))
def test_add_sub_inverse(a, b):
    np.testing.assert_allclose(sub(add(a, b), b), a, atol=1e-6)


@given(st.integers(0, 2**63), st.sampled_from(["grouping", "channel", "noise", "minibatch"]),
       st.integers(0, 10**6), st.one_of(st.none(), st.integers(0, 1000)))
def test_stream_is_reproducible(seed, purpose, t, ent):
    a = rng_for(seed, purpose, t, ent).standard_normal(4)
    b = RngStream(seed, purpose, t, ent).generator().standard_normal(4)
    assert np.array_equal(a, b)


def test_streams_are_distinct():
    keys = [(0, "noise", 0, None), (0, "noise", 1, None), (0, "channel", 0, None),
            (1, "noise", 0, None), (0, "attack", 0, 0), (0, "attack", 0, 1)]
    draws = {k: rng_for(*k).integers(0, 2**62, size=4).tobytes() for k in keys}
    assert len(set(draws.values())) == len(keys)


def test_consumption_order_does_not_matter():
    first = [rng_for(3, "attack", 5, n).standard_normal(10) for n in range(5)]
    second = [rng_for(3, "attack", 5, n).standard_normal(10) for n in reversed(range(5))][::-1]
    for a, b in zip(first, second):
        assert np.array_equal(a, b)


def test_independent_streams_uncorrelated():
    a = rng_for(0, "noise", 0, 0).standard_normal(20000)
    b = rng_for(0, "noise", 0, 1).standard_normal(20000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.03


def test_unknown_purpose():
    with pytest.raises(KeyError):
        rng_for(0, "nope")
