import numpy as np
import pytest
from hypothesis import given, strategies as st

from rotaf.adversary import (AttackSpec, UnsupportedAttack, choose_byzantine, class_flip,
                             flip_labels, gaussian_update, mimic_update)
from rotaf.data import LabeledDataset


def test_gaussian_moments():
    x = gaussian_update(10**6, 30.0, np.random.default_rng(0))
    assert x.var() == pytest.approx(30.0, rel=0.02)
    assert abs(x.mean()) < 0.05
    assert gaussian_update(7850, 30.0, np.random.default_rng(1)).shape == (7850,)
    with pytest.raises(ValueError):
        gaussian_update(3, 0.0, np.random.default_rng(0))


def test_class_flip():
    ds = LabeledDataset(np.zeros((3, 2)), np.array([3, 9, 0]), 10)
    flipped = class_flip(ds)
    assert flipped.labels.tolist() == [6, 0, 9]
    assert flipped.features is ds.features
    assert class_flip(flipped).labels.tolist() == [3, 9, 0]
    with pytest.raises(UnsupportedAttack):
        class_flip(LabeledDataset(np.zeros((1, 1)), np.array([1]), 5))


@given(st.lists(st.integers(0, 9), min_size=1, max_size=30))
def test_flip_is_involution(labels):
    y = np.array(labels)
    assert np.array_equal(flip_labels(flip_labels(y)), y)


def test_mimic_copy_and_group_weight():
    target = np.random.default_rng(0).standard_normal(5)
    out = mimic_update(target)
    assert np.array_equal(out, target) and out is not target
    # B_in mimics of the target in a group of m shift the mean by weight (B_in + 1) / m
    rng = np.random.default_rng(1)
    m, B_in = 5, 2
    others = rng.standard_normal((m - 1 - B_in, 5))
    group = np.vstack([target] + [mimic_update(target)] * B_in + list(others))
    expect = (B_in + 1) / m * target + others.sum(axis=0) / m
    np.testing.assert_allclose(group.mean(axis=0), expect)


@given(st.integers(1, 200), st.data())
def test_choose_byzantine_count(N, data):
    B = data.draw(st.integers(0, N))
    ids = choose_byzantine(N, B, np.random.default_rng(B), "random")
    assert len(ids) == B and all(0 <= i < N for i in ids)
    assert choose_byzantine(N, B, placement="first") == frozenset(range(B))


def test_attack_spec_invariants():
    spec = AttackSpec("mimic", frozenset({0, 1, 4}))
    assert spec.B == 3 and spec.mimic_target(6) == 2
    assert spec.mask(6).tolist() == [True, True, False, False, True, False]
    with pytest.raises(ValueError):
        AttackSpec("mimic", frozenset({2}), target=2)
    with pytest.raises(ValueError):
        AttackSpec("gaussian", frozenset(), variance=-1.0)
    with pytest.raises(UnsupportedAttack):
        AttackSpec("signflip")
    with pytest.raises(ValueError):
        AttackSpec("none", frozenset({7})).mask(5)
