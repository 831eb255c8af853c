import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logicnet.preprocess import (
    PredicateSpace,
    association_score,
    cv_folds,
    fbft_fit,
    fbft_transform,
    minmax_scale,
    split_dataset,
)


# ---------------------------------------------------------------------------
# minmax_scale
# ---------------------------------------------------------------------------

def test_minmax_basic():
    scaled, _ = minmax_scale(np.array([0.0, 5.0, 10.0]))
    np.testing.assert_allclose(scaled, [0.0, 0.5, 1.0])


def test_minmax_constant_column_convention():
    scaled, m = minmax_scale(np.array([7.0, 7.0, 7.0]))
    np.testing.assert_allclose(scaled, 0.5)
    assert m.invert(0.5) == 7.0


def test_minmax_round_trip():
    col = np.random.default_rng(0).normal(size=50) * 3 + 1
    scaled, m = minmax_scale(col)
    back = np.array([m.invert(v) for v in scaled])
    np.testing.assert_allclose(back, col, atol=1e-12)


# ---------------------------------------------------------------------------
# tree-based binarization
# ---------------------------------------------------------------------------

def _step_dataset(n=400, cut=0.5, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 3))
    y = (X[:, 0] <= cut).astype(float)
    return X, y


def test_fbft_finds_the_separating_threshold():
    X, y = _step_dataset()
    plan = fbft_fit(X, y, tree_num=5, tree_depth=3, feature_fraction=1.0, thresh_round=4, seed=0)
    ts = plan.thresholds.get(0, [])
    assert ts, "feature 0 should have thresholds"
    gaps = np.diff(np.sort(X[:, 0]))
    assert min(abs(t - 0.5) for t in ts) <= gaps.max() + 1e-4


def test_fbft_pure_labels_give_empty_plan():
    X = np.random.default_rng(0).uniform(size=(50, 2))
    plan = fbft_fit(X, np.ones(50), tree_num=3, tree_depth=3, feature_fraction=1.0, thresh_round=2, seed=0)
    assert plan.degenerate
    assert plan.thresholds == {}


def test_fbft_threshold_rounding_contract():
    X, y = _step_dataset()
    plan = fbft_fit(X, y, tree_num=5, tree_depth=4, feature_fraction=1.0, thresh_round=2, seed=0)
    for ts in plan.thresholds.values():
        for t in ts:
            assert round(t, 2) == t
        assert ts == sorted(set(ts))


def test_fbft_transform_is_binary_and_inclusive():
    X, y = _step_dataset()
    plan = fbft_fit(X, y, tree_num=5, tree_depth=3, feature_fraction=1.0, thresh_round=4, seed=0)
    matrix, predicates = fbft_transform(plan, X)
    binarized = [i for i, p in enumerate(predicates) if p.condition is not None]
    assert binarized
    assert set(np.unique(matrix[:, binarized]).tolist()) <= {0.0, 1.0}
    # boundary: f == t maps to 1
    p0 = next(p for p in predicates if p.condition is not None)
    probe = np.zeros((1, X.shape[1]))
    probe[0, p0.feature_index] = p0.condition.threshold
    row, _ = fbft_transform(plan, probe)
    col = predicates.index(p0)
    assert row[0, col] == 1.0


def test_fbft_passthrough_columns_scaled():
    X, y = _step_dataset()
    # depth-1 trees on feature 0 only: other features stay pass-through
    plan = fbft_fit(X, y, tree_num=3, tree_depth=1, feature_fraction=0.34, thresh_round=4, seed=1)
    matrix, predicates = fbft_transform(plan, X)
    assert matrix.min() >= 0.0 and matrix.max() <= 1.0
    assert any(p.condition is None for p in predicates)


def test_predicate_space_round_trip_schema_checks():
    X, y = _step_dataset()
    space = PredicateSpace.fit(X, y, ["a", "b", "c"], seed=0)
    with pytest.raises(ValueError):
        space.transform(X[:, :2])


# ---------------------------------------------------------------------------
# association_score
# ---------------------------------------------------------------------------

def test_association_identical_is_one():
    y = np.array([0, 1] * 50)
    assert association_score(y.astype(float), y) == pytest.approx(1.0)


def test_association_independent_noise_is_small():
    rng = np.random.default_rng(123)
    col = rng.uniform(size=10_000)
    y = rng.integers(0, 2, size=10_000)
    assert association_score(col, y) < 0.05


def test_association_affine_invariant():
    rng = np.random.default_rng(5)
    col = rng.normal(size=500)
    y = (col + rng.normal(size=500) > 0).astype(int)
    base = association_score(col, y)
    assert association_score(col * 3.7 + 11.0, y) == pytest.approx(base)


def test_association_permutation_equivariant():
    rng = np.random.default_rng(8)
    col = rng.normal(size=300)
    y = (col > 0).astype(int)
    perm = rng.permutation(300)
    assert association_score(col[perm], y[perm]) == pytest.approx(association_score(col, y))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_association_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    col = rng.normal(size=64)
    y = rng.integers(0, 2, size=64)
    if np.unique(y).size < 2:
        y[0] = 1 - y[0]
    assert 0.0 <= association_score(col, y) <= 1.0


# ---------------------------------------------------------------------------
# splits and folds
# ---------------------------------------------------------------------------

def test_split_large_dataset_caps_train():
    tr, va, te = split_dataset(20_634, seed=0)
    assert (tr.size, va.size, te.size) == (10_000, 4_127, 4_127)


def test_split_small_dataset_60_20_20():
    tr, va, te = split_dataset(100, seed=0)
    assert (tr.size, va.size, te.size) == (60, 20, 20)


def test_split_deterministic_and_disjoint():
    a = split_dataset(1000, seed=9)
    b = split_dataset(1000, seed=9)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)
    joined = np.concatenate(a)
    assert joined.size == np.unique(joined).size
    assert set(joined.tolist()) <= set(range(1000))


def test_split_rejects_tiny_inputs():
    with pytest.raises(ValueError):
        split_dataset(5, seed=0)


@pytest.mark.parametrize(
    "n,folds",
    [(7000, 1), (6001, 1), (6000, 2), (5000, 2), (3000, 2), (2999, 3), (1000, 3), (999, 5), (500, 5)],
)
def test_cv_folds_rules(n, folds):
    assert cv_folds(n) == folds
