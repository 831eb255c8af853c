import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logicnet.logic import (
    BlockShape,
    LogicKind,
    NodeParams,
    block_forward,
    eval_conjunction,
    eval_disjunction,
    eval_node,
    masked_input,
    node_gradients,
    required_child_value,
)

CONJ = LogicKind.CONJUNCTION
DISJ = LogicKind.DISJUNCTION


def params(w, beta=1.0):
    return NodeParams(np.asarray(w, dtype=np.float64), beta)


# ---------------------------------------------------------------------------
# masked_input
# ---------------------------------------------------------------------------

def test_masked_input_positive_weight_is_identity():
    assert masked_input(1.0, 2.0) == 1.0


def test_masked_input_negative_weight_flips():
    assert masked_input(1.0, -2.0) == 0.0
    assert masked_input(0.25, -0.5) == 0.75


def test_masked_input_zero_weight_counts_as_negation():
    assert masked_input(0.25, 0.0) == 0.75


# ---------------------------------------------------------------------------
# eval_conjunction / eval_disjunction
# ---------------------------------------------------------------------------

def test_conjunction_all_true():
    assert eval_conjunction(params([1, 1]), [1, 1]) == 1.0


def test_conjunction_one_false_unit_weight():
    assert eval_conjunction(params([1, 1]), [1, 0]) == 0.0


def test_conjunction_negated_scalar():
    assert eval_conjunction(params([-2]), [0.25]) == pytest.approx(0.5)


def test_conjunction_soft_values():
    assert eval_conjunction(params([0.5, 0.5]), [0.9, 0.9]) == pytest.approx(0.9)


def test_disjunction_all_false():
    assert eval_disjunction(params([1, 1]), [0, 0]) == 0.0


def test_disjunction_one_true():
    assert eval_disjunction(params([1, 1]), [1, 0]) == 1.0


def test_disjunction_negated_scalar_clamps():
    assert eval_disjunction(params([-2]), [0.25]) == 1.0


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        eval_conjunction(params([1, 1]), [1, 0, 1])
    with pytest.raises(ValueError):
        eval_disjunction(params([1]), [])


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        NodeParams(np.array([]), 1.0)
    with pytest.raises(ValueError):
        NodeParams(np.array([1.0]), -0.5)


@given(
    st.lists(st.floats(-5, 5), min_size=1, max_size=8),
    st.data(),
)
@settings(max_examples=300, deadline=None)
def test_outputs_always_in_unit_interval(weights, data):
    x = data.draw(
        st.lists(st.floats(0, 1), min_size=len(weights), max_size=len(weights))
    )
    beta = data.draw(st.floats(0, 3))
    p = params(weights, beta)
    for kind in (CONJ, DISJ):
        out = eval_node(kind, p, x)
        assert 0.0 <= out <= 1.0


@given(
    st.lists(st.floats(-3, 3).filter(lambda w: abs(w) > 1e-3), min_size=1, max_size=6),
    st.data(),
)
@settings(max_examples=200, deadline=None)
def test_monotone_in_each_input(weights, data):
    x = np.array(
        data.draw(st.lists(st.floats(0.05, 0.95), min_size=len(weights), max_size=len(weights)))
    )
    j = data.draw(st.integers(0, len(weights) - 1))
    p = params(weights)
    bumped = x.copy()
    bumped[j] = min(1.0, bumped[j] + 0.03)
    for kind in (CONJ, DISJ):
        lo, hi = eval_node(kind, p, x), eval_node(kind, p, bumped)
        if weights[j] > 0:
            assert hi >= lo - 1e-12
        else:
            assert hi <= lo + 1e-12


def test_boolean_fidelity_exhaustive():
    # With beta=1 and unit-magnitude weights, crisp inputs reproduce AND/OR
    # over the sign-masked literals, for every arity up to 10.
    rng = np.random.default_rng(42)
    for arity in range(1, 11):
        signs = rng.choice([-1.0, 1.0], size=arity)
        p = params(signs)
        for bits in itertools.product((0.0, 1.0), repeat=arity):
            lits = [b if s > 0 else 1 - b for b, s in zip(bits, signs)]
            assert eval_conjunction(p, bits) == float(all(lits))
            assert eval_disjunction(p, bits) == float(any(lits))


# ---------------------------------------------------------------------------
# node_gradients
# ---------------------------------------------------------------------------

def test_gradient_example_soft_conjunction():
    dx, _ = node_gradients(CONJ, params([0.5, 0.5]), [0.9, 0.9])
    np.testing.assert_allclose(dx, [0.5, 0.5])


def test_gradient_at_clamp_boundary_reports_interior():
    dx, _ = node_gradients(DISJ, params([1, 1]), [0, 0])
    np.testing.assert_allclose(dx, [1.0, 1.0])


def test_gradient_negated_conjunction():
    dx, _ = node_gradients(CONJ, params([-2]), [0.25])
    np.testing.assert_allclose(dx, [-2.0])


def test_gradient_zero_outside_clamp():
    dx, dw = node_gradients(DISJ, params([3.0, 3.0]), [0.9, 0.9])
    np.testing.assert_allclose(dx, 0.0)
    np.testing.assert_allclose(dw, 0.0)


def _central_diff(fn, vec, j, h=1e-6):
    up, down = vec.copy(), vec.copy()
    up[j] += h
    down[j] -= h
    return (fn(up) - fn(down)) / (2 * h)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(7)
    checked = {CONJ: 0, DISJ: 0}
    while min(checked.values()) < 100:
        kind = CONJ if checked[CONJ] <= checked[DISJ] else DISJ
        arity = int(rng.integers(1, 7))
        w = rng.uniform(0.1, 2.0, arity) * rng.choice([-1, 1], arity)
        x = rng.uniform(0.02, 0.98, arity)
        p = params(w)
        i = np.where(w > 0, x, 1 - x)
        pre = 1 - np.abs(w) @ (1 - i) if kind is CONJ else np.abs(w) @ i
        if not 0.01 < pre < 0.99:
            continue
        dx, dw = node_gradients(kind, p, x)
        for j in range(arity):
            fd_x = _central_diff(lambda v: eval_node(kind, p, v), x.copy(), j)
            fd_w = _central_diff(lambda v: eval_node(kind, params(v), x), w.copy(), j)
            assert abs(dx[j] - fd_x) <= 1e-5 * max(1.0, abs(fd_x))
            assert abs(dw[j] - fd_w) <= 1e-5 * max(1.0, abs(fd_w))
        checked[kind] += 1


# ---------------------------------------------------------------------------
# block_forward
# ---------------------------------------------------------------------------

def test_block_degenerate_matches_scalar_node():
    w = np.array([[[0.7, -1.2]]])
    betas = np.ones((1, 1))
    rows = np.array([[0.3, 0.8], [1.0, 0.0], [0.5, 0.5]])
    out = block_forward(CONJ, w, betas, rows[:, None, :])
    for b in range(3):
        assert out[b, 0, 0] == pytest.approx(eval_conjunction(params(w[0, 0]), rows[b]))


def test_block_identical_rows_identical_outputs():
    w = np.array([[[0.5, 0.5, -0.25]]])
    rows = np.tile([[0.2, 0.9, 0.4]], (3, 1))
    out = block_forward(DISJ, w, np.ones((1, 1)), rows[:, None, :])
    assert np.all(out == out[0])


def test_block_matches_per_node_loop():
    rng = np.random.default_rng(11)
    weights = rng.normal(size=(2, 4, 3))
    betas = np.ones((2, 4))
    inputs = rng.uniform(size=(5, 2, 3))
    for kind in (CONJ, DISJ):
        out = block_forward(kind, weights, betas, inputs)
        for b, c, o in np.ndindex(5, 2, 4):
            expected = eval_node(kind, NodeParams(weights[c, o], betas[c, o]), inputs[b, c])
            assert abs(out[b, c, o] - expected) < 1e-12


def test_block_matches_loop_on_random_shapes():
    rng = np.random.default_rng(3)
    for _ in range(10):
        c, o, i, batch = (int(rng.integers(1, 5)) for _ in range(4))
        weights = rng.normal(size=(c, o, i))
        betas = np.ones((c, o))
        gathered = rng.uniform(size=(batch, c, o, i))
        kind = CONJ if rng.random() < 0.5 else DISJ
        out = block_forward(kind, weights, betas, gathered)
        for b, cc, oo in np.ndindex(batch, c, o):
            expected = eval_node(kind, NodeParams(weights[cc, oo], betas[cc, oo]), gathered[b, cc, oo])
            assert abs(out[b, cc, oo] - expected) < 1e-12


def test_block_shape_mismatch_raises():
    w = np.zeros((1, 2, 3))
    with pytest.raises(ValueError):
        block_forward(CONJ, w, np.ones((1, 2)), np.zeros((4, 1, 5)))
    with pytest.raises(ValueError):
        block_forward(CONJ, w, np.ones((2, 2)), np.zeros((4, 1, 3)))


def test_block_shape_type_validates():
    with pytest.raises(ValueError):
        BlockShape(0, 1, 1)


# ---------------------------------------------------------------------------
# required_child_value
# ---------------------------------------------------------------------------

def test_required_child_disjunction_example():
    got = required_child_value(DISJ, params([1, 1]), [0.2, 0.3], 0.6, 0)
    assert got == pytest.approx(0.3)


def test_required_child_single_conjunction_needs_full_truth():
    assert required_child_value(CONJ, params([1]), [1.0], 1.0, 0) == 1.0


def test_required_child_conjunction_example():
    got = required_child_value(CONJ, params([1, 1]), [0.8, 0.9], 0.7, 0)
    assert got == pytest.approx(0.8)


def test_required_child_zero_weight_is_undefined():
    with pytest.raises(ValueError):
        required_child_value(DISJ, params([0.0, 1.0]), [0.5, 0.5], 0.5, 0)


@given(st.data())
@settings(max_examples=300, deadline=None)
def test_inversion_consistency(data):
    arity = data.draw(st.integers(1, 6))
    w = np.array(data.draw(st.lists(st.floats(0.1, 2.0), min_size=arity, max_size=arity)))
    vals = np.array(data.draw(st.lists(st.floats(0, 1), min_size=arity, max_size=arity)))
    t = data.draw(st.floats(0, 1))
    j = data.draw(st.integers(0, arity - 1))
    p = params(w)
    for kind in (CONJ, DISJ):
        v = required_child_value(kind, p, vals, t, j)
        if not 0.0 < v < 1.0:
            continue
        adjusted = vals.copy()
        adjusted[j] = v
        assert eval_node(kind, p, adjusted) >= t - 1e-9
