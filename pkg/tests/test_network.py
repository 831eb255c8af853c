import itertools

import numpy as np
import pytest

from logicnet.config import ArchitectureConfig
from logicnet.logic import LogicKind
from logicnet.network import (
    Predicate,
    init_network,
    load,
    networks_equal,
    parameter_count,
    predict,
    save,
    validate_structure,
)
from logicnet.model_io import ModelDecodeError


def passthrough_predicates(n):
    return [Predicate(i, f"x{i}", lo=0.0, hi=1.0) for i in range(n)]


def arch(**kw):
    defaults = dict(
        n_layers=2,
        layer_sizes=[4, 2],
        n_selected_features_input=3,
        n_selected_features_internal=2,
        n_selected_features_output=2,
        normal_form="dnf",
        weight_init=0.2,
        add_negations=True,
    )
    defaults.update(kw)
    return ArchitectureConfig(**defaults)


def test_minimal_net_is_single_conjunction_root():
    cfg = arch(n_layers=1, layer_sizes=[1], n_selected_features_input=2)
    net = init_network(passthrough_predicates(2), cfg, seed := 5)
    assert len(net.blocks) == 1
    assert net.blocks[0].kind is LogicKind.CONJUNCTION
    assert net.blocks[0].shape.out_size == 1
    assert net.blocks[0].shape.in_size <= 2
    validate_structure(net)


def test_same_seed_identical_networks():
    cfg = arch()
    a = init_network(passthrough_predicates(8), cfg, 123)
    b = init_network(passthrough_predicates(8), cfg, 123)
    assert networks_equal(a, b)
    c = init_network(passthrough_predicates(8), cfg, 124)
    assert not networks_equal(a, c)


def test_layer0_nodes_select_exactly_three_distinct_predicates():
    net = init_network(passthrough_predicates(10), arch(), 0)
    conn = net.blocks[0].connectivity
    assert conn.shape == (4, 3)
    for o in range(4):
        assert len(set(conn[o].tolist())) == 3


def test_kinds_alternate_and_match_normal_form():
    dnf = init_network(passthrough_predicates(10), arch(), 0)
    assert [b.kind for b in dnf.blocks] == [
        LogicKind.CONJUNCTION,
        LogicKind.DISJUNCTION,
        LogicKind.CONJUNCTION,
    ]
    cnf = init_network(passthrough_predicates(10), arch(normal_form="cnf"), 0)
    assert cnf.blocks[0].kind is LogicKind.DISJUNCTION


def test_selection_exceeding_inputs_errors():
    with pytest.raises(ValueError):
        init_network(passthrough_predicates(2), arch(n_selected_features_input=3), 0)


def test_weight_init_law():
    cfg = arch(add_negations=False, weight_init=0.4)
    net = init_network(passthrough_predicates(10), cfg, 9)
    for blk in net.blocks:
        assert np.all(blk.weights >= 0.01 * 0.4)
        assert np.all(blk.weights <= 0.4)
    signed = init_network(passthrough_predicates(10), arch(weight_init=0.4), 9)
    mags = np.concatenate([np.abs(b.weights).ravel() for b in signed.blocks])
    assert np.all((mags >= 0.01 * 0.4) & (mags <= 0.4))
    assert any((b.weights < 0).any() for b in signed.blocks)


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------

def _boolean_oracle(net, bits):
    """Brute-force evaluation of the formula a +/-1-weight network encodes."""

    def value(level, node):
        blk = net.blocks[level]
        vals = []
        for j, src in enumerate(blk.connectivity[node]):
            v = bits[src] if level == 0 else value(level - 1, src)
            if blk.weights[0, node, j] < 0:
                v = not v
            vals.append(v)
        return all(vals) if blk.kind is LogicKind.CONJUNCTION else any(vals)

    return float(value(len(net.blocks) - 1, 0))


def _sign_network(n_preds, seed, n_layers=2):
    cfg = arch(
        n_layers=n_layers,
        layer_sizes=[3, 2][:n_layers],
        n_selected_features_input=min(3, n_preds),
        n_selected_features_internal=2,
        n_selected_features_output=2,
    )
    net = init_network(passthrough_predicates(n_preds), cfg, seed)
    rng = np.random.default_rng(seed + 1)
    for blk in net.blocks:
        blk.weights[:] = rng.choice([-1.0, 1.0], size=blk.weights.shape)
    return net


def test_predict_equals_boolean_formula_on_crisp_inputs():
    for seed in range(5):
        n = 6
        net = _sign_network(n, seed)
        for bits in itertools.product((0.0, 1.0), repeat=n):
            got = predict(net, np.array([bits]))[0]
            assert got == _boolean_oracle(net, bits)


def test_predict_empty_batch():
    net = init_network(passthrough_predicates(6), arch(), 0)
    assert predict(net, np.empty((0, 6))).shape == (0,)


def test_predict_batch_invariance():
    net = init_network(passthrough_predicates(6), arch(), 0)
    rows = np.random.default_rng(0).uniform(size=(8, 6))
    whole = predict(net, rows)
    parts = np.concatenate([predict(net, rows[i : i + 1]) for i in range(8)])
    np.testing.assert_array_equal(whole, parts)


def test_predict_outputs_in_unit_interval():
    net = init_network(passthrough_predicates(6), arch(), 2)
    rows = np.random.default_rng(1).uniform(size=(50, 6))
    out = predict(net, rows)
    assert np.all((out >= 0) & (out <= 1))


def test_predict_width_mismatch_errors():
    net = init_network(passthrough_predicates(6), arch(), 0)
    with pytest.raises(ValueError):
        predict(net, np.zeros((2, 5)))


# ---------------------------------------------------------------------------
# parameter_count
# ---------------------------------------------------------------------------

def test_parameter_count_single_node():
    cfg = arch(n_layers=1, layer_sizes=[1], n_selected_features_input=5)
    net = init_network(passthrough_predicates(5), cfg, 0)
    assert parameter_count(net) == 5


def test_parameter_count_layered():
    net = init_network(passthrough_predicates(10), arch(), 0)
    assert parameter_count(net) == 4 * 3 + 2 * 2 + 1 * 2


def test_parameter_count_survives_round_trip():
    net = init_network(passthrough_predicates(10), arch(), 0)
    assert parameter_count(load(save(net))) == parameter_count(net)


# ---------------------------------------------------------------------------
# save / load
# ---------------------------------------------------------------------------

def test_round_trip_is_bit_exact():
    net = init_network(passthrough_predicates(10), arch(), 7)
    back = load(save(net))
    assert networks_equal(net, back)
    rows = np.random.default_rng(2).uniform(size=(20, 10))
    np.testing.assert_array_equal(predict(net, rows), predict(back, rows))


def test_truncated_payload_errors():
    payload = save(init_network(passthrough_predicates(5), arch(n_layers=1, layer_sizes=[1], n_selected_features_input=3), 0))
    with pytest.raises(ModelDecodeError):
        load(payload[: len(payload) // 2])


def test_newer_version_errors():
    payload = save(init_network(passthrough_predicates(5), arch(n_layers=1, layer_sizes=[1], n_selected_features_input=3), 0))
    bumped = payload.replace(b'"format_version": 1', b'"format_version": 2')
    with pytest.raises(ModelDecodeError, match="format_version"):
        load(bumped)
