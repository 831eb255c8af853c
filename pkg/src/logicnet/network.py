"""The logic network: predicate leaves, alternating And/Or blocks, forward pass.

Blocks are sparsely connected: each node reads a fixed-size random subset of
the previous layer (or of the predicates, for layer 0).  The root block has a
single output node whose truth value is the classifier score.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .config import ArchitectureConfig
from .logic import BlockShape, LogicKind, block_forward


@dataclass(frozen=True)
class ThresholdCondition:
    """A displayable relational constraint on one raw feature."""

    feature: str
    op: str  # one of "<", "<=", ">", ">="
    threshold: float

    def holds(self, value: float) -> bool:
        if self.op == "<":
            return value < self.threshold
        if self.op == "<=":
            return value <= self.threshold
        if self.op == ">":
            return value > self.threshold
        if self.op == ">=":
            return value >= self.threshold
        raise ValueError(f"unknown operator {self.op!r}")

    def render(self) -> str:
        return f"{self.feature} {self.op} {self.threshold:.6g}"


@dataclass(frozen=True)
class Predicate:
    """A leaf binding one feature column to a named, displayable condition.

    Binarized predicates carry the threshold condition that produced their
    0/1 column.  Pass-through predicates carry the min-max bounds used to
    scale the raw column into [0, 1], for display in raw units.
    """

    feature_index: int
    name: str
    condition: ThresholdCondition | None = None
    lo: float | None = None
    hi: float | None = None


@dataclass
class Block:
    kind: LogicKind
    shape: BlockShape
    weights: np.ndarray  # (C, O, I)
    betas: np.ndarray  # (C, O)
    connectivity: np.ndarray  # (O, I) indices into the previous layer


@dataclass
class Network:
    predicates: list[Predicate]
    blocks: list[Block]
    normal_form: str = "dnf"
    channels: int = 1

    @property
    def n_predicates(self) -> int:
        return len(self.predicates)

    @property
    def n_features(self) -> int:
        return max(p.feature_index for p in self.predicates) + 1

    def copy(self) -> "Network":
        blocks = [
            Block(b.kind, b.shape, b.weights.copy(), b.betas.copy(), b.connectivity.copy())
            for b in self.blocks
        ]
        return Network(list(self.predicates), blocks, self.normal_form, self.channels)


def init_network(predicates: list[Predicate], config: ArchitectureConfig, rng_seed: int) -> Network:
    """Build a fresh alternating network with randomly selected connections.

    dnf starts with a Conjunction layer, cnf with a Disjunction layer; block
    kinds then strictly alternate.  A one-node root block is appended unless
    the last configured layer already has a single node.  Deterministic in
    ``rng_seed``.
    """
    if not predicates:
        raise ValueError("at least one predicate is required")
    rng = np.random.default_rng(rng_seed)
    sizes = list(config.layer_sizes)
    selections = [config.n_selected_features_input] + [
        config.n_selected_features_internal
    ] * (len(sizes) - 1)
    if sizes[-1] != 1:
        sizes.append(1)
        selections.append(config.n_selected_features_output)

    kind = LogicKind.CONJUNCTION if config.normal_form == "dnf" else LogicKind.DISJUNCTION
    blocks: list[Block] = []
    prev_width = len(predicates)
    w0 = config.weight_init
    for out_size, n_sel in zip(sizes, selections):
        if n_sel > prev_width:
            raise ValueError(
                f"cannot select {n_sel} distinct inputs from a layer of width {prev_width}"
            )
        conn = np.empty((out_size, n_sel), dtype=np.int64)
        for o in range(out_size):
            conn[o] = rng.choice(prev_width, size=n_sel, replace=False)
        weights = rng.uniform(0.01 * w0, w0, size=(1, out_size, n_sel))
        if config.add_negations:
            flip = rng.random(size=weights.shape) < 0.5
            weights = np.where(flip, -weights, weights)
        betas = np.ones((1, out_size), dtype=np.float64)
        blocks.append(Block(kind, BlockShape(1, out_size, n_sel), weights, betas, conn))
        prev_width = out_size
        kind = kind.flipped()
    return Network(list(predicates), blocks, config.normal_form, channels=1)


def forward_trace(net: Network, rows: np.ndarray) -> list[np.ndarray]:
    """All layer activations for a batch, starting with the predicate rows.

    ``rows`` is (batch, n_predicates) in [0, 1].  Entry k+1 of the result is
    block k's output of shape (batch, C, out_size).
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != net.n_predicates:
        raise ValueError(
            f"expected rows of width {net.n_predicates}, got shape {rows.shape}"
        )
    act = np.broadcast_to(rows[:, None, :], (rows.shape[0], net.channels, rows.shape[1]))
    trace = [np.ascontiguousarray(act)]
    for blk in net.blocks:
        gathered = trace[-1][:, :, blk.connectivity]
        trace.append(block_forward(blk.kind, blk.weights, blk.betas, gathered))
    return trace


def predict(net: Network, rows: np.ndarray) -> np.ndarray:
    """Root truth value per sample; shape (batch,) for a single channel."""
    out = forward_trace(net, rows)[-1]
    if net.channels == 1:
        return out[:, 0, 0]
    return out[:, :, 0]


def parameter_count(net: Network) -> int:
    """Number of stored weights (the fixed biases are excluded)."""
    return int(sum(b.weights.size for b in net.blocks))


def validate_structure(net: Network) -> None:
    """Check connectivity bounds, per-node uniqueness and kind alternation."""
    prev_width = net.n_predicates
    for idx, blk in enumerate(net.blocks):
        if idx > 0 and blk.kind is net.blocks[idx - 1].kind:
            raise ValueError(f"blocks {idx - 1} and {idx} share kind {blk.kind}")
        conn = blk.connectivity
        if conn.min() < 0 or conn.max() >= prev_width:
            raise ValueError(f"block {idx} connectivity out of range [0, {prev_width})")
        for o in range(conn.shape[0]):
            if len(set(conn[o].tolist())) != conn.shape[1]:
                raise ValueError(f"block {idx} node {o} repeats an input index")
        if blk.weights.shape != (net.channels, conn.shape[0], conn.shape[1]):
            raise ValueError(f"block {idx} weight shape {blk.weights.shape} inconsistent")
        prev_width = conn.shape[0]
    if net.blocks[-1].connectivity.shape[0] != 1:
        raise ValueError("root block must have a single output node")


def networks_equal(a: Network, b: Network) -> bool:
    if len(a.blocks) != len(b.blocks) or a.normal_form != b.normal_form:
        return False
    if [p.name for p in a.predicates] != [p.name for p in b.predicates]:
        return False
    for x, y in zip(a.blocks, b.blocks):
        if x.kind is not y.kind or not np.array_equal(x.connectivity, y.connectivity):
            return False
        if not np.array_equal(x.weights, y.weights) or not np.array_equal(x.betas, y.betas):
            return False
    return True


def save(net: Network) -> bytes:
    """Serialize to the versioned network document (weights bit-exact)."""
    from . import model_io

    return model_io.network_to_bytes(net)


def load(payload: bytes) -> Network:
    from . import model_io

    return model_io.network_from_bytes(payload)
