"""Weighted Lukasiewicz logic: forward evaluation, gradients, inversion.

A node combines inputs ``x`` in [0, 1] with signed weights ``w`` and a fixed
bias ``beta``.  Negative weights negate their input: the effective value fed
to the node is ``m*x + (1-m)*(1-x)`` with ``m = 1[w > 0]``, so negation costs
no extra parameters.  Conjunction and disjunction are clamped affine maps of
the weighted effective inputs; everything here is float64 and pure.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class LogicKind(Enum):
    """Which of the two clamped-affine operations a node computes."""

    CONJUNCTION = "and"
    DISJUNCTION = "or"

    def flipped(self) -> "LogicKind":
        if self is LogicKind.CONJUNCTION:
            return LogicKind.DISJUNCTION
        return LogicKind.CONJUNCTION


@dataclass(frozen=True)
class NodeParams:
    """Signed input weights and the (fixed, non-trainable) bias of one node."""

    weights: np.ndarray
    beta: float = 1.0

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty 1-D vector")
        if not self.beta >= 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class BlockShape:
    """Dimensions of a logic block: channels, nodes, inputs per node."""

    channels: int
    out_size: int
    in_size: int

    def __post_init__(self) -> None:
        if min(self.channels, self.out_size, self.in_size) < 1:
            raise ValueError(f"all block dimensions must be >= 1, got {self}")


def masked_input(x, w):
    """Effective input value under the weight's sign mask.

    Returns ``x`` where ``w > 0`` and ``1 - x`` otherwise (negated input).
    Works elementwise on arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    return np.where(np.asarray(w) > 0, x, 1.0 - x)


def _validated(params: NodeParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != params.weights.shape:
        raise ValueError(f"input length {x.shape} does not match weights {params.weights.shape}")
    return x


def eval_conjunction(params: NodeParams, x) -> float:
    """Weighted fuzzy AND: clamp(beta - sum_j |w_j| * (1 - i_j))."""
    x = _validated(params, x)
    i = masked_input(x, params.weights)
    pre = params.beta - np.abs(params.weights) @ (1.0 - i)
    return float(np.clip(pre, 0.0, 1.0))


def eval_disjunction(params: NodeParams, x) -> float:
    """Weighted fuzzy OR: clamp(1 - beta + sum_j |w_j| * i_j)."""
    x = _validated(params, x)
    i = masked_input(x, params.weights)
    pre = 1.0 - params.beta + np.abs(params.weights) @ i
    return float(np.clip(pre, 0.0, 1.0))


def eval_node(kind: LogicKind, params: NodeParams, x) -> float:
    if kind is LogicKind.CONJUNCTION:
        return eval_conjunction(params, x)
    return eval_disjunction(params, x)


def node_gradients(kind: LogicKind, params: NodeParams, x) -> tuple[np.ndarray, np.ndarray]:
    """Analytic partials (d_out/d_x, d_out/d_w) of a single node.

    Conventions: the clamp contributes factor 1 while the pre-clamp value is
    inside [0, 1] (boundaries report the interior derivative) and 0 outside;
    the mask is treated as constant; |w| has subgradient 0 at w = 0.
    """
    x = _validated(params, x)
    w = params.weights
    i = masked_input(x, w)
    aw = np.abs(w)
    if kind is LogicKind.CONJUNCTION:
        pre = params.beta - aw @ (1.0 - i)
        dpre_dw = -np.sign(w) * (1.0 - i)
    else:
        pre = 1.0 - params.beta + aw @ i
        dpre_dw = np.sign(w) * i
    g = 1.0 if 0.0 <= pre <= 1.0 else 0.0
    # d pre/d x_j = |w_j| * (2 m_j - 1) which is w_j for either sign (0 at w_j = 0)
    dx = g * w.copy()
    dw = g * dpre_dw
    return dx, dw


def block_forward(kind: LogicKind, weights: np.ndarray, betas: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Batched evaluation of a block of nodes.

    ``weights`` has shape (C, O, I) and ``betas`` (C, O).  ``inputs`` is either
    (batch, C, I) -- the same I-vector fed to every node -- or (batch, C, O, I)
    with inputs already gathered per node.  Returns (batch, C, O).
    """
    weights = np.asarray(weights, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    inputs = np.asarray(inputs, dtype=np.float64)
    if weights.ndim != 3:
        raise ValueError(f"weights must be (C, O, I), got shape {weights.shape}")
    c, o, i = weights.shape
    if betas.shape != (c, o):
        raise ValueError(f"betas shape {betas.shape} does not match weights {(c, o)}")
    if inputs.ndim == 3:
        if inputs.shape[1:] != (c, i):
            raise ValueError(f"inputs shape {inputs.shape} incompatible with weights {weights.shape}")
        x = inputs[:, :, None, :]
    elif inputs.ndim == 4:
        if inputs.shape[1:] != (c, o, i):
            raise ValueError(f"inputs shape {inputs.shape} incompatible with weights {weights.shape}")
        x = inputs
    else:
        raise ValueError(f"inputs must be 3-D or 4-D, got {inputs.ndim}-D")
    eff = np.where(weights > 0, x, 1.0 - x)
    aw = np.abs(weights)
    if kind is LogicKind.CONJUNCTION:
        pre = betas[None, :, :] - np.einsum("coi,bcoi->bco", aw, 1.0 - eff)
    else:
        pre = 1.0 - betas[None, :, :] + np.einsum("coi,bcoi->bco", aw, eff)
    return np.clip(pre, 0.0, 1.0)


def block_backward(
    kind: LogicKind,
    weights: np.ndarray,
    betas: np.ndarray,
    inputs: np.ndarray,
    grad_out: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward pass of :func:`block_forward` for per-node gathered inputs.

    ``inputs`` must be (batch, C, O, I) and ``grad_out`` (batch, C, O).
    Returns (grad_weights summed over the batch, grad_inputs per sample).
    """
    weights = np.asarray(weights, dtype=np.float64)
    inputs = np.asarray(inputs, dtype=np.float64)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    eff = np.where(weights > 0, inputs, 1.0 - inputs)
    aw = np.abs(weights)
    if kind is LogicKind.CONJUNCTION:
        pre = betas[None, :, :] - np.einsum("coi,bcoi->bco", aw, 1.0 - eff)
        dpre_dw = -np.sign(weights) * (1.0 - eff)
    else:
        pre = 1.0 - betas[None, :, :] + np.einsum("coi,bcoi->bco", aw, eff)
        dpre_dw = np.sign(weights) * eff
    g = grad_out * ((pre >= 0.0) & (pre <= 1.0))
    grad_w = np.einsum("bco,bcoi->coi", g, dpre_dw)
    grad_in = g[..., None] * aw * np.where(weights > 0, 1.0, -1.0)
    return grad_w, grad_in


def required_child_value(kind: LogicKind, params: NodeParams, child_values, t: float, j: int) -> float:
    """Invert a node: the effective value input ``j`` must reach so the node
    outputs at least ``t``, holding the other inputs fixed.

    ``child_values`` are raw child truth values; the inversion works on the
    sign-masked effective inputs.  Undefined (raises) for a zero weight.
    """
    values = _validated(params, child_values)
    w = params.weights
    if not 0 <= j < w.size:
        raise IndexError(f"child index {j} out of range for {w.size} inputs")
    aw = np.abs(w)
    if aw[j] == 0.0:
        raise ValueError("required child value is undefined for a zero weight")
    i = masked_input(values, w)
    if kind is LogicKind.DISJUNCTION:
        c_out = i[j] * aw[j]
        s_out = i @ aw - c_out
        t_child = (t - s_out) / aw[j]
        return float(np.clip(t_child, 0.0, 1.0))
    c_out = (1.0 - i[j]) * aw[j]
    s_out = (1.0 - i) @ aw - c_out
    t_child = (1.0 - t - s_out) / aw[j]
    return float(1.0 - np.clip(t_child, 0.0, 1.0))
