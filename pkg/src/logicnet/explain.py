"""Explanation generation and simplification.

A trained network is explained per sample by a depth-first traversal that
inverts each node's activation: for every child we compute the effective
value it must supply for the node to reach its target truth value, and keep
only children whose actual contribution meets that requirement.  Negative
weights flip the negation context; negated leaves come out wrapped in Not.

The raw tree is then rewritten (negations pushed to the leaves, nested
same-kind connectives flattened, same-feature thresholds merged, single-child
connectives collapsed) and, for sample explanations, collapsed into one
conjunction of rules the sample satisfies.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .logic import LogicKind, NodeParams, masked_input, required_child_value
from .network import Network, Predicate, ThresholdCondition, forward_trace, predict

logger = logging.getLogger(__name__)

# Counts traversal decisions where the printed product inclusion test and the
# plain value test disagree; useful when auditing explanation fidelity.
inclusion_audit_count = 0


def reset_inclusion_audit() -> None:
    global inclusion_audit_count
    inclusion_audit_count = 0


class NodeType(Enum):
    AND = "And"
    OR = "Or"
    NOT = "Not"
    LEAF = "Leaf"


_FLIP_OP = {"<": ">=", "<=": ">", ">": "<=", ">=": "<"}


@dataclass(frozen=True)
class Condition:
    """A relational constraint ``subject op threshold``.

    While the tree is in truth space the subject is a predicate and
    ``pred_index`` is set; after translation to display units the subject is
    a raw feature name and ``pred_index`` is None.
    """

    subject: str
    op: str
    threshold: float
    pred_index: int | None = None

    def negated(self) -> "Condition":
        return replace(self, op=_FLIP_OP[self.op])

    def holds(self, value: float) -> bool:
        return ThresholdCondition(self.subject, self.op, self.threshold).holds(value)

    def render(self) -> str:
        return f"{self.subject} {self.op} {self.threshold:.6g}"

    def merge_key(self):
        direction = "upper" if self.op in ("<", "<=") else "lower"
        return (self.pred_index if self.pred_index is not None else self.subject, direction)


@dataclass
class ExplanationNode:
    type: NodeType
    children: list["ExplanationNode"] = field(default_factory=list)
    condition: Condition | None = None

    def __post_init__(self) -> None:
        if self.type is NodeType.LEAF:
            if self.condition is None or self.children:
                raise ValueError("a Leaf carries a condition and no children")
        elif self.type is NodeType.NOT and len(self.children) != 1:
            raise ValueError("Not takes exactly one child")

    @property
    def is_leaf(self) -> bool:
        return self.type is NodeType.LEAF

    def leaves(self) -> list["ExplanationNode"]:
        if self.is_leaf:
            return [self]
        out: list[ExplanationNode] = []
        for c in self.children:
            out.extend(c.leaves())
        return out


def leaf(condition: Condition) -> ExplanationNode:
    return ExplanationNode(NodeType.LEAF, condition=condition)


def and_node(children) -> ExplanationNode:
    return ExplanationNode(NodeType.AND, list(children))


def or_node(children) -> ExplanationNode:
    return ExplanationNode(NodeType.OR, list(children))


def not_node(child: ExplanationNode) -> ExplanationNode:
    return ExplanationNode(NodeType.NOT, [child])


@dataclass
class SampleExplanation:
    """A single conjunction of raw-unit rules the explained sample satisfies."""

    rules: list[Condition]
    confidence: float

    def render(self) -> str:
        return "AND(" + ", ".join(r.render() for r in self.rules) + ")"


# ---------------------------------------------------------------------------
# Sample traversal
# ---------------------------------------------------------------------------

def _node_type_for(kind: LogicKind) -> NodeType:
    return NodeType.AND if kind is LogicKind.CONJUNCTION else NodeType.OR


def explain_sample(
    net: Network, row: np.ndarray, inclusion_test: str = "product"
) -> ExplanationNode | None:
    """Unsimplified explanation tree for one predicate-space row.

    The target at the root is the network's own output for the row.  A child
    is included when its effective contribution ``value * |w|`` meets the
    required child value (strictly fails it, in a negated context); a zero
    requirement means the child is not needed and it is skipped.  With
    ``inclusion_test="value"`` the weight factor is dropped from the test.
    Returns None when nothing satisfies inclusion.
    """
    global inclusion_audit_count
    if inclusion_test not in ("product", "value"):
        raise ValueError(f"unknown inclusion_test {inclusion_test!r}")
    row = np.asarray(row, dtype=np.float64)
    if not net.blocks:
        raise ValueError("cannot explain an empty network")
    trace = forward_trace(net, row[None, :])
    values = [trace[0][0, 0]] + [t[0, 0] for t in trace[1:]]
    target = float(values[-1][0])

    def child_name(level: int, index: int) -> str:
        if level == 0:
            return net.predicates[index].name
        return f"node{level - 1}.{index}"

    def recurse(level: int, node: int, t: float, neg: bool) -> ExplanationNode | None:
        global inclusion_audit_count
        blk = net.blocks[level]
        w = blk.weights[0, node]
        conn = blk.connectivity[node]
        child_vals = values[level][conn]
        params = NodeParams(w, beta=float(blk.betas[0, node]))
        t_eff = 1.0 - t if neg else t
        order = sorted(
            range(w.size), key=lambda j: (-abs(w[j]), child_name(level, int(conn[j])))
        )
        parts: list[ExplanationNode] = []
        for j in order:
            if w[j] == 0.0:
                continue
            v_c = required_child_value(blk.kind, params, child_vals, t_eff, j)
            eff = float(masked_input(child_vals[j], w[j]))
            contrib = eff * abs(w[j]) if inclusion_test == "product" else eff
            alt = eff if inclusion_test == "product" else eff * abs(w[j])
            if neg:
                included = contrib < v_c
                alt_included = alt < v_c
            else:
                included = contrib >= v_c and v_c > 0.0
                alt_included = alt >= v_c and v_c > 0.0
            if included != alt_included:
                inclusion_audit_count += 1
                logger.debug(
                    "inclusion tests disagree at level %d node %d child %d (v_c=%.6g)",
                    level,
                    node,
                    j,
                    v_c,
                )
            if not included:
                continue
            if level == 0:
                v = 1.0 - v_c if w[j] < 0 else v_c
                pred = net.predicates[conn[j]]
                part = leaf(Condition(pred.name, ">=", v, pred_index=int(conn[j])))
                if (w[j] < 0) != neg:
                    part = not_node(part)
            else:
                child_neg = (not neg) if w[j] < 0 else neg
                sub = recurse(level - 1, int(conn[j]), v_c, child_neg)
                if sub is None:
                    continue
                part = not_node(sub) if neg else sub
            parts.append(part)
        if parts:
            return ExplanationNode(_node_type_for(blk.kind), parts)
        return None

    return recurse(len(net.blocks) - 1, 0, target, False)


# ---------------------------------------------------------------------------
# Rewrite engine
# ---------------------------------------------------------------------------

def push_negations_down(node: ExplanationNode) -> ExplanationNode:
    """Eliminate Not above connectives: De Morgan plus leaf operator flips."""
    if node.is_leaf:
        return node
    if node.type is NodeType.NOT:
        return _negate(node.children[0])
    return ExplanationNode(node.type, [push_negations_down(c) for c in node.children])


def _negate(node: ExplanationNode) -> ExplanationNode:
    if node.is_leaf:
        return leaf(node.condition.negated())
    if node.type is NodeType.NOT:  # double negation cancels
        return push_negations_down(node.children[0])
    flipped = NodeType.OR if node.type is NodeType.AND else NodeType.AND
    return ExplanationNode(flipped, [_negate(c) for c in node.children])


def collapse_repeated_operands(node: ExplanationNode) -> ExplanationNode:
    """Flatten nested And/And and Or/Or chains into single connectives."""
    if node.is_leaf:
        return node
    children = [collapse_repeated_operands(c) for c in node.children]
    if node.type in (NodeType.AND, NodeType.OR):
        flat: list[ExplanationNode] = []
        for c in children:
            if c.type is node.type:
                flat.extend(c.children)
            else:
                flat.append(c)
        children = flat
    return ExplanationNode(node.type, children, node.condition)


def remove_redundant_predicates(node: ExplanationNode) -> ExplanationNode:
    """Merge same-feature same-direction leaf thresholds within one connective.

    Inside an And, upper bounds keep the minimum threshold and lower bounds
    the maximum; inside an Or, the other way round.  At equal thresholds the
    strictness follows the limiting rule: the strict operator wins under And,
    the inclusive one under Or.
    """
    if node.is_leaf or node.type is NodeType.NOT:
        if node.type is NodeType.NOT:
            return ExplanationNode(node.type, [remove_redundant_predicates(c) for c in node.children])
        return node
    merged: dict = {}
    others: list[ExplanationNode] = []
    order: list = []
    for c in node.children:
        if not c.is_leaf:
            others.append(remove_redundant_predicates(c))
            order.append(("node", len(others) - 1))
            continue
        key = c.condition.merge_key()
        if key not in merged:
            merged[key] = c.condition
            order.append(("leaf", key))
        else:
            merged[key] = _merge_pair(node.type, merged[key], c.condition)
    children = [
        leaf(merged[ref]) if tag == "leaf" else others[ref] for tag, ref in order
    ]
    return ExplanationNode(node.type, children, node.condition)


def _merge_pair(parent: NodeType, a: Condition, b: Condition) -> Condition:
    upper = a.op in ("<", "<=")
    # And restricts: tightest bound wins.  Or relaxes: loosest bound wins.
    want_min = upper == (parent is NodeType.AND)
    if a.threshold != b.threshold:
        pick = min if want_min else max
        return a if pick(a.threshold, b.threshold) == a.threshold else b
    strict_wins = parent is NodeType.AND
    a_strict = a.op in ("<", ">")
    if a_strict == strict_wins:
        return a
    return b


def collapse_single_operands(node: ExplanationNode) -> ExplanationNode | None:
    """Replace single-child connectives by the child; drop empty ones."""
    if node.is_leaf:
        return node
    children = [c for c in (collapse_single_operands(ch) for ch in node.children) if c is not None]
    if node.type is NodeType.NOT:
        return ExplanationNode(NodeType.NOT, children) if children else None
    if not children:
        return None
    if len(children) == 1:
        return children[0]
    return ExplanationNode(node.type, children, node.condition)


# ---------------------------------------------------------------------------
# Truth evaluation, branch dropping, raw-unit translation
# ---------------------------------------------------------------------------

def _condition_truth(cond: Condition, row: np.ndarray) -> bool:
    if cond.pred_index is None:
        raise ValueError("condition already translated out of truth space")
    return cond.holds(float(row[cond.pred_index]))


def node_truth(node: ExplanationNode, row: np.ndarray) -> bool:
    """Crisp boolean value of a (truth-space) explanation tree on one row."""
    if node.is_leaf:
        return _condition_truth(node.condition, row)
    if node.type is NodeType.NOT:
        return not node_truth(node.children[0], row)
    if node.type is NodeType.AND:
        return all(node_truth(c, row) for c in node.children)
    return any(node_truth(c, row) for c in node.children)


def collapse_sample_explanation(node: ExplanationNode, row: np.ndarray) -> ExplanationNode:
    """Drop Or branches false for the sample; conjoin the surviving true rules."""
    kept: list[Condition] = []

    def walk(n: ExplanationNode) -> None:
        if n.is_leaf:
            if _condition_truth(n.condition, row):
                kept.append(n.condition)
        elif n.type is NodeType.OR:
            for c in n.children:
                if node_truth(c, row):
                    walk(c)
        elif n.type is NodeType.AND:
            for c in n.children:
                walk(c)
        else:  # a Not above a leaf survives as the flipped condition
            child = n.children[0]
            if child.is_leaf and not _condition_truth(child.condition, row):
                kept.append(child.condition.negated())

    walk(node)
    return and_node([leaf(c) for c in kept])


_TRUE = "true"
_FALSE = "false"


def translate_condition(cond: Condition, predicates: list[Predicate]):
    """Rewrite a truth-space condition in raw feature units.

    Returns a Condition, or the string "true"/"false" when the constraint is
    vacuous or unsatisfiable for the predicate's value range.
    """
    p = predicates[cond.pred_index]
    op, v = cond.op, cond.threshold
    if p.condition is not None:
        # Crisp 0/1 column 1{f <= t}: the condition collapses to the raw
        # threshold rule, its negation, or a constant.
        t_rule = Condition(p.condition.feature, p.condition.op, p.condition.threshold)
        f_rule = t_rule.negated()
        if op == ">=":
            return _TRUE if v <= 0 else (t_rule if v <= 1 else _FALSE)
        if op == ">":
            return _TRUE if v < 0 else (t_rule if v < 1 else _FALSE)
        if op == "<=":
            return _FALSE if v < 0 else (f_rule if v < 1 else _TRUE)
        if op == "<":
            return _FALSE if v <= 0 else (f_rule if v <= 1 else _TRUE)
        raise ValueError(f"unknown operator {op!r}")
    lo, hi = p.lo, p.hi
    if lo == hi:  # constant column scaled to 0.5
        value = 0.5
        return _TRUE if Condition(p.name, op, v).holds(value) else _FALSE
    # Truth is clipped to [0, 1]; bounds outside that range are constants.
    if op in (">=", ">"):
        if v <= 0 and op == ">=":
            return _TRUE
        if v < 0:
            return _TRUE
        if v > 1 or (v == 1 and op == ">"):
            return _FALSE
    else:
        if v >= 1 and op == "<=":
            return _TRUE
        if v > 1:
            return _TRUE
        if v < 0 or (v == 0 and op == "<"):
            return _FALSE
    raw = lo + v * (hi - lo)
    return Condition(p.name, op, raw)


def translate_tree(node: ExplanationNode | None, predicates: list[Predicate]) -> ExplanationNode | None:
    """Translate every leaf to raw units, folding constants away."""
    if node is None:
        return None
    if node.is_leaf:
        res = translate_condition(node.condition, predicates)
        if isinstance(res, Condition):
            return leaf(res)
        return res  # constant marker, folded by the caller
    if node.type is NodeType.NOT:
        child = translate_tree(node.children[0], predicates)
        if child == _TRUE:
            return _FALSE
        if child == _FALSE:
            return _TRUE
        if child is None:
            return None
        return not_node(child)
    children = []
    for c in node.children:
        r = translate_tree(c, predicates)
        if r is None:
            continue
        if node.type is NodeType.AND:
            if r == _TRUE:
                continue
            if r == _FALSE:
                return _FALSE
        else:
            if r == _FALSE:
                continue
            if r == _TRUE:
                return _TRUE
        children.append(r)
    if not children:
        return None
    if len(children) == 1:
        return children[0]
    return ExplanationNode(node.type, children)


def simplify(tree: ExplanationNode | None, row: np.ndarray, net: Network) -> SampleExplanation:
    """Full sample simplification pipeline.

    Push negations down, flatten repeats, merge redundant thresholds, collapse
    single-child connectives, re-merge, drop branches the sample falsifies and
    conjoin what remains, then merge once more on the raw-unit rules.
    """
    confidence = float(predict(net, np.asarray(row, dtype=np.float64)[None, :])[0])
    if tree is None:
        return SampleExplanation([], confidence)
    node = push_negations_down(tree)
    node = collapse_repeated_operands(node)
    node = remove_redundant_predicates(node)
    node = collapse_single_operands(node)
    if node is None:
        return SampleExplanation([], confidence)
    node = remove_redundant_predicates(node)
    node = collapse_sample_explanation(node, row)
    raw = translate_tree(node, net.predicates)
    if raw is None or isinstance(raw, str):
        return SampleExplanation([], confidence)
    if raw.is_leaf:
        return SampleExplanation([raw.condition], confidence)
    raw = remove_redundant_predicates(raw)
    return SampleExplanation([c.condition for c in raw.children], confidence)


def explain_and_simplify(net: Network, row: np.ndarray) -> SampleExplanation:
    return simplify(explain_sample(net, row), row, net)


# ---------------------------------------------------------------------------
# Feature importance and global explanations
# ---------------------------------------------------------------------------

def feature_importance(net: Network) -> np.ndarray:
    """Sum-product of |weights| along every root-to-leaf path, per raw feature."""
    acc = np.ones(1, dtype=np.float64)
    for idx in range(len(net.blocks) - 1, -1, -1):
        blk = net.blocks[idx]
        w = np.abs(blk.weights[0])
        prev_width = net.n_predicates if idx == 0 else net.blocks[idx - 1].shape.out_size
        nxt = np.zeros(prev_width)
        np.add.at(nxt, blk.connectivity, acc[:, None] * w)
        acc = nxt
    importance = np.zeros(net.n_features)
    for idx, p in enumerate(net.predicates):
        importance[p.feature_index] += acc[idx]
    return importance


def _best_downstream_ratio(net: Network) -> list[np.ndarray]:
    """Per layer, each node's strongest |weight| product down to any leaf."""
    ratios: list[np.ndarray] = [np.ones(net.n_predicates)]
    for blk in net.blocks:
        w = np.abs(blk.weights[0])
        below = ratios[-1][blk.connectivity]
        ratios.append((w * below).max(axis=1))
    return ratios


def global_explanation(
    net: Network,
    predictions: np.ndarray,
    confidence_percentile: float,
    weight_quantile: float,
) -> ExplanationNode | None:
    """Model-level explanation against a prediction-percentile target.

    The target truth value is the given percentile of the prediction vector.
    Instead of per-sample values, the traversal keeps the sub-graph whose
    root-to-leaf |weight| products fall in the top ``weight_quantile``
    fraction, and computes required child values assuming the neutral 0.5
    operating point for siblings.  Simplified without branch dropping.
    """
    if not 0.0 < weight_quantile <= 1.0:
        raise ValueError("weight_quantile must lie in (0, 1]")
    predictions = np.asarray(predictions, dtype=np.float64)
    target = float(np.percentile(predictions, confidence_percentile))

    branch_accs: list[float] = []

    def collect(level: int, node: int, acc: float) -> None:
        blk = net.blocks[level]
        w = blk.weights[0, node]
        for j in range(w.size):
            if w[j] == 0.0:
                continue
            a = acc * abs(w[j])
            if level == 0:
                branch_accs.append(a)
            else:
                collect(level - 1, int(blk.connectivity[node, j]), a)

    collect(len(net.blocks) - 1, 0, 1.0)
    if not branch_accs:
        return None
    threshold = float(np.quantile(branch_accs, 1.0 - weight_quantile))
    ratios = _best_downstream_ratio(net)

    def recurse(level: int, node: int, t: float, neg: bool, path_acc: float) -> ExplanationNode | None:
        blk = net.blocks[level]
        w = blk.weights[0, node]
        conn = blk.connectivity[node]
        params = NodeParams(w, beta=float(blk.betas[0, node]))
        neutral = np.full(w.shape, 0.5)
        t_eff = 1.0 - t if neg else t
        order = sorted(range(w.size), key=lambda j: (-abs(w[j]), int(conn[j])))
        parts: list[ExplanationNode] = []
        for j in order:
            if w[j] == 0.0:
                continue
            best = path_acc * abs(w[j]) * float(ratios[level][conn[j]])
            if best < threshold:
                continue
            v_c = required_child_value(blk.kind, params, neutral, t_eff, j)
            if level == 0:
                if v_c <= 0.0:
                    continue
                v = 1.0 - v_c if w[j] < 0 else v_c
                pred = net.predicates[conn[j]]
                part = leaf(Condition(pred.name, ">=", v, pred_index=int(conn[j])))
                if (w[j] < 0) != neg:
                    part = not_node(part)
            else:
                child_neg = (not neg) if w[j] < 0 else neg
                sub = recurse(level - 1, int(conn[j]), v_c, child_neg, path_acc * abs(w[j]))
                if sub is None:
                    continue
                part = not_node(sub) if neg else sub
            parts.append(part)
        if parts:
            return ExplanationNode(_node_type_for(blk.kind), parts)
        return None

    tree = recurse(len(net.blocks) - 1, 0, target, False, 1.0)
    if tree is None:
        return None
    node = push_negations_down(tree)
    node = collapse_repeated_operands(node)
    node = remove_redundant_predicates(node)
    node = collapse_single_operands(node)
    if node is None:
        return None
    node = remove_redundant_predicates(node)
    raw = translate_tree(node, net.predicates)
    if isinstance(raw, str):
        return None
    return raw


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def to_text(node: ExplanationNode | None) -> str:
    if node is None:
        return ""
    if node.is_leaf:
        return node.condition.render()
    name = {NodeType.AND: "AND", NodeType.OR: "OR", NodeType.NOT: "NOT"}[node.type]
    return f"{name}(" + ", ".join(to_text(c) for c in node.children) + ")"


def to_doc(node: ExplanationNode | None) -> dict | None:
    if node is None:
        return None
    if node.is_leaf:
        c = node.condition
        return {"type": "Leaf", "feature": c.subject, "op": c.op, "threshold": c.threshold}
    return {"type": node.type.value, "children": [to_doc(c) for c in node.children]}
