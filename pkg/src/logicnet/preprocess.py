"""Dataset preparation: scaling, tree-derived binarization, splits.

Numeric features become predicate columns in [0, 1] one of two ways: as
``1{f <= t}`` indicator columns for split thresholds harvested from small
CART forests, or min-max scaled pass-through columns.  Also provides the
feature/target association score that seeds the bandit prior, and the
train/val/test split and fold-count rules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from .network import Predicate, ThresholdCondition

TRAIN_CAP = 10_000
EVAL_CAP = 50_000


@dataclass(frozen=True)
class MinMaxMap:
    """Invertible min-max map of one column onto [0, 1].

    A constant column maps to the 0.5 convention; its inverse returns the
    constant.
    """

    lo: float
    hi: float

    def apply(self, col: np.ndarray) -> np.ndarray:
        col = np.asarray(col, dtype=np.float64)
        if self.hi == self.lo:
            return np.full(col.shape, 0.5)
        return np.clip((col - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def invert(self, v: float) -> float:
        if self.hi == self.lo:
            return self.lo
        return self.lo + v * (self.hi - self.lo)


def minmax_scale(col: np.ndarray) -> tuple[np.ndarray, MinMaxMap]:
    """Scale a column to [0, 1]; returns the scaled column and inverse map."""
    col = np.asarray(col, dtype=np.float64)
    mapping = MinMaxMap(float(col.min()), float(col.max()))
    return mapping.apply(col), mapping


@dataclass
class BinarizationPlan:
    """Per-feature split thresholds plus the scaling stats captured at fit."""

    thresholds: dict[int, list[float]] = field(default_factory=dict)
    scalers: list[MinMaxMap] = field(default_factory=list)
    feature_names: list[str] = field(default_factory=list)
    degenerate: bool = False


def fbft_fit(
    X: np.ndarray,
    y: np.ndarray,
    tree_num: int,
    tree_depth: int,
    feature_fraction: float,
    thresh_round: int,
    seed: int,
) -> BinarizationPlan:
    """Harvest binarization thresholds from a small forest.

    Fits ``tree_num`` Gini CART trees of depth ``tree_depth`` on bootstrap
    subsamples, each restricted to a random ceil(feature_fraction * m)
    feature subset; collects every internal split threshold, rounded to
    ``thresh_round`` decimals, deduplicated and sorted per feature.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    n, m = X.shape
    plan = BinarizationPlan(
        scalers=[MinMaxMap(float(X[:, f].min()), float(X[:, f].max())) for f in range(m)],
        feature_names=[f"f{f}" for f in range(m)],
    )
    if np.unique(y).size < 2:
        plan.degenerate = True
        return plan
    rng = np.random.default_rng(seed)
    k = max(1, math.ceil(feature_fraction * m))
    collected: dict[int, set[float]] = {}
    for _ in range(tree_num):
        feats = np.sort(rng.choice(m, size=k, replace=False))
        rows = rng.choice(n, size=n, replace=True)
        tree = DecisionTreeClassifier(
            criterion="gini",
            max_depth=tree_depth,
            random_state=int(rng.integers(2**31 - 1)),
        )
        tree.fit(X[rows][:, feats], y[rows])
        inner = tree.tree_.feature >= 0
        for local_f, thr in zip(tree.tree_.feature[inner], tree.tree_.threshold[inner]):
            collected.setdefault(int(feats[local_f]), set()).add(round(float(thr), thresh_round))
    plan.thresholds = {f: sorted(ts) for f, ts in sorted(collected.items())}
    return plan


def fbft_transform(
    plan: BinarizationPlan, X: np.ndarray, feature_names: list[str] | None = None
) -> tuple[np.ndarray, list[Predicate]]:
    """Expand raw rows into predicate columns per the fitted plan.

    Features with thresholds become one ``1{f <= t}`` column each; the rest
    pass through min-max scaled (with the fit-time bounds).
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(plan.scalers):
        raise ValueError(
            f"data has {X.shape[1] if X.ndim == 2 else '?'} columns, plan expects {len(plan.scalers)}"
        )
    names = feature_names if feature_names is not None else plan.feature_names
    cols: list[np.ndarray] = []
    predicates: list[Predicate] = []
    for f in range(X.shape[1]):
        thresholds = plan.thresholds.get(f, [])
        if thresholds:
            for t in thresholds:
                cols.append((X[:, f] <= t).astype(np.float64))
                cond = ThresholdCondition(names[f], "<=", t)
                predicates.append(Predicate(f, cond.render(), condition=cond))
        else:
            scaler = plan.scalers[f]
            cols.append(scaler.apply(X[:, f]))
            predicates.append(Predicate(f, names[f], lo=scaler.lo, hi=scaler.hi))
    matrix = np.column_stack(cols) if cols else np.empty((X.shape[0], 0))
    return matrix, predicates


class PredicateSpace:
    """Fitted raw-to-predicate transform plus the predicate metadata."""

    def __init__(self, plan: BinarizationPlan, feature_names: list[str]):
        self.plan = plan
        self.feature_names = list(feature_names)
        _, self.predicates = fbft_transform(plan, np.zeros((0, len(plan.scalers))), self.feature_names)

    @classmethod
    def fit(
        cls,
        X: np.ndarray,
        y: np.ndarray,
        feature_names: list[str],
        binarize: str = "replace",
        tree_num: int = 11,
        tree_depth: int = 6,
        feature_fraction: float = 0.65,
        thresh_round: int = 4,
        seed: int = 0,
    ) -> "PredicateSpace":
        if binarize == "replace":
            plan = fbft_fit(X, y, tree_num, tree_depth, feature_fraction, thresh_round, seed)
        else:
            X = np.asarray(X, dtype=np.float64)
            plan = BinarizationPlan(
                scalers=[MinMaxMap(float(X[:, f].min()), float(X[:, f].max())) for f in range(X.shape[1])]
            )
        plan.feature_names = list(feature_names)
        return cls(plan, feature_names)

    def transform(self, X: np.ndarray) -> np.ndarray:
        matrix, _ = fbft_transform(self.plan, X, self.feature_names)
        return matrix


def association_score(col: np.ndarray, labels: np.ndarray) -> float:
    """Feature/target association in [0, 1].

    Mutual information between the 10-quantile-binned column and the binary
    label, normalized by log 2 and capped.  Used only as a relative prior, so
    any monotone-consistent estimator could substitute.
    """
    col = np.asarray(col, dtype=np.float64)
    labels = np.asarray(labels)
    if col.size == 0:
        raise ValueError("empty column")
    edges = np.quantile(col, np.linspace(0.1, 0.9, 9))
    bins = np.searchsorted(edges, col, side="right")
    n = col.size
    mi = 0.0
    for b in np.unique(bins):
        in_b = bins == b
        p_b = in_b.mean()
        for c in (0, 1):
            p_bc = (in_b & (labels == c)).sum() / n
            p_c = (labels == c).mean()
            if p_bc > 0 and p_c > 0:
                mi += p_bc * math.log(p_bc / (p_b * p_c))
    return float(np.clip(mi / math.log(2.0), 0.0, 1.0))


def association_scores(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return np.array([association_score(X[:, f], y) for f in range(X.shape[1])])


def split_dataset(n: int, seed: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random 60/20/20 split with size caps.

    Train takes 60% of the rows capped at 10 000; the remaining rows split
    evenly into validation and test, each capped at 50 000.  Rows dropped by
    the train cap are discarded, not recycled.
    """
    if n < 10:
        raise ValueError("need at least 10 samples to split")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = n * 6 // 10
    train = perm[:n_train][:TRAIN_CAP]
    rest = perm[n_train:]
    n_val = rest.size // 2
    val = rest[:n_val][:EVAL_CAP]
    test = rest[n_val:][: EVAL_CAP]
    return train, val, test


def cv_folds(n_train: int) -> int:
    """Fold count for hyper-parameter tuning, by training-set size."""
    if n_train > 6000:
        return 1
    if n_train >= 3000:
        return 2
    if n_train >= 1000:
        return 3
    return 5
