"""Evaluation metrics: ROC AUC, explanation size, single-deletion correctness.

AUC uses the rank (Mann-Whitney) formulation with midranks for ties, which
matches the O(n^2) pairwise count exactly.  Micro averaging degenerates to
plain binary AUC for a single channel; the contract is kept for future
multi-channel outputs.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


def midranks(a: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    a = np.asarray(a)
    order = np.argsort(a, kind="mergesort")
    ranks = np.empty(a.size, dtype=np.float64)
    sorted_vals = a[order]
    i = 0
    while i < a.size:
        j = i
        while j + 1 < a.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability a random positive outranks a random negative; ties count 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC AUC needs both classes present")
    r = midranks(scores)
    return float((r[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da, db = a - a.mean(), b - b.mean()
    va, vb = float(da @ da), float(db @ db)
    if va == 0.0 or vb == 0.0:
        raise ValueError("correlation undefined for a constant vector")
    return float(da @ db / np.sqrt(va * vb))


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    return pearson(midranks(np.asarray(a)), midranks(np.asarray(b)))


def explanation_size(explain_fn: Callable[[int], int], n_rows: int, k: int, seed: int) -> float:
    """Mean rule count of sample explanations over k seeded random test rows.

    ``explain_fn(row_index)`` must return the rule count for that row.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    take = min(k, n_rows)
    picks = rng.choice(n_rows, size=take, replace=n_rows < k)
    return float(np.mean([explain_fn(int(i)) for i in picks]))


def single_deletion(
    predict_fn: Callable[[np.ndarray], np.ndarray],
    importance: np.ndarray,
    X_raw: np.ndarray,
    y: np.ndarray,
    seed: int,
) -> tuple[float, float]:
    """Correlate importance with the AUC drop under per-feature permutation.

    Each raw column is shuffled (seeded) in turn and the test AUC recomputed;
    the deltas base - perturbed are compared against the importance vector
    with Spearman and Pearson correlation.
    """
    X_raw = np.asarray(X_raw, dtype=np.float64)
    importance = np.asarray(importance, dtype=np.float64)
    if importance.size != X_raw.shape[1]:
        raise ValueError("importance length must equal the raw feature count")
    base = roc_auc(predict_fn(X_raw), y)
    rng = np.random.default_rng(seed)
    deltas = np.empty(X_raw.shape[1])
    for f in range(X_raw.shape[1]):
        perturbed = X_raw.copy()
        perturbed[:, f] = perturbed[rng.permutation(X_raw.shape[0]), f]
        deltas[f] = base - roc_auc(predict_fn(perturbed), y)
    return spearman(importance, deltas), pearson(importance, deltas)


@dataclass
class EvalReport:
    auc: float
    explanation_size: float
    sd_spearman: float
    sd_pearson: float
    parameter_count: int
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def parameter_count_thousands(self) -> float:
        return self.parameter_count / 1000.0

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "explanation_size": self.explanation_size,
            "sd_spearman": self.sd_spearman,
            "sd_pearson": self.sd_pearson,
            "parameter_count": self.parameter_count,
            "parameter_count_thousands": self.parameter_count_thousands,
            "timings": self.timings,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [
            f"test AUC:            {self.auc:.6f}",
            f"explanation size:    {self.explanation_size:.2f} rules",
            f"SD Spearman:         {self.sd_spearman:.4f}",
            f"SD Pearson:          {self.sd_pearson:.4f}",
            f"parameters (1000s):  {self.parameter_count_thousands:.3f}",
        ]
        for phase, secs in self.timings.items():
            lines.append(f"time[{phase}]:         {secs:.3f}s")
        return "\n".join(lines)


class PhaseTimer:
    """Context-manager stopwatch collecting per-phase wall times."""

    def __init__(self) -> None:
        self.timings: dict[str, float] = {}
        self._label: str | None = None
        self._start = 0.0

    def phase(self, label: str) -> "PhaseTimer":
        self._label = label
        return self

    def __enter__(self) -> "PhaseTimer":
        self._start = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        assert self._label is not None
        self.timings[self._label] = time.perf_counter() - self._start
        self._label = None
