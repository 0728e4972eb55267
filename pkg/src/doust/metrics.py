"""Rank-based ROC-AUC, its exact set identities, and the label-free
train/test relation used for model selection.

roc_auc(A, B) is the probability that a random element of B outscores a
random element of A, with ties counted one half. Computed through average
ranks it equals the full pair count exactly, which makes the mixture and
worst-case identities hold to floating-point accuracy rather than
approximately.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidScoreError


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their ranks."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    order = np.argsort(values, kind="mergesort")
    inverse = np.empty(n, dtype=np.intp)
    inverse[order] = np.arange(n)
    sorted_vals = values[order]
    run_start = np.r_[True, sorted_vals[1:] != sorted_vals[:-1]]
    run_id = np.cumsum(run_start) - 1
    counts = np.bincount(run_id)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    mean_rank = starts + (counts - 1) / 2.0 + 1.0
    return mean_rank[run_id][inverse]


def _validate(scores, name: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} score set is empty")
    if np.any(np.isnan(arr)):
        raise InvalidScoreError(f"NaN scores in {name} set")
    return arr


def roc_auc(set_a, set_b) -> float:
    """Mann-Whitney AUC: P(b > a) + P(b == a)/2 for random a in A, b in B."""
    a = _validate(set_a, "first")
    b = _validate(set_b, "second")
    ranks = average_ranks(np.concatenate([a, b]))
    rank_sum_b = float(np.sum(ranks[a.size :]))
    u = rank_sum_b - b.size * (b.size + 1) / 2.0
    return u / (a.size * b.size)


def roc_mixture_decomposition_check(set_a, set_b, set_c) -> float:
    """Residual of roc(A, B+C) against the size-weighted mixture of
    roc(A, B) and roc(A, C); exact up to float rounding."""
    a = _validate(set_a, "A")
    b = _validate(set_b, "B")
    c = _validate(set_c, "C")
    lhs = roc_auc(a, np.concatenate([b, c]))
    rhs = (b.size * roc_auc(a, b) + c.size * roc_auc(a, c)) / (b.size + c.size)
    return abs(lhs - rhs)


def worst_case_addition_check(set_a, set_b) -> tuple[float, float]:
    """Residuals of the two worst-case-sample scalings.

    Appending a sample above every element of B to A scales the AUC by
    |A|/(|A|+1); appending a sample below every element of A to B scales it
    by |B|/(|B|+1). Both hold exactly for the rank estimator.
    """
    a = _validate(set_a, "A")
    b = _validate(set_b, "B")
    base = roc_auc(a, b)
    w_a = np.max(b) + 1.0
    w_b = np.min(a) - 1.0
    res_a = abs(roc_auc(np.append(a, w_a), b) - a.size / (a.size + 1) * base)
    res_b = abs(roc_auc(a, np.append(b, w_b)) - b.size / (b.size + 1) * base)
    return res_a, res_b


def traintest_to_normalabnormal(roc_tt: float, nu: float, baseline: float = 0.5) -> float:
    """Invert the linear train/test-to-normal/abnormal AUC relation.

    roc(train, test) = (1-nu) * baseline + nu * roc(train, abnormal), so
    the abnormal-side AUC is (roc_tt - (1-nu) * baseline) / nu. The default
    baseline 1/2 is the infinite-sample value of roc(train, test-normals);
    passing the measured value instead makes the inversion exact at finite
    sample sizes. Results outside [0, 1] are clamped with a warning.
    """
    if not (0.0 < nu <= 1.0):
        raise ValueError(f"nu must lie in (0, 1], got {nu}")
    value = (roc_tt - (1.0 - nu) * baseline) / nu
    if value < 0.0 or value > 1.0:
        warnings.warn(
            f"inverted AUC {value:.6g} outside [0, 1]; clamping "
            "(train/test sampling noise dominates at this nu)",
            stacklevel=2,
        )
        value = min(1.0, max(0.0, value))
    return value


@dataclass
class ScoredSet:
    """Paired score and binary label vectors (1 marks an anomaly)."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).ravel()
        self.labels = np.asarray(self.labels).ravel().astype(np.int8)
        if self.scores.size != self.labels.size:
            raise ValueError("scores and labels differ in length")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise ValueError("labels must be binary 0/1")

    @property
    def normal_scores(self) -> np.ndarray:
        return self.scores[self.labels == 0]

    @property
    def abnormal_scores(self) -> np.ndarray:
        return self.scores[self.labels == 1]

    def auc(self) -> float:
        """AUC of anomalies over normals within this set."""
        return roc_auc(self.normal_scores, self.abnormal_scores)
