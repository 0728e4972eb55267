"""Significance testing over per-dataset AUC tables: Friedman omnibus test,
pairwise Wilcoxon signed-rank tests, and the Holm step-down correction.

The Wilcoxon p-value is exact (full null distribution of the signed rank
sum, ties included) up to 25 nonzero differences and switches to the
tie-corrected normal approximation above.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .metrics import average_ranks

EXACT_WILCOXON_LIMIT = 25
MIN_NONZERO_PAIRS = 5


def rank_table(auc_matrix: np.ndarray) -> np.ndarray:
    """Within-row ranks, 1 = best (highest AUC), ties averaged."""
    auc_matrix = np.asarray(auc_matrix, dtype=np.float64)
    return np.vstack([average_ranks(-row) for row in auc_matrix])


def friedman_test(auc_matrix) -> tuple[float, float]:
    """Friedman chi-square statistic and p-value for a datasets-by-
    algorithms score table. Ties within a row get average ranks."""
    auc_matrix = np.asarray(auc_matrix, dtype=np.float64)
    if auc_matrix.ndim != 2 or auc_matrix.shape[0] < 2 or auc_matrix.shape[1] < 2:
        raise ValueError("need at least 2 datasets and 2 algorithms")
    n, k = auc_matrix.shape
    mean_ranks = rank_table(auc_matrix).mean(axis=0)
    statistic = 12.0 * n / (k * (k + 1)) * float(np.sum((mean_ranks - (k + 1) / 2.0) ** 2))
    p_value = float(sps.chi2.sf(statistic, k - 1))
    return statistic, p_value


def _signed_rank_statistic(differences: np.ndarray, zero_method: str) -> tuple[float, np.ndarray]:
    """Rank-sum of positive differences plus the rank multiset in play."""
    d = np.asarray(differences, dtype=np.float64)
    if zero_method == "drop":
        d = d[d != 0.0]
        ranks = average_ranks(np.abs(d))
    elif zero_method == "pratt":
        ranks = average_ranks(np.abs(d))
        keep = d != 0.0
        d, ranks = d[keep], ranks[keep]
    else:
        raise ValueError(f"unknown zero_method {zero_method!r}")
    w_plus = float(np.sum(ranks[d > 0.0]))
    return w_plus, ranks


def _exact_signed_rank_counts(ranks: np.ndarray) -> np.ndarray:
    """Null distribution of the signed rank sum by dynamic programming.

    Works on doubled ranks so tie-averaged half ranks stay integral;
    counts[s] is the number of sign assignments with doubled rank sum s.
    Equivalent to enumerating all 2^n sign vectors.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(
    x,
    y=None,
    zero_method: str = "drop",
    alternative: str = "two-sided",
) -> tuple[float, float | None]:
    """Wilcoxon signed-rank test for paired samples.

    Returns (W+, p). Zero differences are dropped by default (Pratt
    handling keeps them for ranking only). Fewer than 5 nonzero pairs
    yields p=None, flagged upstream as insufficient data.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x if y is None else x - np.asarray(y, dtype=np.float64)
    w_plus, ranks = _signed_rank_statistic(d, zero_method)
    n = ranks.size
    if n < MIN_NONZERO_PAIRS:
        return w_plus, None

    if n <= EXACT_WILCOXON_LIMIT:
        counts = _exact_signed_rank_counts(ranks)
        total = counts.sum()
        w2 = int(round(2.0 * w_plus))
        p_low = counts[: w2 + 1].sum() / total
        p_high = counts[w2:].sum() / total
        if alternative == "two-sided":
            p = min(1.0, 2.0 * min(p_low, p_high))
        elif alternative == "greater":
            p = p_high
        elif alternative == "less":
            p = p_low
        else:
            raise ValueError(f"unknown alternative {alternative!r}")
        return w_plus, float(p)

    # Normal approximation with tie-corrected variance.
    mean = n * (n + 1) / 4.0
    tie_term = 0.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / 2.0
    var = (n * (n + 1) * (2 * n + 1) - tie_term) / 24.0
    z = (w_plus - mean) / np.sqrt(var)
    if alternative == "two-sided":
        p = 2.0 * float(sps.norm.sf(abs(z)))
    elif alternative == "greater":
        p = float(sps.norm.sf(z))
    elif alternative == "less":
        p = float(sps.norm.cdf(z))
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return w_plus, min(1.0, p)


def holm_adjust(p_values) -> np.ndarray:
    """Holm step-down adjustment: smallest raw p scaled by m, the next by
    m-1, ..., with a running maximum so adjusted values never decrease."""
    p = np.asarray(p_values, dtype=np.float64)
    m = p.size
    order = np.argsort(p, kind="mergesort")
    adjusted = np.empty(m, dtype=np.float64)
    running = 0.0
    for i, idx in enumerate(order):
        running = max(running, (m - i) * p[idx])
        adjusted[idx] = min(1.0, running)
    return adjusted


@dataclass
class PairwiseResult:
    algorithm_a: str
    algorithm_b: str
    statistic: float
    p_raw: float | None
    p_holm: float | None = None
    significant: bool = False
    insufficient_data: bool = False

    def to_dict(self) -> dict:
        return {
            "algorithm_a": self.algorithm_a,
            "algorithm_b": self.algorithm_b,
            "statistic": self.statistic,
            "p_raw": self.p_raw,
            "p_holm": self.p_holm,
            "significant": self.significant,
            "insufficient_data": self.insufficient_data,
        }


@dataclass
class SignificanceReport:
    """Everything behind a critical-difference comparison, as data."""

    algorithms: list[str]
    mean_ranks: dict[str, float]
    mean_aucs: dict[str, float]
    friedman_statistic: float
    friedman_p: float
    pairs: list[PairwiseResult] = field(default_factory=list)
    alpha: float = 0.05
    n_datasets: int = 0

    def to_dict(self) -> dict:
        return {
            "algorithms": self.algorithms,
            "mean_ranks": self.mean_ranks,
            "mean_aucs": self.mean_aucs,
            "friedman_statistic": self.friedman_statistic,
            "friedman_p": self.friedman_p,
            "alpha": self.alpha,
            "n_datasets": self.n_datasets,
            "pairs": [p.to_dict() for p in self.pairs],
        }


def wilcoxon_holm(
    auc_matrix,
    algorithms: list[str],
    alpha: float = 0.05,
    zero_method: str = "drop",
    alternative: str = "two-sided",
) -> SignificanceReport:
    """Full significance stack over a datasets-by-algorithms AUC table."""
    auc_matrix = np.asarray(auc_matrix, dtype=np.float64)
    if auc_matrix.shape[1] != len(algorithms):
        raise ValueError("algorithm names do not match matrix columns")
    statistic, friedman_p = friedman_test(auc_matrix)
    mean_ranks = rank_table(auc_matrix).mean(axis=0)

    pairs: list[PairwiseResult] = []
    for i in range(len(algorithms)):
        for j in range(i + 1, len(algorithms)):
            w, p = wilcoxon_signed_rank(
                auc_matrix[:, i],
                auc_matrix[:, j],
                zero_method=zero_method,
                alternative=alternative,
            )
            pairs.append(
                PairwiseResult(
                    algorithm_a=algorithms[i],
                    algorithm_b=algorithms[j],
                    statistic=w,
                    p_raw=p,
                    insufficient_data=p is None,
                )
            )

    testable = [pair for pair in pairs if pair.p_raw is not None]
    if testable:
        adjusted = holm_adjust([pair.p_raw for pair in testable])
        for pair, adj in zip(testable, adjusted):
            pair.p_holm = float(adj)
            pair.significant = bool(adj < alpha)

    return SignificanceReport(
        algorithms=list(algorithms),
        mean_ranks={a: float(r) for a, r in zip(algorithms, mean_ranks)},
        mean_aucs={a: float(m) for a, m in zip(algorithms, auc_matrix.mean(axis=0))},
        friedman_statistic=statistic,
        friedman_p=friedman_p,
        pairs=pairs,
        alpha=alpha,
        n_datasets=auc_matrix.shape[0],
    )
