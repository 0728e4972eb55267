"""Refinement loss variants and their population optima.

Every loss takes two score groups in (0, 1): the training rows (wanted low)
and the test rows (wanted high). The balanced variant normalizes each group
by its own size so the train/test size ratio does not tilt the objective;
a weight applied to the test term shifts the optimum, which is available in
closed form together with its contaminated-training generalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidScoreError

BALANCED_MSE = "balanced_mse"
RAW_MSE = "raw_mse"
MSE_PLUS_MAE = "mse_plus_mae"
UNMOVING_NORMAL = "unmoving_normal"
MEANMAX = "meanmax"
MAX_INDEPENDENT = "max_independent"

LOSS_VARIANTS = (
    BALANCED_MSE,
    RAW_MSE,
    MSE_PLUS_MAE,
    UNMOVING_NORMAL,
    MEANMAX,
    MAX_INDEPENDENT,
)


@dataclass(frozen=True)
class LossSpec:
    """Choice of refinement loss and the weight on its test-group term.

    The weight is ignored by `max_independent`, whose definition carries no
    weighting.
    """

    variant: str = BALANCED_MSE
    weight: float = 1.0

    def __post_init__(self):
        if self.variant not in LOSS_VARIANTS:
            raise ValueError(f"unknown loss variant {self.variant!r}")
        if not (self.weight > 0):
            raise ValueError(f"loss weight must be positive, got {self.weight}")


def _as_group(scores, name: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).ravel()
    if arr.size and not np.all(np.isfinite(arr)):
        raise InvalidScoreError(f"non-finite scores in {name} group")
    return arr


def loss_value(spec: LossSpec, train_scores, test_scores) -> float:
    """Scalar loss for one batch of grouped scores; an empty group simply
    drops its term."""
    return loss_and_score_grads(spec, train_scores, test_scores)[0]


def loss_and_score_grads(spec: LossSpec, train_scores, test_scores):
    """Loss plus dLoss/dscore for each group (empty group -> empty grad).

    Gradients are per batch exactly as the value is: group means where the
    variant averages, raw sums where it does not, and one-hot subgradients
    at the group maxima for the max-based variants.
    """
    tr = _as_group(train_scores, "train")
    te = _as_group(test_scores, "test")
    w = spec.weight
    value = 0.0
    g_tr = np.zeros_like(tr)
    g_te = np.zeros_like(te)

    if spec.variant == BALANCED_MSE:
        if tr.size:
            value += float(np.mean(tr**2))
            g_tr = 2.0 * tr / tr.size
        if te.size:
            value += w * float(np.mean((1.0 - te) ** 2))
            g_te = -2.0 * w * (1.0 - te) / te.size
    elif spec.variant == RAW_MSE:
        if tr.size:
            value += float(np.sum(tr**2))
            g_tr = 2.0 * tr
        if te.size:
            value += w * float(np.sum((1.0 - te) ** 2))
            g_te = -2.0 * w * (1.0 - te)
    elif spec.variant == MSE_PLUS_MAE:
        if tr.size:
            value += float(np.mean(tr + tr**2))
            g_tr = (1.0 + 2.0 * tr) / tr.size
        if te.size:
            value += w * float(np.mean((1.0 - te) + (1.0 - te) ** 2))
            g_te = -w * (1.0 + 2.0 * (1.0 - te)) / te.size
    elif spec.variant == UNMOVING_NORMAL:
        if tr.size:
            value += float(np.mean(np.abs(tr - 0.5)))
            g_tr = np.sign(tr - 0.5) / tr.size
        if te.size:
            value += w * float(np.mean(1.0 - te))
            g_te = np.full_like(te, -w / te.size)
    elif spec.variant == MEANMAX:
        if tr.size:
            value += float(np.max(tr))
            g_tr[np.argmax(tr)] = 1.0
        if te.size:
            value += w * float(np.mean(1.0 - te))
            g_te = np.full_like(te, -w / te.size)
    elif spec.variant == MAX_INDEPENDENT:
        # Set distance max(train) - max(test); minimizing drives the top
        # test score above the top train score. No weight term.
        if tr.size:
            value += float(np.max(tr))
            g_tr[np.argmax(tr)] = 1.0
        if te.size:
            value -= float(np.max(te))
            g_te[np.argmax(te)] = -1.0
    else:  # pragma: no cover - guarded by LossSpec validation
        raise ValueError(spec.variant)

    return value, g_tr, g_te


class PopulationOptimum(NamedTuple):
    normal_score: float
    abnormal_score: float
    delta: float


def population_optimum(nu: float, weight: float = 1.0, gamma: float = 0.0) -> PopulationOptimum:
    """Optimal score levels of the balanced loss in the infinite-sample limit.

    `nu` is the test-set anomaly fraction, `weight` the test-term weight,
    and `gamma` the (assumed) anomaly fraction contaminating the training
    set. With a clean training set the abnormal optimum is exactly 1 and
    the normal optimum (1-nu)/(1 + 1/weight - nu); contamination pulls the
    abnormal level below 1 and shrinks the gap.
    """
    if not (0.0 < nu < 1.0):
        raise ValueError(f"nu must lie in (0, 1), got {nu}")
    if not (weight > 0):
        raise ValueError(f"weight must be positive, got {weight}")
    if not (0.0 <= gamma < nu):
        raise ValueError(f"gamma must lie in [0, nu), got {gamma}")
    w = float(weight)
    normal = w * (1.0 - nu) / (1.0 + w * (1.0 - nu) - gamma)
    if gamma == 0.0:
        abnormal = 1.0
    else:
        abnormal = nu * w / (gamma + nu * w)
    delta = (nu - gamma) * w / ((1.0 + w - gamma - w * nu) * (w * nu + gamma))
    return PopulationOptimum(normal, abnormal, delta)


def optimal_weight(nu: float, gamma: float) -> float:
    """Weight maximizing the separation of `population_optimum` for a
    contaminated training set: sqrt(gamma(1-gamma) / (nu(1-nu)))."""
    if not (0.0 < gamma < nu < 1.0):
        raise ValueError("requires 0 < gamma < nu < 1")
    return math.sqrt(gamma * (1.0 - gamma) / (nu * (1.0 - nu)))
