"""Synthetic generators and simulators: the one-sided-threshold thought
experiment, its binomial detectability margin, the ten-dimensional Gaussian
study, and the outlier-downsampling protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as sps

from .data import Dataset
from .errors import EnsembleFailureError
from .metrics import roc_auc
from .model import DoustConfig, train_ensemble
from .parallel import parallel_map

RIGHT = "right"
LEFT = "left"


@dataclass(frozen=True)
class ThoughtConfig:
    """One-dimensional detector-choice experiment.

    `tail_fraction` is the per-side normal tail mass beyond the symmetric
    thresholds; outliers sit `outlier_offset` beyond the right threshold
    with spread `outlier_sigma`.
    """

    n_normal: int
    n_outliers: int
    tail_fraction: float
    outlier_offset: float = 2.0
    outlier_sigma: float = 0.25
    symmetric_outliers: bool = False
    seed: int = 0
    repetitions: int = 1

    def __post_init__(self):
        if self.n_outliers < 1:
            raise ValueError("need at least one outlier")
        if not (0.0 < self.tail_fraction < 0.5):
            raise ValueError("tail fraction must lie in (0, 0.5)")

    @property
    def threshold(self) -> float:
        """Symmetric threshold with `tail_fraction` normal mass per side."""
        return float(sps.norm.ppf(1.0 - self.tail_fraction))


@dataclass
class ThoughtTrialResult:
    chosen_side: str
    auc_one_sided: float
    auc_two_sided: float
    mistakes_one_sided: int
    mistakes_two_sided: int


def thought_trial(cfg: ThoughtConfig, rng: np.random.Generator | None = None) -> ThoughtTrialResult:
    """One draw of the thought experiment.

    Normals are standard normal; outliers cluster beyond the right
    threshold. The detector picks whichever threshold excludes more points
    (ties by coin flip), scores one-sidedly along the chosen direction, and
    is compared with a both-sides |x| scorer. Mistake counts are the
    threshold classification errors of each detector.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    t = cfg.threshold
    normals = rng.standard_normal(cfg.n_normal)
    outliers = t + cfg.outlier_offset + cfg.outlier_sigma * rng.standard_normal(cfg.n_outliers)
    if cfg.symmetric_outliers:
        # half the outliers mirrored into the left tail
        flip = rng.random(cfg.n_outliers) < 0.5
        outliers = np.where(flip, -outliers, outliers)
    x = np.concatenate([normals, outliers])

    beyond_right = int(np.sum(x > t))
    beyond_left = int(np.sum(x < -t))
    if beyond_right > beyond_left:
        side = RIGHT
    elif beyond_left > beyond_right:
        side = LEFT
    else:
        side = RIGHT if rng.random() < 0.5 else LEFT

    direction = 1.0 if side == RIGHT else -1.0
    one_sided = direction * x
    two_sided = np.abs(x)
    auc_one = roc_auc(one_sided[: cfg.n_normal], one_sided[cfg.n_normal :])
    auc_two = roc_auc(two_sided[: cfg.n_normal], two_sided[cfg.n_normal :])

    flagged_one = one_sided > t
    flagged_two = two_sided > t
    labels = np.zeros(x.size, dtype=bool)
    labels[cfg.n_normal :] = True
    mistakes_one = int(np.sum(flagged_one != labels))
    mistakes_two = int(np.sum(flagged_two != labels))
    return ThoughtTrialResult(side, auc_one, auc_two, mistakes_one, mistakes_two)


def run_thought_experiment(cfg: ThoughtConfig) -> list[ThoughtTrialResult]:
    """cfg.repetitions independent trials with a per-repetition seed
    schedule derived from cfg.seed."""
    return [
        thought_trial(cfg, np.random.default_rng([cfg.seed, rep]))
        for rep in range(cfg.repetitions)
    ]


@dataclass(frozen=True)
class ConditionReport:
    """Binomial detectability margin O / sqrt(N f (1-f)) plus the
    rule-of-thumb sample requirement 1/nu^2."""

    margin: float
    nu: float
    rule_of_thumb_n: float

    @property
    def detection_regime(self) -> bool:
        return self.margin > 1.0


def condition_margin(n_normal: int, n_outliers: int, tail_fraction: float) -> ConditionReport:
    if n_normal <= 0 or tail_fraction <= 0.0 or tail_fraction >= 1.0:
        raise ValueError("need n_normal > 0 and tail fraction in (0, 1)")
    if n_outliers < 0:
        raise ValueError("outlier count cannot be negative")
    margin = n_outliers / math.sqrt(n_normal * tail_fraction * (1.0 - tail_fraction))
    nu = n_outliers / (n_normal + n_outliers) if n_outliers else 0.0
    rule = math.inf if nu == 0.0 else 1.0 / nu**2
    return ConditionReport(margin=margin, nu=nu, rule_of_thumb_n=rule)


# --------------------------------------------------------------------------
# Gaussian study
# --------------------------------------------------------------------------

DOUST_METHOD = "doust"
SUPERVISED_ORACLE = "supervised_oracle"
BAYES_ORACLE = "bayes_oracle"
GAUSSIAN_METHODS = (DOUST_METHOD, SUPERVISED_ORACLE, BAYES_ORACLE)


@dataclass(frozen=True)
class GaussianSpec:
    """Simulated-data study: isotropic Gaussians in `dims` dimensions with
    the abnormal cloud shifted by one unit per coordinate."""

    dims: int = 10
    normal_mean: float = 0.0
    abnormal_mean: float = 1.0
    sigma: float = 1.0
    nu: float = 0.01
    train_size: int = 1000
    repetitions: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError("dims must be at least 1")
        if not (0.0 < self.nu < 1.0):
            raise ValueError("nu must lie in (0, 1)")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def n_test_outliers(self) -> int:
        return max(1, round(self.nu * self.train_size))

    @property
    def n_test_normals(self) -> int:
        return self.train_size - self.n_test_outliers


def sample_gaussian_split(spec: GaussianSpec, rng: np.random.Generator):
    """Training normals plus a mixed test set of the same total size."""
    train = spec.normal_mean + spec.sigma * rng.standard_normal((spec.train_size, spec.dims))
    test_norm = spec.normal_mean + spec.sigma * rng.standard_normal(
        (spec.n_test_normals, spec.dims)
    )
    test_abn = spec.abnormal_mean + spec.sigma * rng.standard_normal(
        (spec.n_test_outliers, spec.dims)
    )
    test = np.vstack([test_norm, test_abn])
    labels = np.zeros(len(test), dtype=np.int8)
    labels[len(test_norm) :] = 1
    return train, test, labels


def bayes_oracle_scores(spec: GaussianSpec, features: np.ndarray) -> np.ndarray:
    """Optimal linear discriminant for the equal-covariance pair: the sum
    of coordinates up to scale."""
    shift = (spec.abnormal_mean - spec.normal_mean) / spec.sigma**2
    return np.asarray(features, dtype=np.float64).sum(axis=1) * shift


def bayes_oracle_auc(spec: GaussianSpec) -> float:
    """Closed-form AUC of the optimal discriminant:
    Phi(||mu_a - mu_n|| / (sigma * sqrt(2)))."""
    distance = abs(spec.abnormal_mean - spec.normal_mean) * math.sqrt(spec.dims)
    return float(sps.norm.cdf(distance / (spec.sigma * math.sqrt(2.0))))


@dataclass
class GaussianResult:
    method: str
    mean_auc: float
    stderr: float
    aucs: list[float]
    n_failed: int = 0


SIMULATION_LEARNING_RATE = 3e-5


def _default_gaussian_config() -> DoustConfig:
    """Single-submodel profile for the simulated study.

    Repetitions play the ensemble's averaging role, so one submodel per
    dataset. The step size is far below the library default: at the study's
    contamination of 1% the refinement gradient signal is tiny, and the
    constant-step-size noise floor of the default otherwise swamps it at
    every training-set size (tripling the epoch count at the default step
    size moves nothing, while shrinking the step recovers the growth
    toward the supervised limit).
    """
    return DoustConfig(ensemble_size=1, learning_rate=SIMULATION_LEARNING_RATE)


def _gaussian_rep(args) -> float | None:
    spec, method, config, rep = args
    rng = np.random.default_rng([spec.seed, rep])
    train, test, labels = sample_gaussian_split(spec, rng)
    if method == BAYES_ORACLE:
        scores = bayes_oracle_scores(spec, test)
    elif method == SUPERVISED_ORACLE:
        from .baselines import CvFolds, rf_fit_predict_cv

        folds = CvFolds.stratified(labels, n_folds=5, seed=spec.seed + rep)
        scores = rf_fit_predict_cv(test, labels, folds, seed=spec.seed + rep)
    elif method == DOUST_METHOD:
        cfg = replace(config, seed=config.seed + 7919 * rep)
        try:
            model = train_ensemble(train, test, cfg)
        except EnsembleFailureError:
            return None
        scores = model.score(test)
    else:
        raise ValueError(f"unknown method {method!r}")
    return roc_auc(scores[labels == 0], scores[labels == 1])


def gaussian_experiment(
    spec: GaussianSpec,
    method: str = DOUST_METHOD,
    config: DoustConfig | None = None,
    workers: int | None = None,
    average_predictions: bool = False,
) -> GaussianResult:
    """Mean AUC (plus standard error) over independently sampled datasets.

    The default aggregates at the metric level; `average_predictions`
    instead trains all repetitions as submodels on a single dataset and
    scores their ensemble mean, the other reading of the protocol.
    """
    if method not in GAUSSIAN_METHODS:
        raise ValueError(f"method must be one of {GAUSSIAN_METHODS}")
    config = config or _default_gaussian_config()

    if average_predictions and method == DOUST_METHOD:
        rng = np.random.default_rng([spec.seed, 0])
        train, test, labels = sample_gaussian_split(spec, rng)
        cfg = replace(config, ensemble_size=spec.repetitions)
        model = train_ensemble(train, test, cfg)
        scores = model.score(test)
        auc = roc_auc(scores[labels == 0], scores[labels == 1])
        failed = sum(1 for s in model.submodels if not s.ok)
        return GaussianResult(method, auc, 0.0, [auc], n_failed=failed)

    jobs = [(spec, method, config, rep) for rep in range(spec.repetitions)]
    results = parallel_map(_gaussian_rep, jobs, workers)
    aucs = [r for r in results if r is not None]
    n_failed = sum(1 for r in results if r is None)
    if not aucs:
        raise EnsembleFailureError("every repetition failed")
    arr = np.asarray(aucs)
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return GaussianResult(method, float(arr.mean()), stderr, aucs, n_failed=n_failed)


# --------------------------------------------------------------------------
# nu downsampling
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DownsampleSpec:
    """Remove test-set outliers until the anomaly fraction hits a target."""

    target_nu: float
    seed: int = 0
    min_outliers: int = 200

    def __post_init__(self):
        if not (0.0 < self.target_nu < 1.0):
            raise ValueError("target nu must lie in (0, 1)")


@dataclass
class DownsampleResult:
    dataset: Dataset
    achieved_nu: float
    n_outliers_kept: int
    below_minimum: bool
    warning: str | None = None


def nu_downsample(dataset: Dataset, spec: DownsampleSpec) -> DownsampleResult:
    """Uniformly drop outliers (never normals) until the achieved fraction
    is at most the target and as close as integer counts allow.

    Already-low fractions leave the set unchanged with a warning; results
    below `min_outliers` carry an exclusion flag for sweep protocols.
    """
    n_norm = dataset.n_normal
    n_out = dataset.n_outliers
    keep = int(math.floor(spec.target_nu * n_norm / (1.0 - spec.target_nu)))

    if keep >= n_out:
        achieved = dataset.nu
        warning = None
        if achieved < spec.target_nu:
            warning = (
                f"nu already {achieved:.6g} < target {spec.target_nu:.6g}; "
                "returning dataset unchanged"
            )
        return DownsampleResult(
            dataset, achieved, n_out, below_minimum=n_out < spec.min_outliers, warning=warning
        )

    rng = np.random.default_rng(spec.seed)
    outlier_idx = np.nonzero(dataset.labels == 1)[0]
    kept_outliers = rng.choice(outlier_idx, size=keep, replace=False)
    keep_mask = dataset.labels == 0
    keep_mask[kept_outliers] = True
    reduced = dataset.subset(np.nonzero(keep_mask)[0])
    achieved = reduced.nu
    return DownsampleResult(
        reduced,
        achieved,
        keep,
        below_minimum=keep < spec.min_outliers,
    )
