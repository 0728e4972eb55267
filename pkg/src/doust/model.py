"""Two-phase one-class training and the score ensemble built on top of it.

Phase one fits the network to output the interval midpoint on training
data; phase two refines it on the shuffled union of training and test
features, pushing test rows up and training rows down through one of the
grouped losses. Submodels that diverge are recorded as failed and skipped;
the ensemble score is the mean over the surviving members.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import losses
from .errors import ConfigurationError, EnsembleFailureError, InvalidScoreError
from .losses import LossSpec
from .nn import AdamState, MlpNetwork, init_network

ENSEMBLE_FORMAT_VERSION = 1

_PROBE_ROWS = 32


class TrainingDiverged(RuntimeError):
    """Raised when a training loop produces a non-finite loss."""


@dataclass(frozen=True)
class DoustConfig:
    """Hyperparameters of the two-phase procedure.

    `batch_size=None` resolves to 100, or 500 for the max-based
    set-distance loss, which needs a larger window for its batch maxima.
    """

    hidden: tuple[int, ...] = (100, 100, 100)
    pretrain_epochs: int = 5
    refine_epochs: int = 50
    batch_size: int | None = None
    ensemble_size: int = 100
    feature_bag_fraction: float = 1.0
    seed: int = 0
    loss: LossSpec = field(default_factory=LossSpec)
    learning_rate: float = 1e-3
    stratified_batches: bool = False

    def __post_init__(self):
        if self.pretrain_epochs < 0 or self.refine_epochs < 0:
            raise ConfigurationError("epoch counts must be non-negative")
        if self.batch_size is not None and self.batch_size < 2:
            raise ConfigurationError("batch size must be at least 2")
        if self.ensemble_size < 1:
            raise ConfigurationError("ensemble size must be at least 1")
        if not (0.0 < self.feature_bag_fraction <= 1.0):
            raise ConfigurationError("feature bag fraction must lie in (0, 1]")

    @property
    def resolved_batch_size(self) -> int:
        if self.batch_size is not None:
            return self.batch_size
        return 500 if self.loss.variant == losses.MAX_INDEPENDENT else 100

    def to_dict(self) -> dict:
        return {
            "hidden": list(self.hidden),
            "pretrain_epochs": self.pretrain_epochs,
            "refine_epochs": self.refine_epochs,
            "batch_size": self.batch_size,
            "ensemble_size": self.ensemble_size,
            "feature_bag_fraction": self.feature_bag_fraction,
            "seed": self.seed,
            "loss": {"variant": self.loss.variant, "weight": self.loss.weight},
            "learning_rate": self.learning_rate,
            "stratified_batches": self.stratified_batches,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DoustConfig":
        payload = dict(payload)
        loss = payload.pop("loss", None)
        if loss is not None:
            payload["loss"] = LossSpec(**loss)
        if "hidden" in payload:
            payload["hidden"] = tuple(payload["hidden"])
        return cls(**payload)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SplitSpec:
    """Parameters of the one-class train/test split.

    `nu` is the target test-set anomaly fraction; `gamma` is an assumed
    training contamination used only when reporting optima, never during
    training. `train_ratio` is the share of normal samples assigned to the
    training set.
    """

    nu: float = 0.5
    gamma: float = 0.0
    train_ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.nu < 1.0):
            raise ConfigurationError(f"nu must lie in (0, 1), got {self.nu}")
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigurationError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not (0.0 < self.train_ratio < 1.0):
            raise ConfigurationError("train ratio must lie in (0, 1)")


@dataclass
class Normalizer:
    """Per-feature z-scoring with statistics taken from training data only.

    Zero-variance features map to exactly 0 regardless of input.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Normalizer":
        features = np.asarray(features, dtype=np.float64)
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        scale = np.where(std > 0, 1.0 / np.where(std > 0, std, 1.0), 0.0)
        return cls(mean=mean, scale=scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        return (features - self.mean) * self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "Normalizer":
        return cls(
            mean=np.asarray(payload["mean"], dtype=np.float64),
            scale=np.asarray(payload["scale"], dtype=np.float64),
        )


def feature_bag_mask(input_dim: int, fraction: float, seed) -> np.ndarray:
    """Sorted subset of ceil(fraction * input_dim) distinct feature indices,
    drawn uniformly without replacement. fraction=1 keeps every feature."""
    if not (0.0 < fraction <= 1.0):
        raise ConfigurationError("feature bag fraction must lie in (0, 1]")
    if fraction == 1.0:
        return np.arange(input_dim)
    rng = np.random.default_rng(seed)
    count = math.ceil(fraction * input_dim)
    return np.sort(rng.choice(input_dim, size=count, replace=False))


def _iter_batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def pretrain(
    net: MlpNetwork,
    train_features: np.ndarray,
    config: DoustConfig,
    rng: np.random.Generator | None = None,
) -> MlpNetwork:
    """First phase: pull every training score toward the interval midpoint
    by minimizing the mean squared distance to 1/2.

    Zero configured epochs leave the weights untouched. A non-finite batch
    loss aborts with TrainingDiverged (callers building ensembles turn this
    into a failed-submodel record).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    features = np.asarray(train_features, dtype=np.float64)
    state = AdamState.for_network(net, learning_rate=config.learning_rate)
    batch = config.resolved_batch_size
    # divergence shows up as transient non-finite values; it is caught and
    # reported as a failed submodel, so the numpy warnings are just noise
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.pretrain_epochs):
            for idx in _iter_batches(len(features), batch, rng):
                scores, cache = net.forward_cached(features[idx])
                value = float(np.mean((scores - 0.5) ** 2))
                if not np.isfinite(value):
                    raise TrainingDiverged("non-finite pretraining loss")
                grad = 2.0 * (scores - 0.5) / scores.size
                state.step(net, net.backward(cache, grad))
    return net


def refine(
    net: MlpNetwork,
    train_features: np.ndarray,
    test_features: np.ndarray,
    config: DoustConfig,
    rng: np.random.Generator | None = None,
) -> MlpNetwork:
    """Second phase: epochs over the shuffled union of both sets.

    Rows keep a train/test tag; each batch groups its rows by tag and
    applies the configured loss at batch granularity, with an absent group
    dropping its term. With `stratified_batches` the union shuffle is
    replaced by half-train half-test batches.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    train = np.asarray(train_features, dtype=np.float64)
    test = np.asarray(test_features, dtype=np.float64)
    if train.shape[1] != test.shape[1]:
        raise ConfigurationError("train and test feature widths differ")
    union = np.vstack([train, test])
    is_test = np.zeros(len(union), dtype=bool)
    is_test[len(train) :] = True

    state = AdamState.for_network(net, learning_rate=config.learning_rate)
    batch = config.resolved_batch_size
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.refine_epochs):
            if config.stratified_batches:
                batches = _stratified_batches(len(train), len(test), batch, rng)
            else:
                batches = _iter_batches(len(union), batch, rng)
            for idx in batches:
                rows = union[idx]
                tags = is_test[idx]
                scores, cache = net.forward_cached(rows)
                try:
                    value, g_tr, g_te = losses.loss_and_score_grads(
                        config.loss, scores[~tags], scores[tags]
                    )
                except InvalidScoreError as exc:
                    raise TrainingDiverged(str(exc)) from exc
                if not np.isfinite(value):
                    raise TrainingDiverged("non-finite refinement loss")
                grad = np.empty_like(scores)
                grad[~tags] = g_tr
                grad[tags] = g_te
                state.step(net, net.backward(cache, grad))
    return net


def _stratified_batches(n_train: int, n_test: int, batch: int, rng: np.random.Generator):
    half = batch // 2
    train_order = rng.permutation(n_train)
    test_order = n_train + rng.permutation(n_test)
    n_batches = max(math.ceil(n_train / half), math.ceil(n_test / half))
    for b in range(n_batches):
        tr = train_order[b * half : (b + 1) * half]
        te = test_order[b * half : (b + 1) * half]
        if tr.size or te.size:
            yield np.concatenate([tr, te])


STATUS_OK = "ok"
STATUS_FAILED = "failed"


@dataclass
class SubmodelResult:
    """One trained ensemble member plus its bookkeeping."""

    network: MlpNetwork | None
    status: str
    seed: int
    feature_mask: np.ndarray | None = None
    reason: str | None = None
    pretrain_improved: bool | None = None

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


def _train_submodel(
    train: np.ndarray, test: np.ndarray, config: DoustConfig, seed: int
) -> SubmodelResult:
    rng = np.random.default_rng(seed)
    mask = None
    sub_train, sub_test = train, test
    if config.feature_bag_fraction < 1.0:
        mask = feature_bag_mask(train.shape[1], config.feature_bag_fraction, rng)
        sub_train = train[:, mask]
        sub_test = test[:, mask]
    net = init_network(sub_train.shape[1], config.hidden, seed=rng)
    improved = None
    try:
        before = float(np.mean((net.forward(sub_train) - 0.5) ** 2))
        pretrain(net, sub_train, config, rng)
        after = float(np.mean((net.forward(sub_train) - 0.5) ** 2))
        improved = after < before if config.pretrain_epochs > 0 else None
        refine(net, sub_train, sub_test, config, rng)
    except (TrainingDiverged, FloatingPointError) as exc:
        return SubmodelResult(None, STATUS_FAILED, seed, mask, reason=str(exc))
    if not net.all_finite():
        return SubmodelResult(None, STATUS_FAILED, seed, mask, reason="non-finite weights")
    probe = np.vstack([sub_train[:_PROBE_ROWS], sub_test[:_PROBE_ROWS]])
    if not np.all(np.isfinite(net.forward(probe))):
        return SubmodelResult(None, STATUS_FAILED, seed, mask, reason="non-finite probe scores")
    return SubmodelResult(net, STATUS_OK, seed, mask, pretrain_improved=improved)


class EnsembleModel:
    """Mean-score ensemble over the submodels that trained successfully.

    Scoring is deterministic and permutation-invariant: the mean runs over
    ok submodels in index order, and failed members contribute nothing.
    """

    def __init__(
        self,
        submodels: list[SubmodelResult],
        normalizer: Normalizer,
        config: DoustConfig,
    ):
        if not any(s.ok for s in submodels):
            raise EnsembleFailureError("no submodel trained successfully")
        self.submodels = submodels
        self.normalizer = normalizer
        self.config = config

    @property
    def n_ok(self) -> int:
        return sum(1 for s in self.submodels if s.ok)

    @property
    def failure_log(self) -> list[dict]:
        return [
            {"seed": s.seed, "reason": s.reason}
            for s in self.submodels
            if not s.ok
        ]

    def score(self, features: np.ndarray) -> np.ndarray:
        """Anomaly scores in (0, 1); higher means more anomalous."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.normalizer.mean.shape[0]:
            raise ConfigurationError(
                f"expected (n, {self.normalizer.mean.shape[0]}) features, "
                f"got {features.shape}"
            )
        normalized = self.normalizer.transform(features)
        total = np.zeros(len(features))
        count = 0
        for sub in self.submodels:
            if not sub.ok:
                continue
            rows = normalized if sub.feature_mask is None else normalized[:, sub.feature_mask]
            total += sub.network.forward(rows)
            count += 1
        return total / count

    def to_dict(self) -> dict:
        return {
            "format_version": ENSEMBLE_FORMAT_VERSION,
            "config": self.config.to_dict(),
            "normalizer": self.normalizer.to_dict(),
            "submodels": [
                {
                    "status": s.status,
                    "seed": s.seed,
                    "feature_mask": None if s.feature_mask is None else s.feature_mask.tolist(),
                    "reason": s.reason,
                    "pretrain_improved": s.pretrain_improved,
                    "network": None if s.network is None else s.network.to_dict(),
                }
                for s in self.submodels
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "EnsembleModel":
        version = payload.get("format_version")
        if version != ENSEMBLE_FORMAT_VERSION:
            raise ConfigurationError(f"unsupported ensemble format version: {version!r}")
        submodels = [
            SubmodelResult(
                network=None if s["network"] is None else MlpNetwork.from_dict(s["network"]),
                status=s["status"],
                seed=s["seed"],
                feature_mask=None
                if s["feature_mask"] is None
                else np.asarray(s["feature_mask"], dtype=np.intp),
                reason=s.get("reason"),
                pretrain_improved=s.get("pretrain_improved"),
            )
            for s in payload["submodels"]
        ]
        return cls(
            submodels,
            Normalizer.from_dict(payload["normalizer"]),
            DoustConfig.from_dict(payload["config"]),
        )


def train_ensemble(
    train_features: np.ndarray, test_features: np.ndarray, config: DoustConfig
) -> EnsembleModel:
    """Train `config.ensemble_size` submodels with seeds base+i.

    Features are z-scored with training statistics before any phase; failed
    submodels are kept in the result with their reason and excluded from
    scoring. Raises EnsembleFailureError only when every member failed.
    """
    train_features = np.asarray(train_features, dtype=np.float64)
    test_features = np.asarray(test_features, dtype=np.float64)
    normalizer = Normalizer.fit(train_features)
    train = normalizer.transform(train_features)
    test = normalizer.transform(test_features)
    submodels = [
        _train_submodel(train, test, config, config.seed + i)
        for i in range(config.ensemble_size)
    ]
    return EnsembleModel(submodels, normalizer, config)


def single_submodel_config(config: DoustConfig) -> DoustConfig:
    """Copy of a config reduced to one submodel (used by the simulation
    experiments, which skip the ensemble averaging)."""
    return replace(config, ensemble_size=1)
