"""Comparison algorithms: 1-NN distance scoring, an isolation forest, and
a cross-validated random forest used as a supervised upper bound.

All three are deterministic given their seed. The forests expose their
per-tree structure (split records, leaf sizes) so tests can trace paths by
hand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, StratificationError

EULER_GAMMA = 0.5772156649015329


class KnnModel:
    """Distance to the k-th nearest training point; higher = more anomalous."""

    def __init__(self, k: int = 1):
        if k < 1:
            raise ConfigurationError("k must be at least 1")
        self.k = k
        self.train: np.ndarray | None = None

    def fit(self, features: np.ndarray) -> "KnnModel":
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or len(features) == 0:
            raise ConfigurationError("training matrix must be non-empty and 2-d")
        if self.k > len(features):
            raise ConfigurationError(f"k={self.k} exceeds {len(features)} training rows")
        self.train = features
        return self

    def score(self, queries: np.ndarray) -> np.ndarray:
        if self.train is None:
            raise ConfigurationError("model is not fitted")
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        out = np.empty(len(queries))
        chunk = max(1, 10_000_000 // max(1, self.train.size))
        for start in range(0, len(queries), chunk):
            block = queries[start : start + chunk]
            d2 = ((block[:, None, :] - self.train[None, :, :]) ** 2).sum(axis=-1)
            out[start : start + chunk] = np.partition(d2, self.k - 1, axis=1)[:, self.k - 1]
        return np.sqrt(out)


def knn_score(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    return model.score(queries)


# --------------------------------------------------------------------------
# Isolation forest
# --------------------------------------------------------------------------


def average_path_length(n: int) -> float:
    """Expected unsuccessful-search path length c(n) in a binary tree."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


@dataclass
class _IsoNode:
    feature: int = -1
    threshold: float = 0.0
    left: "_IsoNode | None" = None
    right: "_IsoNode | None" = None
    size: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _build_iso_tree(X: np.ndarray, rows: np.ndarray, depth: int, limit: int, rng) -> _IsoNode:
    if depth >= limit or rows.size <= 1:
        return _IsoNode(size=rows.size)
    values = X[rows]
    lo = values.min(axis=0)
    hi = values.max(axis=0)
    splittable = np.nonzero(hi > lo)[0]
    if splittable.size == 0:
        return _IsoNode(size=rows.size)
    feature = int(rng.choice(splittable))
    threshold = float(rng.uniform(lo[feature], hi[feature]))
    if threshold <= lo[feature]:
        # uniform() may return its lower bound; nudge so both sides stay
        # non-empty and every leaf holds at least one sample
        threshold = float(np.nextafter(lo[feature], hi[feature]))
    goes_left = X[rows, feature] < threshold
    return _IsoNode(
        feature=feature,
        threshold=threshold,
        left=_build_iso_tree(X, rows[goes_left], depth + 1, limit, rng),
        right=_build_iso_tree(X, rows[~goes_left], depth + 1, limit, rng),
    )


def _iso_path_lengths(node: _IsoNode, X: np.ndarray, rows: np.ndarray, depth: int, out: np.ndarray):
    if node.is_leaf:
        out[rows] = depth + average_path_length(node.size)
        return
    goes_left = X[rows, node.feature] < node.threshold
    _iso_path_lengths(node.left, X, rows[goes_left], depth + 1, out)
    _iso_path_lengths(node.right, X, rows[~goes_left], depth + 1, out)


class IsolationForestModel:
    """Isolation forest with uniform splits on subsamples without
    replacement; score 2^(-mean path / c(subsample))."""

    def __init__(self, n_trees: int = 100, subsample: int = 256, seed: int = 0):
        self.n_trees = n_trees
        self.subsample = subsample
        self.seed = seed
        self.trees: list[_IsoNode] = []
        self._psi = 0

    @property
    def height_limit(self) -> int:
        return math.ceil(math.log2(max(2, self._psi)))

    def fit(self, features: np.ndarray) -> "IsolationForestModel":
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or len(X) == 0:
            raise ConfigurationError("training matrix must be non-empty and 2-d")
        rng = np.random.default_rng(self.seed)
        self._psi = min(self.subsample, len(X))
        limit = self.height_limit
        self.trees = []
        for _ in range(self.n_trees):
            rows = rng.choice(len(X), size=self._psi, replace=False)
            self.trees.append(_build_iso_tree(X, rows, 0, limit, rng))
        return self

    def path_lengths(self, queries: np.ndarray) -> np.ndarray:
        """(n_queries, n_trees) adjusted path lengths."""
        if not self.trees:
            raise ConfigurationError("model is not fitted")
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        out = np.empty((len(queries), len(self.trees)))
        rows = np.arange(len(queries))
        for t, tree in enumerate(self.trees):
            _iso_path_lengths(tree, queries, rows, 0, out[:, t])
        return out

    def score(self, queries: np.ndarray) -> np.ndarray:
        mean_path = self.path_lengths(queries).mean(axis=1)
        return np.power(2.0, -mean_path / average_path_length(self._psi))


def iforest_score(model: IsolationForestModel, queries: np.ndarray) -> np.ndarray:
    return model.score(queries)


# --------------------------------------------------------------------------
# Random forest (Gini CART, sqrt-feature subsampling, bootstrap)
# --------------------------------------------------------------------------


@dataclass
class _CartNode:
    feature: int = -1
    threshold: float = 0.0
    left: "_CartNode | None" = None
    right: "_CartNode | None" = None
    prob: float = 0.0  # leaf probability of class 1

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray):
    """Lowest weighted-Gini split over candidate features.

    Ties resolve to the lowest feature index then the lowest threshold:
    features are scanned in ascending order with strict improvement, and
    within a feature argmin takes the first (lowest) midpoint.
    """
    n = y.size
    best_gini = np.inf
    best_feature = -1
    best_threshold = 0.0
    for f in np.sort(features):
        order = np.argsort(X[:, f], kind="mergesort")
        xs = X[order, f]
        pos = np.cumsum(y[order])
        cut = np.nonzero(xs[1:] > xs[:-1])[0]
        if cut.size == 0:
            continue
        n_left = cut + 1.0
        n_right = n - n_left
        pos_left = pos[cut]
        pos_right = pos[-1] - pos_left
        p_left = pos_left / n_left
        p_right = pos_right / n_right
        gini = (
            n_left * (2.0 * p_left * (1.0 - p_left))
            + n_right * (2.0 * p_right * (1.0 - p_right))
        ) / n
        j = int(np.argmin(gini))
        if gini[j] < best_gini:
            best_gini = float(gini[j])
            best_feature = int(f)
            best_threshold = float((xs[cut[j]] + xs[cut[j] + 1]) / 2.0)
    return best_feature, best_threshold


def _build_cart(X: np.ndarray, y: np.ndarray, rows: np.ndarray, max_features: int, rng) -> _CartNode:
    labels = y[rows]
    if rows.size < 2 or labels.min() == labels.max():
        return _CartNode(prob=float(labels.mean()))
    candidates = rng.choice(X.shape[1], size=max_features, replace=False)
    feature, threshold = _best_split(X[rows], labels, candidates)
    if feature < 0:
        # no candidate feature varies on this node: fall back to all
        feature, threshold = _best_split(X[rows], labels, np.arange(X.shape[1]))
        if feature < 0:
            return _CartNode(prob=float(labels.mean()))
    goes_left = X[rows, feature] <= threshold
    return _CartNode(
        feature=feature,
        threshold=threshold,
        left=_build_cart(X, y, rows[goes_left], max_features, rng),
        right=_build_cart(X, y, rows[~goes_left], max_features, rng),
    )


def _cart_probs(node: _CartNode, X: np.ndarray, rows: np.ndarray, out: np.ndarray):
    if node.is_leaf:
        out[rows] = node.prob
        return
    goes_left = X[rows, node.feature] <= node.threshold
    _cart_probs(node.left, X, rows[goes_left], out)
    _cart_probs(node.right, X, rows[~goes_left], out)


class RandomForestModel:
    """Bagged Gini CART classifier reporting mean leaf class-1 frequency."""

    def __init__(self, n_trees: int = 100, seed: int = 0):
        self.n_trees = n_trees
        self.seed = seed
        self.trees: list[_CartNode] = []

    def fit(self, features: np.ndarray, labels: np.ndarray) -> "RandomForestModel":
        X = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels).astype(np.int64)
        if X.ndim != 2 or len(X) != len(y) or len(X) == 0:
            raise ConfigurationError("features/labels must be non-empty and aligned")
        rng = np.random.default_rng(self.seed)
        max_features = max(1, int(math.sqrt(X.shape[1])))
        self.trees = []
        for _ in range(self.n_trees):
            rows = rng.choice(len(X), size=len(X), replace=True)
            self.trees.append(_build_cart(X, y, rows, max_features, rng))
        return self

    def predict_proba(self, queries: np.ndarray) -> np.ndarray:
        """Probability of class 1 (anomaly), averaged over trees."""
        if not self.trees:
            raise ConfigurationError("model is not fitted")
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        rows = np.arange(len(queries))
        acc = np.zeros(len(queries))
        scratch = np.empty(len(queries))
        for tree in self.trees:
            _cart_probs(tree, queries, rows, scratch)
            acc += scratch
        return acc / len(self.trees)


@dataclass
class CvFolds:
    """Stratified partition of sample indices into equal folds."""

    folds: list[np.ndarray] = field(default_factory=list)
    seed: int = 0

    @classmethod
    def stratified(cls, labels: np.ndarray, n_folds: int = 5, seed: int = 0) -> "CvFolds":
        labels = np.asarray(labels).ravel()
        rng = np.random.default_rng(seed)
        buckets: list[list[int]] = [[] for _ in range(n_folds)]
        for cls_value in np.unique(labels):
            members = np.nonzero(labels == cls_value)[0]
            members = members[rng.permutation(members.size)]
            for f in range(n_folds):
                buckets[f].extend(members[f::n_folds].tolist())
        folds = [np.sort(np.asarray(b, dtype=np.intp)) for b in buckets]
        result = cls(folds=folds, seed=seed)
        result.validate(labels)
        return result

    def validate(self, labels: np.ndarray):
        labels = np.asarray(labels).ravel()
        seen = np.concatenate(self.folds)
        if len(seen) != len(labels) or len(np.unique(seen)) != len(labels):
            raise StratificationError("folds do not partition the sample indices")
        for f, fold in enumerate(self.folds):
            complement = np.setdiff1d(np.arange(len(labels)), fold)
            if np.unique(labels[complement]).size < 2:
                raise StratificationError(
                    f"training complement of fold {f} is missing a class"
                )


def rf_fit_predict_cv(
    features: np.ndarray,
    labels: np.ndarray,
    folds: CvFolds,
    n_trees: int = 100,
    seed: int = 0,
) -> np.ndarray:
    """Out-of-fold class-1 probabilities: each sample is scored by the one
    forest that never saw it."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels).ravel()
    folds.validate(y)
    scores = np.empty(len(y))
    for f, fold in enumerate(folds.folds):
        complement = np.setdiff1d(np.arange(len(y)), fold)
        forest = RandomForestModel(n_trees=n_trees, seed=seed + f)
        forest.fit(X[complement], y[complement])
        scores[fold] = forest.predict_proba(X[fold])
    return scores
