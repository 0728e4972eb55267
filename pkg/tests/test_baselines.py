import numpy as np
import pytest

from doust.baselines import (
    CvFolds,
    IsolationForestModel,
    KnnModel,
    RandomForestModel,
    average_path_length,
    rf_fit_predict_cv,
)
from doust.errors import ConfigurationError, StratificationError
from doust.metrics import roc_auc


class TestKnn:
    def test_query_on_training_point_scores_zero(self):
        train = np.array([[1.0, 2.0], [3.0, 4.0]])
        model = KnnModel(k=1).fit(train)
        assert model.score(np.array([[1.0, 2.0]]))[0] == 0.0

    def test_one_dimensional_nearest_neighbor(self):
        model = KnnModel(k=1).fit(np.array([[0.0], [10.0]]))
        assert model.score(np.array([[4.0]]))[0] == pytest.approx(4.0)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        train = rng.normal(size=(20, 3))
        queries = rng.normal(size=(15, 3))
        model = KnnModel(k=1).fit(train)
        got = model.score(queries)
        for i, q in enumerate(queries):
            expected = min(np.sqrt(((q - t) ** 2).sum()) for t in train)
            assert got[i] == pytest.approx(expected, rel=1e-12)

    def test_kth_neighbor(self):
        train = np.array([[0.0], [1.0], [5.0]])
        model = KnnModel(k=2).fit(train)
        assert model.score(np.array([[0.0]]))[0] == pytest.approx(1.0)

    def test_k_exceeding_rows_rejected(self):
        with pytest.raises(ConfigurationError):
            KnnModel(k=5).fit(np.zeros((3, 2)))

    def test_unfitted_rejected(self):
        with pytest.raises(ConfigurationError):
            KnnModel().score(np.zeros((1, 2)))


class TestIsolationForest:
    def test_two_point_single_tree_hand_trace(self):
        # one split isolates both points at depth 1; leaves of size one add
        # c(1)=0, so every path length is exactly 1 and the score is
        # 2^(-1/c(2)) = 0.5 for any query on either side
        train = np.array([[0.0], [1.0]])
        model = IsolationForestModel(n_trees=1, subsample=2, seed=3).fit(train)
        assert model.height_limit == 1
        paths = model.path_lengths(train)
        np.testing.assert_array_equal(paths, np.ones((2, 1)))
        np.testing.assert_allclose(model.score(train), 0.5)

    def test_far_point_beats_central_point(self):
        rng = np.random.default_rng(1)
        train = rng.normal(size=(400, 2))
        model = IsolationForestModel(seed=0).fit(train)
        center = train.mean(axis=0, keepdims=True)
        far = center + 12.0
        assert model.score(far)[0] > model.score(center)[0]

    def test_depth_limit_and_leaf_sizes(self):
        rng = np.random.default_rng(2)
        train = rng.normal(size=(600, 3))
        model = IsolationForestModel(n_trees=20, seed=5).fit(train)
        limit = model.height_limit
        assert limit == 8  # ceil(log2(256))

        def walk(node, depth):
            if node.is_leaf:
                assert depth <= limit
                assert node.size >= 1
                return node.size
            return walk(node.left, depth + 1) + walk(node.right, depth + 1)

        for tree in model.trees:
            assert walk(tree, 0) == 256

    def test_same_seed_same_scores(self):
        rng = np.random.default_rng(3)
        train = rng.normal(size=(100, 2))
        queries = rng.normal(size=(20, 2))
        a = IsolationForestModel(n_trees=10, seed=9).fit(train).score(queries)
        b = IsolationForestModel(n_trees=10, seed=9).fit(train).score(queries)
        np.testing.assert_array_equal(a, b)

    def test_scores_in_unit_interval(self):
        rng = np.random.default_rng(4)
        train = rng.normal(size=(300, 4))
        scores = IsolationForestModel(seed=1).fit(train).score(rng.normal(size=(50, 4)))
        assert np.all((scores > 0) & (scores < 1))

    def test_average_path_length_values(self):
        assert average_path_length(0) == 0.0
        assert average_path_length(1) == 0.0
        assert average_path_length(2) == 1.0
        # c(n) grows like 2 ln(n); spot value against direct formula
        expected = 2 * (np.log(255) + 0.5772156649015329) - 2 * 255 / 256
        assert average_path_length(256) == pytest.approx(expected, rel=1e-12)


def _separable(seed=0, n=120, dim=3, shift=6.0):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=(n, dim))
    x1 = rng.normal(loc=shift, size=(n // 2, dim))
    X = np.vstack([x0, x1])
    y = np.concatenate([np.zeros(n, dtype=int), np.ones(n // 2, dtype=int)])
    return X, y


class TestRandomForest:
    def test_learns_separable_data(self):
        X, y = _separable()
        model = RandomForestModel(n_trees=20, seed=0).fit(X, y)
        probs = model.predict_proba(X)
        assert roc_auc(probs[y == 0], probs[y == 1]) == 1.0

    def test_probabilities_in_range(self):
        X, y = _separable(seed=1)
        probs = RandomForestModel(n_trees=10, seed=1).fit(X, y).predict_proba(X)
        assert np.all((probs >= 0) & (probs <= 1))

    def test_seed_deterministic(self):
        X, y = _separable(seed=2)
        a = RandomForestModel(n_trees=10, seed=7).fit(X, y).predict_proba(X)
        b = RandomForestModel(n_trees=10, seed=7).fit(X, y).predict_proba(X)
        np.testing.assert_array_equal(a, b)

    def test_unfitted_rejected(self):
        with pytest.raises(ConfigurationError):
            RandomForestModel().predict_proba(np.zeros((2, 2)))


class TestCvFolds:
    def test_partition_every_index_once(self):
        labels = np.array([0] * 40 + [1] * 15)
        folds = CvFolds.stratified(labels, n_folds=5, seed=0)
        combined = np.sort(np.concatenate(folds.folds))
        np.testing.assert_array_equal(combined, np.arange(55))

    def test_label_ratio_within_one_sample(self):
        labels = np.array([0] * 43 + [1] * 17)
        folds = CvFolds.stratified(labels, n_folds=5, seed=1)
        for fold in folds.folds:
            pos = int(labels[fold].sum())
            assert abs(pos - 17 / 5) < 1.0 + 1e-9

    def test_single_anomaly_rejected(self):
        labels = np.array([0] * 20 + [1])
        with pytest.raises(StratificationError):
            CvFolds.stratified(labels, n_folds=5, seed=0)

    def test_seed_changes_assignment(self):
        labels = np.array([0] * 30 + [1] * 10)
        a = CvFolds.stratified(labels, seed=0)
        b = CvFolds.stratified(labels, seed=1)
        assert any(not np.array_equal(x, y) for x, y in zip(a.folds, b.folds))


class TestRfCv:
    def test_perfectly_separable_out_of_fold_auc_one(self):
        X, y = _separable(seed=3, n=100)
        folds = CvFolds.stratified(y, n_folds=5, seed=0)
        scores = rf_fit_predict_cv(X, y, folds, n_trees=20, seed=0)
        assert roc_auc(scores[y == 0], scores[y == 1]) == 1.0

    def test_shuffled_labels_give_chance_auc(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(60, 3))
        aucs = []
        for rep in range(20):
            y = np.array([0] * 40 + [1] * 20)
            rng.shuffle(y)
            folds = CvFolds.stratified(y, n_folds=5, seed=rep)
            scores = rf_fit_predict_cv(X, y, folds, n_trees=10, seed=rep)
            aucs.append(roc_auc(scores[y == 0], scores[y == 1]))
        assert abs(np.mean(aucs) - 0.5) < 0.1

    def test_out_of_fold_scores_cover_all_samples(self):
        X, y = _separable(seed=6, n=80)
        folds = CvFolds.stratified(y, n_folds=5, seed=2)
        scores = rf_fit_predict_cv(X, y, folds, n_trees=5, seed=2)
        assert scores.shape == y.shape
        assert np.all(np.isfinite(scores))
