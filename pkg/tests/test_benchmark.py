import json

import numpy as np
import pytest

from doust.benchmark import (
    ALGORITHMS,
    STATUS_EXCLUDED,
    STATUS_FAILED,
    STATUS_OK,
    BenchmarkProtocol,
    RunRecord,
    comparison_matrix,
    emit_score_cdf,
    read_records,
    run_benchmark,
    score_cdf,
    sweep_nu,
    write_records,
    write_sweep_csv,
)
from doust.data import Dataset
from doust.errors import ConfigurationError
from doust.model import DoustConfig, SplitSpec


def _dataset(n_norm=120, n_out=60, dim=3, shift=6.0, seed=0, name="toy"):
    rng = np.random.default_rng(seed)
    normals = rng.normal(size=(n_norm, dim))
    anomalies = rng.normal(loc=shift, size=(n_out, dim))
    return Dataset(
        np.vstack([normals, anomalies]),
        np.concatenate([np.zeros(n_norm, dtype=int), np.ones(n_out, dtype=int)]),
        name=name,
    )


def _fast_protocol(**overrides):
    defaults = dict(
        datasets=("unused.csv",),
        split=SplitSpec(nu=0.5, seed=3),
        doust=DoustConfig(hidden=(8,), ensemble_size=2, pretrain_epochs=1, refine_epochs=3),
        iforest_trees=20,
        rf_trees=10,
        min_outliers=5,
    )
    defaults.update(overrides)
    return BenchmarkProtocol(**defaults)


class TestProtocol:
    def test_round_trip(self):
        protocol = _fast_protocol(algorithms=("doust", "knn"))
        clone = BenchmarkProtocol.from_dict(protocol.to_dict())
        assert clone == protocol
        assert clone.config_hash() == protocol.config_hash()

    def test_unknown_algorithm_rejected(self):
        with pytest.raises(ConfigurationError):
            _fast_protocol(algorithms=("doust", "svm"))

    def test_json_serializable(self):
        payload = json.dumps(_fast_protocol().to_dict())
        assert "doust" in payload


class TestRunBenchmark:
    def test_all_algorithms_score_separable_data(self):
        result = run_benchmark(_fast_protocol(), datasets=[_dataset()], workers=1)
        assert len(result.records) == len(ALGORITHMS)
        for rec in result.records:
            assert rec.status == STATUS_OK
            assert rec.auc > 0.8
            assert rec.nu == 0.5

    def test_identical_split_across_algorithms(self):
        # knn at k=1 scores a training point 0, so the achieved nu and the
        # record seeds must agree across algorithms
        result = run_benchmark(_fast_protocol(), datasets=[_dataset()], workers=1)
        assert len({r.nu for r in result.records}) == 1
        assert len({r.seed for r in result.records}) == 1

    def test_rerun_is_byte_identical_minus_wall_time(self):
        protocol = _fast_protocol()
        ds = [_dataset()]
        a = run_benchmark(protocol, datasets=ds, workers=1)
        b = run_benchmark(protocol, datasets=ds, workers=1)
        for ra, rb in zip(a.records, b.records):
            da, db = ra.to_dict(), rb.to_dict()
            da.pop("wall_time"), db.pop("wall_time")
            assert da == db

    def test_ensemble_collapse_is_excluded_not_failed(self):
        # an ensemble whose training always diverges removes the dataset
        # from comparisons instead of failing the batch
        protocol = _fast_protocol(
            doust=DoustConfig(hidden=(8,), ensemble_size=2, pretrain_epochs=1,
                              refine_epochs=1, learning_rate=1e200),
            algorithms=("doust", "knn"),
        )
        ds = _dataset(seed=5)
        ds.features *= 1e150
        result = run_benchmark(protocol, datasets=[ds], workers=1)
        by_algo = {r.algorithm: r for r in result.records}
        assert by_algo["doust"].status == STATUS_EXCLUDED
        assert "all submodels failed" in by_algo["doust"].reason
        assert by_algo["doust"].auc is None
        assert not result.any_failed

    def test_degenerate_cv_is_a_failed_record(self):
        # one outlier leaves a two-row test set: stratified 5-fold CV cannot
        # be built and the supervised run records a failure
        ds = _dataset(n_norm=60, n_out=1, seed=6)
        protocol = _fast_protocol(algorithms=("rf_supervised", "knn"), min_outliers=1)
        result = run_benchmark(protocol, datasets=[ds], workers=1)
        by_algo = {r.algorithm: r for r in result.records}
        assert by_algo["rf_supervised"].status == STATUS_FAILED
        assert by_algo["knn"].status == STATUS_OK
        assert result.any_failed

    def test_excluded_dataset_marks_every_algorithm(self):
        # nu=0.9 with one outlier leaves zero test normals -> excluded
        ds = _dataset(n_norm=50, n_out=1, seed=2)
        protocol = _fast_protocol(split=SplitSpec(nu=0.9, seed=0), algorithms=("knn", "iforest"))
        result = run_benchmark(protocol, datasets=[ds], workers=1)
        assert all(r.status == STATUS_EXCLUDED for r in result.records)
        assert not result.any_failed  # exclusions are not failures

    def test_significance_report_on_multiple_datasets(self):
        datasets = [_dataset(seed=s, name=f"d{s}") for s in range(4)]
        result = run_benchmark(_fast_protocol(algorithms=("knn", "iforest")),
                               datasets=datasets, workers=1)
        assert result.report is not None
        assert result.report.n_datasets == 4
        assert result.auc_matrix.shape == (4, 2)

    def test_comparison_excludes_datasets_with_any_failure(self):
        records = [
            RunRecord("a", "knn", 0.5, 0, 0, 0.9, 0.1, STATUS_OK, None, "h"),
            RunRecord("a", "iforest", 0.5, 0, 0, 0.8, 0.1, STATUS_OK, None, "h"),
            RunRecord("b", "knn", 0.5, 0, 0, 0.7, 0.1, STATUS_OK, None, "h"),
            RunRecord("b", "iforest", None, 0, 0, None, 0.1, STATUS_FAILED, "x", "h"),
        ]
        matrix, names = comparison_matrix(records, ["knn", "iforest"])
        assert names == ["a"]
        np.testing.assert_array_equal(matrix, [[0.9, 0.8]])

    def test_repetitions_average_into_matrix(self):
        records = [
            RunRecord("a", "knn", 0.5, s, s, auc, 0.1, STATUS_OK, None, "h")
            for s, auc in enumerate((0.8, 0.6))
        ] + [
            RunRecord("a", "iforest", 0.5, s, s, 0.7, 0.1, STATUS_OK, None, "h")
            for s in range(2)
        ]
        matrix, names = comparison_matrix(records, ["knn", "iforest"])
        np.testing.assert_allclose(matrix, [[0.7, 0.7]])


class TestRecordsIO:
    def test_jsonl_round_trip(self, tmp_path):
        records = [
            RunRecord("ds", "knn", 0.25, 1, 0, 0.87654321987654321, 1.5,
                      STATUS_OK, None, "abc"),
            RunRecord("ds", "doust", None, 1, 0, None, 0.0, STATUS_EXCLUDED, "why", "abc"),
        ]
        path = tmp_path / "records.jsonl"
        write_records(records, path)
        back = read_records(path)
        assert [r.to_dict() for r in back] == [r.to_dict() for r in records]

    def test_floats_written_with_17_digits(self, tmp_path):
        rec = RunRecord("ds", "knn", 1 / 3, 0, 0, 2 / 3, 0.1, STATUS_OK, None, "h")
        path = tmp_path / "r.jsonl"
        write_records([rec], path)
        text = path.read_text()
        assert "0.66666666666666663" in text
        assert json.loads(text.splitlines()[0])["auc"] == 2 / 3


class TestScoreCdf:
    def test_steps_at_multiples_of_one_over_n(self):
        xs, fs = score_cdf(np.array([0.3, 0.1, 0.2, 0.4]))
        np.testing.assert_array_equal(xs, [0.1, 0.2, 0.3, 0.4])
        np.testing.assert_allclose(fs, [0.25, 0.5, 0.75, 1.0])

    def test_identical_groups_identical_cdfs(self, tmp_path):
        scores = np.random.default_rng(0).normal(size=30)
        path = tmp_path / "cdf.csv"
        emit_score_cdf({"train": scores, "test": scores.copy()}, path)
        lines = path.read_text().splitlines()
        train = [l.split(",")[1:] for l in lines[1:] if l.startswith("train")]
        test = [l.split(",")[1:] for l in lines[1:] if l.startswith("test")]
        assert train == test

    def test_kolmogorov_smirnov_against_oracle(self, tmp_path):
        from scipy import stats as sps

        rng = np.random.default_rng(1)
        a = rng.normal(size=200)
        b = rng.normal(loc=0.5, size=150)
        path = tmp_path / "cdf.csv"
        emit_score_cdf({"train": a, "test": b}, path)
        # rebuild the empirical CDFs from the emitted file and compute the
        # KS distance on the union grid
        rows = [line.split(",") for line in path.read_text().splitlines()[1:]]
        cdfs = {}
        for group, x, f in rows:
            cdfs.setdefault(group, []).append((float(x), float(f)))
        grid = np.sort(np.concatenate([a, b]))

        def empirical(points, grid):
            xs = np.array([p[0] for p in points])
            fs = np.array([p[1] for p in points])
            idx = np.searchsorted(xs, grid, side="right") - 1
            return np.where(idx >= 0, fs[np.clip(idx, 0, None)], 0.0)

        ks = np.max(np.abs(empirical(cdfs["train"], grid) - empirical(cdfs["test"], grid)))
        assert ks == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-12)

    def test_round_trips_exactly(self, tmp_path):
        scores = np.random.default_rng(2).normal(size=40) * 1e-7
        path = tmp_path / "cdf.csv"
        emit_score_cdf({"test": scores}, path)
        back = [float(l.split(",")[1]) for l in path.read_text().splitlines()[1:]]
        np.testing.assert_array_equal(np.sort(scores), back)


class TestSweep:
    def test_single_point_grid_reduces_to_run_benchmark(self):
        ds = [_dataset(seed=3)]
        protocol = _fast_protocol(algorithms=("knn", "iforest"))
        sweep = sweep_nu(protocol, [0.5], datasets=ds, workers=1)
        single = run_benchmark(protocol, datasets=ds, workers=1)
        by_algo = {r.algorithm: r.auc for r in single.records}
        for cell in sweep.cells:
            assert cell.mean_auc == pytest.approx(by_algo[cell.algorithm])

    def test_sweep_enforces_min_outlier_rule(self):
        # at nu=0.01 only ~0-1 outliers survive downsampling: excluded cell
        ds = [_dataset(n_norm=200, n_out=100, seed=4)]
        protocol = _fast_protocol(algorithms=("knn",), min_outliers=50)
        sweep = sweep_nu(protocol, [0.5, 0.01], datasets=ds, workers=1)
        by_nu = {c.nu: c for c in sweep.cells}
        assert by_nu[0.5].mean_auc is not None
        assert by_nu[0.01].mean_auc is None
        assert by_nu[0.01].excluded_datasets == 1

    def test_sweep_csv_round_trips_exactly(self, tmp_path):
        ds = [_dataset(seed=5)]
        protocol = _fast_protocol(algorithms=("knn",))
        sweep = sweep_nu(protocol, [0.5, 0.25], datasets=ds, workers=1)
        path = tmp_path / "sweep.csv"
        write_sweep_csv(sweep, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "nu,algorithm,mean_auc,n_datasets,excluded_datasets"
        assert len(lines) == 3
        for line, cell in zip(lines[1:], sweep.cells):
            nu, _, mean_auc, _, _ = line.split(",")
            assert float(nu) == cell.nu
            assert float(mean_auc) == cell.mean_auc
