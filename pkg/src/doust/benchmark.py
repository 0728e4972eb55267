"""One-class benchmark protocol: split construction, algorithm runs,
failure bookkeeping, significance reporting, and CSV/JSONL emission.

The unsupervised algorithms and the refinement step only ever see feature
matrices; test labels reach nothing but the supervised random forest, and
that one only through cross-validation folds.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .baselines import CvFolds, IsolationForestModel, KnnModel, rf_fit_predict_cv
from .data import Dataset, load_dataset
from .errors import ConfigurationError, EnsembleFailureError
from .metrics import roc_auc
from .model import DoustConfig, SplitSpec, train_ensemble
from .parallel import parallel_map
from .serialize import csv_cell, dumps_json
from .stats import SignificanceReport, wilcoxon_holm
from .synthetic import DownsampleResult, DownsampleSpec, nu_downsample

ALGO_DOUST = "doust"
ALGO_KNN = "knn"
ALGO_IFOREST = "iforest"
ALGO_RF = "rf_supervised"
ALGORITHMS = (ALGO_DOUST, ALGO_KNN, ALGO_IFOREST, ALGO_RF)
UNSUPERVISED = (ALGO_DOUST, ALGO_KNN, ALGO_IFOREST)

STATUS_OK = "ok"
STATUS_EXCLUDED = "dataset_excluded"
STATUS_FAILED = "failed"


@dataclass
class OneClassSplit:
    """Normal-only training set plus a mixed test set at a target anomaly
    fraction."""

    train: Dataset
    test: Dataset
    achieved_nu: float
    below_min_outliers: bool
    excluded: bool = False
    reason: str | None = None
    notes: list[str] = field(default_factory=list)


def make_oneclass_split(
    dataset: Dataset, spec: SplitSpec, min_outliers: int = 200
) -> OneClassSplit:
    """Split normals by ratio, assemble the test set, and downsample to the
    target fraction.

    Outliers are removed first; when even the full outlier set cannot reach
    the target, test normals are removed instead. The training set never
    contains a labeled outlier.
    """
    normal_idx = np.nonzero(dataset.labels == 0)[0]
    outlier_idx = np.nonzero(dataset.labels == 1)[0]
    if normal_idx.size < 2:
        raise ConfigurationError("need at least two normal samples")
    if outlier_idx.size < 1:
        raise ConfigurationError("need at least one outlier")

    rng = np.random.default_rng(spec.seed)
    perm = normal_idx[rng.permutation(normal_idx.size)]
    n_train = min(max(1, round(spec.train_ratio * normal_idx.size)), normal_idx.size - 1)
    train = dataset.subset(np.sort(perm[:n_train]), name=f"{dataset.name}/train")
    test_normals = perm[n_train:]

    test = dataset.subset(
        np.sort(np.concatenate([test_normals, outlier_idx])), name=f"{dataset.name}/test"
    )
    notes: list[str] = []
    down: DownsampleResult = nu_downsample(
        test, DownsampleSpec(target_nu=spec.nu, seed=spec.seed + 1, min_outliers=min_outliers)
    )
    test = down.dataset
    if down.warning:
        # Outliers alone cannot reach the target: drop test normals.
        n_out = test.n_outliers
        keep_normals = int(np.floor(n_out * (1.0 - spec.nu) / spec.nu))
        current = np.nonzero(test.labels == 0)[0]
        if keep_normals < current.size:
            kept = rng.choice(current, size=keep_normals, replace=False) if keep_normals else np.empty(0, dtype=np.intp)
            mask = test.labels == 1
            mask[kept.astype(np.intp)] = True
            test = test.subset(np.nonzero(mask)[0])
            notes.append(
                f"removed {current.size - keep_normals} test normals to reach nu"
            )

    achieved = test.nu
    excluded = False
    reason = None
    if test.n_outliers == 0 or test.n_normal == 0:
        excluded = True
        reason = "target nu unreachable: test set lost a class"
    return OneClassSplit(
        train=train,
        test=test,
        achieved_nu=achieved,
        below_min_outliers=down.below_minimum or test.n_outliers < min_outliers,
        excluded=excluded,
        reason=reason,
        notes=notes,
    )


@dataclass(frozen=True)
class BenchmarkProtocol:
    """Everything a benchmark run depends on; hashable for reproducibility
    records."""

    datasets: tuple[str, ...]
    split: SplitSpec = field(default_factory=SplitSpec)
    algorithms: tuple[str, ...] = ALGORITHMS
    doust: DoustConfig = field(default_factory=DoustConfig)
    knn_k: int = 1
    iforest_trees: int = 100
    rf_trees: int = 100
    repetitions: int = 1
    min_outliers: int = 200
    enforce_min_outliers: bool = False

    def __post_init__(self):
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ConfigurationError(f"unknown algorithms: {sorted(unknown)}")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be at least 1")

    def to_dict(self) -> dict:
        return {
            "datasets": list(self.datasets),
            "split": {
                "nu": self.split.nu,
                "gamma": self.split.gamma,
                "train_ratio": self.split.train_ratio,
                "seed": self.split.seed,
            },
            "algorithms": list(self.algorithms),
            "doust": self.doust.to_dict(),
            "knn_k": self.knn_k,
            "iforest_trees": self.iforest_trees,
            "rf_trees": self.rf_trees,
            "repetitions": self.repetitions,
            "min_outliers": self.min_outliers,
            "enforce_min_outliers": self.enforce_min_outliers,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "BenchmarkProtocol":
        payload = dict(payload)
        payload["datasets"] = tuple(payload["datasets"])
        if "split" in payload:
            payload["split"] = SplitSpec(**payload["split"])
        if "doust" in payload:
            payload["doust"] = DoustConfig.from_dict(payload["doust"])
        if "algorithms" in payload:
            payload["algorithms"] = tuple(payload["algorithms"])
        return cls(**payload)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RunRecord:
    dataset: str
    algorithm: str
    nu: float | None
    seed: int
    repetition: int
    auc: float | None
    wall_time: float
    status: str
    reason: str | None
    config_hash: str

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "algorithm": self.algorithm,
            "nu": self.nu,
            "seed": self.seed,
            "repetition": self.repetition,
            "auc": self.auc,
            "wall_time": self.wall_time,
            "status": self.status,
            "reason": self.reason,
            "config_hash": self.config_hash,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RunRecord":
        return cls(**payload)


def _score_algorithm(
    name: str, split: OneClassSplit, protocol: BenchmarkProtocol, run_seed: int
) -> np.ndarray:
    train_x = split.train.features
    test_x = split.test.features
    if name == ALGO_DOUST:
        cfg = replace(protocol.doust, seed=run_seed)
        return train_ensemble(train_x, test_x, cfg).score(test_x)
    if name == ALGO_KNN:
        return KnnModel(k=protocol.knn_k).fit(train_x).score(test_x)
    if name == ALGO_IFOREST:
        model = IsolationForestModel(n_trees=protocol.iforest_trees, seed=run_seed)
        return model.fit(train_x).score(test_x)
    if name == ALGO_RF:
        labels = split.test.labels
        folds = CvFolds.stratified(labels, n_folds=5, seed=run_seed)
        return rf_fit_predict_cv(test_x, labels, folds, n_trees=protocol.rf_trees, seed=run_seed)
    raise ConfigurationError(f"unknown algorithm {name!r}")


def _bench_one(args) -> list[RunRecord]:
    dataset, protocol, repetition = args
    run_seed = protocol.split.seed + repetition
    cfg_hash = protocol.config_hash()
    split_spec = replace(protocol.split, seed=run_seed)
    records = []
    try:
        split = make_oneclass_split(dataset, split_spec, protocol.min_outliers)
    except ConfigurationError as exc:
        split = None
        exclusion_reason = str(exc)
    else:
        exclusion_reason = split.reason
        if protocol.enforce_min_outliers and split.below_min_outliers and not split.excluded:
            split.excluded = True
            exclusion_reason = (
                f"fewer than {protocol.min_outliers} outliers after downsampling"
            )

    for name in protocol.algorithms:
        if split is None or split.excluded:
            records.append(
                RunRecord(
                    dataset.name, name, None, run_seed, repetition, None, 0.0,
                    STATUS_EXCLUDED, exclusion_reason, cfg_hash,
                )
            )
            continue
        started = time.perf_counter()
        try:
            scores = _score_algorithm(name, split, protocol, run_seed)
            labels = split.test.labels
            auc = roc_auc(scores[labels == 0], scores[labels == 1])
        except EnsembleFailureError as exc:
            # total ensemble collapse removes the dataset from comparisons
            # rather than failing the batch
            records.append(
                RunRecord(
                    dataset.name, name, split.achieved_nu, run_seed, repetition,
                    None, time.perf_counter() - started, STATUS_EXCLUDED,
                    f"all submodels failed: {exc}", cfg_hash,
                )
            )
            continue
        except (ConfigurationError, ValueError) as exc:
            records.append(
                RunRecord(
                    dataset.name, name, split.achieved_nu, run_seed, repetition,
                    None, time.perf_counter() - started, STATUS_FAILED, str(exc), cfg_hash,
                )
            )
            continue
        records.append(
            RunRecord(
                dataset.name, name, split.achieved_nu, run_seed, repetition,
                float(auc), time.perf_counter() - started, STATUS_OK, None, cfg_hash,
            )
        )
    return records


@dataclass
class BenchmarkResult:
    records: list[RunRecord]
    report: SignificanceReport | None
    auc_matrix: np.ndarray | None
    matrix_datasets: list[str]
    algorithms: list[str]

    @property
    def any_failed(self) -> bool:
        return any(r.status == STATUS_FAILED for r in self.records)


def comparison_matrix(
    records: list[RunRecord], algorithms: list[str]
) -> tuple[np.ndarray | None, list[str]]:
    """Mean AUC per (dataset, algorithm) over the datasets where every
    algorithm succeeded in every repetition."""
    by_dataset: dict[str, dict[str, list[float]]] = {}
    bad: set[str] = set()
    for rec in records:
        if rec.algorithm not in algorithms:
            continue
        if rec.status != STATUS_OK:
            bad.add(rec.dataset)
            continue
        by_dataset.setdefault(rec.dataset, {}).setdefault(rec.algorithm, []).append(rec.auc)
    rows = []
    names = []
    for name in sorted(by_dataset):
        if name in bad:
            continue
        per_algo = by_dataset[name]
        if set(per_algo) != set(algorithms):
            continue
        rows.append([float(np.mean(per_algo[a])) for a in algorithms])
        names.append(name)
    if not rows:
        return None, []
    return np.asarray(rows), names


def run_benchmark(
    protocol: BenchmarkProtocol,
    datasets: list[Dataset] | None = None,
    workers: int | None = None,
) -> BenchmarkResult:
    """Score every algorithm on identical splits of every dataset.

    Per-run failures become failed records; datasets with any non-ok
    algorithm are dropped from the significance comparison, which runs only
    when at least two datasets and two algorithms survive.
    """
    if datasets is None:
        datasets = [load_dataset(p) for p in protocol.datasets]
    jobs = [
        (ds, protocol, rep) for ds in datasets for rep in range(protocol.repetitions)
    ]
    records = [rec for batch in parallel_map(_bench_one, jobs, workers) for rec in batch]

    algorithms = list(protocol.algorithms)
    matrix, names = comparison_matrix(records, algorithms)
    report = None
    if matrix is not None and matrix.shape[0] >= 2 and matrix.shape[1] >= 2:
        report = wilcoxon_holm(matrix, algorithms)
    return BenchmarkResult(records, report, matrix, names, algorithms)


def write_records(records: list[RunRecord], path: str | Path):
    """Append-friendly JSON lines, one record per line, 17-digit floats."""
    path = Path(path)
    with path.open("w") as fh:
        for rec in records:
            fh.write(dumps_json(rec.to_dict()) + "\n")


def read_records(path: str | Path) -> list[RunRecord]:
    path = Path(path)
    records = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(RunRecord.from_dict(json.loads(line)))
    return records


# --------------------------------------------------------------------------
# Score CDFs
# --------------------------------------------------------------------------


def score_cdf(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF support points and values: F steps by 1/n per sorted
    score."""
    scores = np.sort(np.asarray(scores, dtype=np.float64).ravel())
    if scores.size == 0:
        raise ValueError("empty score vector")
    return scores, np.arange(1, scores.size + 1) / scores.size


def emit_score_cdf(groups: dict[str, np.ndarray], path: str | Path):
    """CSV of per-group empirical score CDFs, columns (group, score, cdf)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "score", "cdf"])
        for group, scores in groups.items():
            xs, fs = score_cdf(scores)
            for x, f in zip(xs, fs):
                writer.writerow([group, csv_cell(float(x)), csv_cell(float(f))])


# --------------------------------------------------------------------------
# nu sweep
# --------------------------------------------------------------------------


@dataclass
class SweepCell:
    nu: float
    algorithm: str
    mean_auc: float | None
    n_datasets: int
    excluded_datasets: int


@dataclass
class SweepResult:
    cells: list[SweepCell]
    records: list[RunRecord]

    @property
    def any_failed(self) -> bool:
        return any(r.status == STATUS_FAILED for r in self.records)

    def mean_auc(self, algorithm: str, nu: float) -> float | None:
        for cell in self.cells:
            if cell.algorithm == algorithm and cell.nu == nu:
                return cell.mean_auc
        return None


def sweep_nu(
    protocol: BenchmarkProtocol,
    nu_grid,
    datasets: list[Dataset] | None = None,
    workers: int | None = None,
) -> SweepResult:
    """One benchmark per grid fraction; sweep mode enforces the minimum
    outlier-count exclusion rule."""
    if datasets is None:
        datasets = [load_dataset(p) for p in protocol.datasets]
    cells: list[SweepCell] = []
    all_records: list[RunRecord] = []
    for nu in nu_grid:
        sub = replace(protocol, split=replace(protocol.split, nu=float(nu)), enforce_min_outliers=True)
        result = run_benchmark(sub, datasets=datasets, workers=workers)
        all_records.extend(result.records)
        for algorithm in protocol.algorithms:
            oks = [
                r.auc
                for r in result.records
                if r.algorithm == algorithm and r.status == STATUS_OK
            ]
            excluded = {
                r.dataset
                for r in result.records
                if r.algorithm == algorithm and r.status != STATUS_OK
            }
            cells.append(
                SweepCell(
                    nu=float(nu),
                    algorithm=algorithm,
                    mean_auc=float(np.mean(oks)) if oks else None,
                    n_datasets=len({r.dataset for r in result.records if r.algorithm == algorithm and r.status == STATUS_OK}),
                    excluded_datasets=len(excluded),
                )
            )
    return SweepResult(cells, all_records)


def write_sweep_csv(result: SweepResult, path: str | Path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["nu", "algorithm", "mean_auc", "n_datasets", "excluded_datasets"])
        for cell in result.cells:
            writer.writerow(
                [
                    csv_cell(cell.nu),
                    cell.algorithm,
                    csv_cell(cell.mean_auc) if cell.mean_auc is not None else "",
                    cell.n_datasets,
                    cell.excluded_datasets,
                ]
            )
