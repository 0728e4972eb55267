"""Command-line interface.

Subcommands: `bench run`, `bench sweep-nu`, `train`, `simulate thought`,
`simulate gaussian`, `stats report`, `emit cdf`. Every command takes
`--seed` where randomness is involved and `--workers` (or the
DOUST_WORKERS environment variable) where repetitions parallelize.
Exit code 0 means no failed records; excluded datasets do not fail a run.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import benchmark as bench
from .data import load_dataset, save_dataset
from .model import DoustConfig, EnsembleModel, SplitSpec, train_ensemble
from .serialize import csv_cell, dumps_json
from .stats import wilcoxon_holm
from .synthetic import (
    GAUSSIAN_METHODS,
    GaussianSpec,
    ThoughtConfig,
    gaussian_experiment,
    run_thought_experiment,
)


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _load_protocol(path: str) -> bench.BenchmarkProtocol:
    with open(path) as fh:
        return bench.BenchmarkProtocol.from_dict(json.load(fh))


def _cmd_bench_run(args) -> int:
    protocol = _load_protocol(args.config)
    if args.seed is not None:
        protocol = replace(protocol, split=replace(protocol.split, seed=args.seed))
    result = bench.run_benchmark(protocol, workers=args.workers)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bench.write_records(result.records, out_dir / "records.jsonl")
    if result.report is not None:
        (out_dir / "report.json").write_text(dumps_json(result.report.to_dict()) + "\n")
    for rec in result.records:
        auc = "-" if rec.auc is None else f"{rec.auc:.4f}"
        print(f"{rec.dataset:>20} {rec.algorithm:>14} auc={auc} status={rec.status}")
    if result.report is not None:
        print("mean ranks:", {a: round(r, 3) for a, r in result.report.mean_ranks.items()})
    return 1 if result.any_failed else 0


def _cmd_bench_sweep(args) -> int:
    protocol = _load_protocol(args.config)
    if args.seed is not None:
        protocol = replace(protocol, split=replace(protocol.split, seed=args.seed))
    result = bench.sweep_nu(protocol, args.grid, workers=args.workers)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bench.write_sweep_csv(result, out_dir / "sweep.csv")
    bench.write_records(result.records, out_dir / "sweep_records.jsonl")
    for cell in result.cells:
        auc = "-" if cell.mean_auc is None else f"{cell.mean_auc:.4f}"
        print(f"nu={cell.nu:<6g} {cell.algorithm:>14} mean_auc={auc} "
              f"datasets={cell.n_datasets} excluded={cell.excluded_datasets}")
    return 1 if result.any_failed else 0


def _cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    spec = SplitSpec(nu=args.nu, train_ratio=args.train_ratio, seed=args.seed)
    split = bench.make_oneclass_split(dataset, spec, min_outliers=args.min_outliers)
    if split.excluded:
        print(f"split excluded: {split.reason}", file=sys.stderr)
        return 1
    config = DoustConfig(seed=args.seed, ensemble_size=args.ensemble_size)
    model = train_ensemble(split.train.features, split.test.features, config)
    Path(args.out_model).write_text(dumps_json(model.to_dict()) + "\n")
    if args.out_train:
        save_dataset(split.train, args.out_train)
    if args.out_test:
        save_dataset(split.test, args.out_test)
    print(
        f"trained {model.n_ok}/{config.ensemble_size} submodels "
        f"(achieved nu={split.achieved_nu:.4g}) -> {args.out_model}"
    )
    return 0


def _cmd_simulate_thought(args) -> int:
    cfg = ThoughtConfig(
        n_normal=args.n,
        n_outliers=args.o,
        tail_fraction=args.f,
        seed=args.seed,
        repetitions=args.reps,
    )
    results = run_thought_experiment(cfg)
    rows = []
    for rep, res in enumerate(results):
        rows.append((args.n, args.o, args.f, rep, "one_sided", res.auc_one_sided,
                     res.chosen_side, res.mistakes_one_sided))
        rows.append((args.n, args.o, args.f, rep, "two_sided", res.auc_two_sided,
                     res.chosen_side, res.mistakes_two_sided))
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n_normal", "n_outliers", "tail_fraction", "repetition",
                             "method", "auc", "chosen_side", "mistakes"])
            for row in rows:
                writer.writerow([csv_cell(v) for v in row])
    p_right = np.mean([r.chosen_side == "right" for r in results])
    print(f"P(right side) = {p_right:.4f} over {args.reps} repetitions")
    print(f"mean one-sided AUC = {np.mean([r.auc_one_sided for r in results]):.4f}")
    print(f"mean two-sided AUC = {np.mean([r.auc_two_sided for r in results]):.4f}")
    print(f"mean mistakes one-sided = {np.mean([r.mistakes_one_sided for r in results]):.2f}, "
          f"two-sided = {np.mean([r.mistakes_two_sided for r in results]):.2f}")
    return 0


def _cmd_simulate_gaussian(args) -> int:
    bad = set(args.methods) - set(GAUSSIAN_METHODS)
    if bad:
        print(f"unknown methods: {sorted(bad)} (choose from {', '.join(GAUSSIAN_METHODS)})",
              file=sys.stderr)
        return 2
    rows = []
    for n in args.n_grid:
        spec = GaussianSpec(nu=args.nu, train_size=n, repetitions=args.reps, seed=args.seed)
        for method in args.methods:
            result = gaussian_experiment(spec, method=method, workers=args.workers)
            for rep, auc in enumerate(result.aucs):
                rows.append((n, args.nu, rep, method, auc))
            print(f"N={n:<8d} {method:>17}: mean AUC {result.mean_auc:.4f} "
                  f"+- {result.stderr:.4f} ({result.n_failed} failed)")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["train_size", "nu", "repetition", "method", "auc"])
            for row in rows:
                writer.writerow([csv_cell(v) for v in row])
    return 0


def _cmd_stats_report(args) -> int:
    records = bench.read_records(args.records)
    algorithms = sorted({r.algorithm for r in records})
    matrix, names = bench.comparison_matrix(records, algorithms)
    if matrix is None or matrix.shape[0] < 2:
        print("not enough fully-ok datasets for a significance report", file=sys.stderr)
        return 1
    report = wilcoxon_holm(matrix, algorithms, alpha=args.alpha)
    text = dumps_json(report.to_dict()) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text, end="")
    print(f"datasets compared: {len(names)}", file=sys.stderr)
    return 0


def _cmd_emit_cdf(args) -> int:
    model = EnsembleModel.from_dict(json.loads(Path(args.model).read_text()))
    groups: dict[str, np.ndarray] = {}
    test = load_dataset(args.data)
    groups["test"] = model.score(test.features)
    if args.train_data:
        train = load_dataset(args.train_data)
        groups = {"train": model.score(train.features), **groups}
    bench.emit_score_cdf(groups, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doust", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="benchmark protocol runs")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)

    p_run = bench_sub.add_parser("run", help="run a benchmark config")
    p_run.add_argument("--config", required=True, help="protocol JSON file")
    p_run.add_argument("--out-dir", default="bench_out")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.set_defaults(func=_cmd_bench_run)

    p_sweep = bench_sub.add_parser("sweep-nu", help="benchmark across a nu grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--grid", type=_float_list, required=True,
                         help="comma-separated nu values")
    p_sweep.add_argument("--out-dir", default="sweep_out")
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.set_defaults(func=_cmd_bench_sweep)

    p_train = sub.add_parser("train", help="train one ensemble on a dataset split")
    p_train.add_argument("--data", required=True)
    p_train.add_argument("--nu", type=float, default=0.5)
    p_train.add_argument("--train-ratio", type=float, default=0.5)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--ensemble-size", type=int, default=100)
    p_train.add_argument("--min-outliers", type=int, default=200)
    p_train.add_argument("--out-model", required=True)
    p_train.add_argument("--out-train", default=None)
    p_train.add_argument("--out-test", default=None)
    p_train.set_defaults(func=_cmd_train)

    p_sim = sub.add_parser("simulate", help="synthetic experiments")
    sim_sub = p_sim.add_subparsers(dest="simulate_command", required=True)

    p_thought = sim_sub.add_parser("thought", help="threshold-choice experiment")
    p_thought.add_argument("--n", type=int, required=True, help="normal sample count")
    p_thought.add_argument("--o", type=int, required=True, help="outlier count")
    p_thought.add_argument("--f", type=float, required=True, help="tail fraction per side")
    p_thought.add_argument("--reps", type=int, default=100)
    p_thought.add_argument("--seed", type=int, default=0)
    p_thought.add_argument("--out", default=None, help="CSV output path")
    p_thought.set_defaults(func=_cmd_simulate_thought)

    p_gauss = sim_sub.add_parser("gaussian", help="simulated Gaussian study")
    p_gauss.add_argument("--n-grid", type=_int_list, required=True,
                         help="comma-separated training sizes")
    p_gauss.add_argument("--nu", type=float, default=0.01)
    p_gauss.add_argument("--reps", type=int, default=30)
    p_gauss.add_argument("--seed", type=int, default=0)
    p_gauss.add_argument("--methods", type=lambda s: s.split(","),
                         default=["doust", "bayes_oracle"],
                         help=f"subset of {','.join(GAUSSIAN_METHODS)}")
    p_gauss.add_argument("--workers", type=int, default=None)
    p_gauss.add_argument("--out", default=None)
    p_gauss.set_defaults(func=_cmd_simulate_gaussian)

    p_stats = sub.add_parser("stats", help="significance reporting")
    stats_sub = p_stats.add_subparsers(dest="stats_command", required=True)
    p_report = stats_sub.add_parser("report", help="report from saved records")
    p_report.add_argument("--records", required=True, help="records.jsonl path")
    p_report.add_argument("--alpha", type=float, default=0.05)
    p_report.add_argument("--out", default=None)
    p_report.set_defaults(func=_cmd_stats_report)

    p_emit = sub.add_parser("emit", help="plot-data emission")
    emit_sub = p_emit.add_subparsers(dest="emit_command", required=True)
    p_cdf = emit_sub.add_parser("cdf", help="empirical score CDFs")
    p_cdf.add_argument("--model", required=True, help="ensemble model JSON")
    p_cdf.add_argument("--data", required=True, help="dataset CSV scored as the test group")
    p_cdf.add_argument("--train-data", default=None, help="optional train-group CSV")
    p_cdf.add_argument("--out", required=True)
    p_cdf.set_defaults(func=_cmd_emit_cdf)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
