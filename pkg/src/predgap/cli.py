"""The ``pg2`` command line: gap computation, ranking, benchmarking, eval.

All commands are deterministic given explicit seeds; the benchmark reduces
its per-pair results in pair-index order, so the worker-pool size never
changes the output bytes.  Wall-clock timings are only recorded when
``--timing`` is passed, because timing fields would break byte-identical
reports.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, load_csv, sample_pairs
from .errors import EXIT_OK, PredgapError, ValidationError, exit_code_for
from .exact import pg2_exact
from .metrics import mean_pgi2, nmae, randomization_rmse
from .model import load_ensemble, save_ensemble
from .perturb import PerturbationSpec, spec_from_config
from .ranking import Ranking, greedy_pg2_ranking, load_attributions, ranking_from_attribution
from .sampling import EstimatorConfig, pg2_sampled


def format_value(value: float) -> str:
    """Nine significant digits, with an all-zeros rendering for exact zero."""
    if value == 0.0:
        return "0.000000000"
    return format(value, "#.9g")


def _parse_int_list(text: str, flag: str) -> list[int]:
    if not text.strip():
        return []
    try:
        return [int(part) for part in text.split(",")]
    except ValueError:
        raise ValidationError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise ValidationError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def _load_spec(args, num_features: int) -> PerturbationSpec:
    if getattr(args, "dist_config", None):
        try:
            obj = json.loads(Path(args.dist_config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read distribution config: {exc}") from None
        return spec_from_config(obj, num_features)
    if getattr(args, "sigma", None) is None:
        raise ValidationError("either --sigma or --dist-config is required")
    return PerturbationSpec.gaussian(args.sigma, num_features)


def _load_data(args) -> tuple[Dataset, np.ndarray | None]:
    exclude = None
    if getattr(args, "exclude_columns", None):
        exclude = [name for name in args.exclude_columns.split(",") if name]
    return load_csv(
        args.data, label_column=getattr(args, "label_column", None), exclude=exclude
    )


def _rankings_from_file(path, num_features: int, num_instances: int) -> list[Ranking]:
    try:
        lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    except OSError as exc:
        raise ValidationError(f"cannot read rankings file: {exc}") from None
    rankings = [Ranking(order=tuple(int(v) for v in ln.split(","))) for ln in lines]
    for r in rankings:
        if r.num_features != num_features:
            raise ValidationError(
                f"ranking row has {r.num_features} entries, model has {num_features} features"
            )
    if len(rankings) != num_instances:
        raise ValidationError(
            f"{len(rankings)} ranking rows for {num_instances} data rows"
        )
    return rankings


# ---------------------------------------------------------------------------
# pg2 / convert-model
# ---------------------------------------------------------------------------

def cmd_pg2(args) -> int:
    ensemble = load_ensemble(args.model)
    dataset, _ = _load_data(args)
    if not 0 <= args.point_index < dataset.num_instances:
        raise ValidationError(
            f"--point-index {args.point_index} outside 0..{dataset.num_instances - 1}"
        )
    x = dataset.instance(args.point_index)
    features = _parse_int_list(args.features, "--features")
    spec = _load_spec(args, ensemble.num_features)
    if args.method == "exact":
        value = pg2_exact(ensemble, x, features, spec)
    else:
        config = EstimatorConfig(
            method=args.method, iterations=args.iterations, seed=args.seed
        )
        value = pg2_sampled(ensemble, x, features, spec, config)
    print(format_value(value))
    return EXIT_OK


def cmd_convert_model(args) -> int:
    ensemble = load_ensemble(
        args.input,
        format="xgboost-dump",
        num_features=args.num_features,
        base_score=args.base_score,
    )
    save_ensemble(ensemble, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# rank
# ---------------------------------------------------------------------------

def cmd_rank(args) -> int:
    ensemble = load_ensemble(args.model)
    dataset, _ = _load_data(args)
    if dataset.num_features != ensemble.num_features:
        raise ValidationError(
            f"data has {dataset.num_features} features, model expects {ensemble.num_features}"
        )
    if args.method == "greedy-pg2":
        spec = _load_spec(args, ensemble.num_features)
        rankings = [
            greedy_pg2_ranking(ensemble, dataset.instance(i), spec)
            for i in range(dataset.num_instances)
        ]
    else:
        if not args.attributions:
            raise ValidationError("--method from-attribution requires --attributions")
        phi = load_attributions(args.attributions)
        if phi.shape != (dataset.num_instances, ensemble.num_features):
            raise ValidationError(
                f"attribution matrix {phi.shape} does not match "
                f"({dataset.num_instances}, {ensemble.num_features})"
            )
        rankings = [ranking_from_attribution(row) for row in phi]
    text = "\n".join(",".join(str(i) for i in r.order) for r in rankings) + "\n"
    if args.out and args.out != "-":
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def cmd_eval(args) -> int:
    ensemble = load_ensemble(args.model)
    dataset, labels = _load_data(args)
    if dataset.num_features != ensemble.num_features:
        raise ValidationError(
            f"data has {dataset.num_features} features, model expects {ensemble.num_features}"
        )
    if args.rankings:
        rankings = _rankings_from_file(
            args.rankings, ensemble.num_features, dataset.num_instances
        )
    elif args.method == "greedy-pg2":
        if args.sigma_rank is None:
            raise ValidationError("--method greedy-pg2 requires --sigma-rank")
        rank_spec = PerturbationSpec.gaussian(args.sigma_rank, ensemble.num_features)
        rankings = [
            greedy_pg2_ranking(ensemble, dataset.instance(i), rank_spec)
            for i in range(dataset.num_instances)
        ]
    else:
        raise ValidationError("provide --rankings FILE or --method greedy-pg2")

    if args.metric == "pgi2":
        if args.sigma_metric is None:
            raise ValidationError("--metric pgi2 requires --sigma-metric")
        spec = PerturbationSpec.gaussian(args.sigma_metric, ensemble.num_features)
        value = mean_pgi2(ensemble, dataset, rankings, spec)
    else:
        if args.k is None:
            raise ValidationError("--metric randomize-rmse requires --k")
        use_labels = None
        if args.rmse_against == "labels":
            if labels is None:
                raise ValidationError("--rmse-against labels requires --label-column")
            use_labels = labels
        value = randomization_rmse(
            ensemble,
            dataset,
            rankings,
            k=args.k,
            samples=args.samples,
            seed=args.seed,
            labels=use_labels,
        )
    print(format_value(value))
    return EXIT_OK


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

_BENCH: dict | None = None


def _init_bench_worker(payload: dict) -> None:
    global _BENCH
    _BENCH = payload


def _pair_query(pair_idx: int):
    ctx = _BENCH
    pair = ctx["pairs"][pair_idx]
    x = ctx["dataset"].instance(pair.instance_index)
    return x, pair.feature_set


def _bench_exact_task(task) -> float:
    sigma_idx, pair_idx = task
    x, feats = _pair_query(pair_idx)
    return pg2_exact(_BENCH["ensemble"], x, feats, _BENCH["specs"][sigma_idx])


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0])


def _bench_sample_task(task) -> float:
    sigma_idx, iterations, method, rep, pair_idx = task
    ctx = _BENCH
    x, feats = _pair_query(pair_idx)
    if not feats:
        return 0.0
    seed = _derived_seed(ctx["seed"], sigma_idx, iterations, rep, pair_idx)
    config = EstimatorConfig(method=method, iterations=iterations, seed=seed)
    return pg2_sampled(ctx["ensemble"], x, feats, ctx["specs"][sigma_idx], config)


class _PairPool:
    """Maps benchmark tasks over pairs, inline or across processes."""

    def __init__(self, payload: dict, workers: int):
        self._executor = None
        self._workers = max(1, workers)
        if workers > 1:
            try:
                mp_context = get_context("fork")
            except ValueError:
                mp_context = get_context("spawn")
            self._executor = ProcessPoolExecutor(
                max_workers=workers,
                mp_context=mp_context,
                initializer=_init_bench_worker,
                initargs=(payload,),
            )
        else:
            _init_bench_worker(payload)

    def map(self, fn, tasks: list) -> list:
        if self._executor is None:
            return [fn(t) for t in tasks]
        chunk = max(1, len(tasks) // (4 * self._workers))
        return list(self._executor.map(fn, tasks, chunksize=chunk))

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()


def run_benchmark(
    ensemble,
    dataset: Dataset,
    sigmas: list[float],
    iteration_grid: list[int],
    pairs: int,
    seed: int,
    repetitions: int = 1,
    methods: tuple[str, ...] = ("mc", "qmc"),
    sizes: list[int] | None = None,
    workers: int = 1,
    timing: bool = False,
) -> dict:
    """NMAE of each sampler against the exact algorithm over random pairs."""
    if not iteration_grid:
        raise ValidationError("iteration grid must be non-empty")
    if repetitions < 1:
        raise ValidationError(f"repetitions must be >= 1, got {repetitions}")
    if dataset.num_features != ensemble.num_features:
        raise ValidationError(
            f"data has {dataset.num_features} features, model expects {ensemble.num_features}"
        )
    pair_list = sample_pairs(dataset, ensemble.num_features, pairs, seed=seed, sizes=sizes)
    specs = [PerturbationSpec.gaussian(s, ensemble.num_features) for s in sigmas]
    payload = {
        "ensemble": ensemble,
        "dataset": dataset,
        "pairs": pair_list,
        "specs": specs,
        "seed": seed,
    }
    pool = _PairPool(payload, workers)
    try:
        entries = []
        for sigma_idx, sigma in enumerate(sigmas):
            started = time.perf_counter()
            truth = np.asarray(
                pool.map(_bench_exact_task, [(sigma_idx, p) for p in range(pairs)])
            )
            exact_elapsed = time.perf_counter() - started
            if float(np.sum(np.abs(truth))) == 0.0:
                print(
                    f"warning: every exact value is zero for sigma={sigma}; "
                    "skipping this batch (NMAE undefined)",
                    file=sys.stderr,
                )
                continue
            for iterations in iteration_grid:
                for method in methods:
                    reps = repetitions if method == "mc" else 1
                    started = time.perf_counter()
                    scores = []
                    for rep in range(reps):
                        estimates = np.asarray(
                            pool.map(
                                _bench_sample_task,
                                [
                                    (sigma_idx, iterations, method, rep, p)
                                    for p in range(pairs)
                                ],
                            )
                        )
                        scores.append(nmae(truth, estimates))
                    sampler_elapsed = time.perf_counter() - started
                    entry = {
                        "method": method,
                        "iterations": iterations,
                        "sigma": sigma,
                        "nmae": float(np.mean(scores)),
                        "pairs": pairs,
                    }
                    if timing:
                        entry["wall_time_exact"] = exact_elapsed
                        entry["wall_time_sampler"] = sampler_elapsed
                    entries.append(entry)
    finally:
        pool.close()
    return {
        "pairs": pairs,
        "seed": seed,
        "repetitions": repetitions,
        "sigmas": sigmas,
        "iteration_grid": iteration_grid,
        "methods": list(methods),
        "entries": entries,
    }


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=1) + "\n"


def report_to_csv(report: dict) -> str:
    lines = ["method,iterations,sigma,nmae"]
    for entry in report["entries"]:
        lines.append(
            f"{entry['method']},{entry['iterations']},{entry['sigma']!r},{entry['nmae']!r}"
        )
    return "\n".join(lines) + "\n"


def cmd_benchmark(args) -> int:
    ensemble = load_ensemble(args.model)
    dataset, _ = _load_data(args)
    sigmas = _parse_float_list(args.sigmas, "--sigmas")
    grid = _parse_int_list(args.iteration_grid, "--iteration-grid")
    sizes = _parse_int_list(args.sizes, "--sizes") if args.sizes else None
    methods = tuple(args.methods.split(","))
    for m in methods:
        if m not in ("mc", "qmc"):
            raise ValidationError(f"--methods entries must be mc or qmc, got {m!r}")
    report = run_benchmark(
        ensemble,
        dataset,
        sigmas=sigmas,
        iteration_grid=grid,
        pairs=args.pairs,
        seed=args.seed,
        repetitions=args.repetitions,
        methods=methods,
        sizes=sizes,
        workers=args.workers,
        timing=args.timing,
    )
    text = report_to_json(report)
    if args.out and args.out != "-":
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.csv_out:
        Path(args.csv_out).write_text(report_to_csv(report))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pg2",
        description="Exact and sampled squared prediction gaps for tree ensembles.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_label=True):
        p.add_argument("--model", required=True, help="canonical model JSON")
        p.add_argument("--data", required=True, help="dataset CSV with a header row")
        if with_label:
            p.add_argument("--label-column", default=None, help="column to exclude from features")
            p.add_argument(
                "--exclude-columns", default=None,
                help="comma-separated columns (e.g. categorical ones) to drop",
            )

    p = sub.add_parser("pg2", help="compute one squared prediction gap")
    add_common(p)
    p.add_argument("--point-index", type=int, required=True)
    p.add_argument("--features", default="", help="comma-separated feature indices (empty = none)")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--dist-config", default=None, help="JSON perturbation config")
    p.add_argument("--method", choices=["exact", "mc", "qmc"], default="exact")
    p.add_argument("--iterations", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_pg2)

    p = sub.add_parser("rank", help="write per-instance feature rankings as CSV")
    add_common(p)
    p.add_argument("--method", choices=["greedy-pg2", "from-attribution"], default="greedy-pg2")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--dist-config", default=None)
    p.add_argument("--attributions", default=None, help="attribution sidecar (CSV or JSON)")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("benchmark", help="NMAE of samplers against the exact algorithm")
    add_common(p)
    p.add_argument("--sigmas", default="0.1,0.3,1.0")
    p.add_argument(
        "--iteration-grid",
        default="100,500,1000,2000,4000,6000,8000,10000,15000,20000,25000,30000,35000",
    )
    p.add_argument("--pairs", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=1, help="MC repetitions per NMAE point")
    p.add_argument("--sizes", default=None, help="subset-size cycle (default 1..d)")
    p.add_argument("--methods", default="mc,qmc")
    p.add_argument("--workers", type=int, default=max(1, os.cpu_count() or 1))
    p.add_argument("--timing", action="store_true", help="include wall-clock fields (breaks byte determinism)")
    p.add_argument("--out", default="-", help="JSON report path, '-' for stdout")
    p.add_argument("--csv-out", default=None, help="also write plot-ready CSV")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("eval", help="aggregate PGI2 or randomization RMSE for rankings")
    add_common(p)
    p.add_argument("--rankings", default=None, help="CSV of per-instance permutations")
    p.add_argument("--method", choices=["greedy-pg2"], default=None)
    p.add_argument("--sigma-rank", type=float, default=None, help="sigma for greedy ranking")
    p.add_argument("--metric", choices=["pgi2", "randomize-rmse"], required=True)
    p.add_argument("--sigma-metric", type=float, default=None, help="sigma' for the PGI2 metric")
    p.add_argument("--k", type=int, default=None, help="top-k features to randomize")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rmse-against", choices=["prediction", "labels"], default="prediction")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("convert-model", help="convert an XGBoost JSON dump to the canonical format")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--num-features", type=int, default=None)
    p.add_argument("--base-score", type=float, default=0.0)
    p.set_defaults(func=cmd_convert_model)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PredgapError as exc:
        print(f"pg2: error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
