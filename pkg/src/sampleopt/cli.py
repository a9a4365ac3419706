"""Command-line surface: generate synthetic data, run the optimizer on a CSV,
evaluate a returned size with simulated confidence, and sweep factors."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import estimation, harness
from .analytics import AnalyticalFunction, Predicate
from .dataset import GeneratorSpec, build_index, generate_synthetic, load_csv, to_csv, true_result
from .engine import ConversionRequest, SearchConfig, SearchStatus, optimize_sample_size, optimize_with_metric

EXIT_CODES = {
    SearchStatus.SATISFIED: 0,
    SearchStatus.UNRECOVERABLE_FAILURE: 2,
    SearchStatus.POPULATION_EXHAUSTED: 3,
    SearchStatus.ITERATION_CAP_EXCEEDED: 4,
}


def parse_function(text: str) -> AnalyticalFunction:
    """name or name:arg, e.g. avg, quantile:0.9, max:0.01, proportion:value>0."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "avg":
        return AnalyticalFunction.avg()
    if name == "var":
        return AnalyticalFunction.var()
    if name == "median":
        return AnalyticalFunction.median()
    if name == "sum":
        return AnalyticalFunction.total()
    if name == "quantile":
        return AnalyticalFunction.quantile(float(arg))
    if name == "max":
        return AnalyticalFunction.max_approx(float(arg) if arg else 0.01)
    if name == "proportion":
        return AnalyticalFunction.proportion(Predicate.parse(arg))
    if name == "count":
        return AnalyticalFunction.count(Predicate.parse(arg))
    if name == "linreg":
        return AnalyticalFunction.linreg()
    if name == "logreg":
        return AnalyticalFunction.logreg()
    raise ValueError(f"unknown function {text!r}")


def parse_metric(text: str) -> ConversionRequest | str:
    """Metric spec for run/evaluate; bound attached later."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name in ("l2", "linf", "l1", "ordering", "maxdiff", "lp"):
        return (name, float(arg) if arg else None)
    raise ValueError(f"unknown metric {text!r}")


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    raise TypeError(f"not json-able: {type(value)!r}")


def _outcome_payload(outcome) -> dict:
    return {
        "status": outcome.status.value,
        "metric": outcome.metric,
        "error_bound": outcome.error_bound,
        "requested_bound": outcome.requested_bound,
        "delta": outcome.delta,
        "sizes": None if outcome.sizes is None else outcome.sizes.tolist(),
        "total_size": None if outcome.sizes is None else int(outcome.sizes.sum()),
        "error": outcome.error,
        "result": None if outcome.result is None else outcome.result.tolist(),
        "iterations": outcome.iterations,
        "init_length": outcome.init_length,
        "prediction_iterations": outcome.prediction_iterations(),
        "r2": outcome.final_r2,
        "params": None if outcome.final_params is None else outcome.final_params.coef.tolist(),
    }


def _add_data_args(p: argparse.ArgumentParser):
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument("--group-col", required=True)
    p.add_argument("--measure-cols", required=True, nargs="+")
    p.add_argument("--fn", required=True, help="avg|var|median|sum|quantile:q|max[:a]|proportion:PRED|count:PRED|linreg|logreg")
    p.add_argument("--metric", default="l2", help="l2|linf|l1|lp:p|maxdiff|ordering")
    p.add_argument("--eps", type=float, default=None, help="absolute error bound")
    p.add_argument("--eps-rel", type=float, default=None, help="bound relative to a pilot estimate of the result norm")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--B", type=int, default=500, dest="resamples")
    p.add_argument("--init-lo", type=int, default=4000)
    p.add_argument("--init-hi", type=int, default=8000)
    p.add_argument("--init-len", type=int, default=None)
    p.add_argument("--tau", type=float, default=0.01, help="slope-sum failure threshold")
    p.add_argument("--kmax", type=int, default=100)
    p.add_argument("--pilot-reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)


def _config_from(args) -> SearchConfig:
    return SearchConfig(
        resamples=args.resamples,
        init_low=args.init_lo,
        init_high=args.init_hi,
        init_length=args.init_len,
        min_slope_sum=args.tau,
        max_iterations=args.kmax,
        pilot_reps=args.pilot_reps,
        seed=args.seed,
    )


def _pilot_norm(dataset, index, fn, config) -> float:
    from .engine import _pilot_result

    pilot = _pilot_result(dataset, index, fn, config)
    norm = float(np.sqrt((pilot * pilot).sum()))
    if norm == 0.0:
        raise ValueError("pilot estimate is zero; use an absolute --eps")
    return norm


def _run_from_args(args):
    dataset = load_csv(args.data, args.group_col, args.measure_cols)
    index = build_index(dataset)
    fn = parse_function(args.fn)
    metric, p_arg = parse_metric(args.metric)
    config = _config_from(args)
    if metric == "ordering":
        if args.eps is not None or args.eps_rel is not None:
            raise ValueError("ordering derives its bound from the data; omit --eps/--eps-rel")
        request = ConversionRequest("ordering")
        outcome = optimize_with_metric(dataset, index, fn, request, args.delta, config)
        return dataset, index, fn, outcome
    if (args.eps is None) == (args.eps_rel is None):
        raise ValueError("exactly one of --eps / --eps-rel is required")
    bound = args.eps
    if bound is None:
        bound = args.eps_rel * _pilot_norm(dataset, index, fn, config)
    if metric == "l2":
        outcome = optimize_sample_size(dataset, index, fn, bound, args.delta, config)
    else:
        name = {"maxdiff": "max_difference"}.get(metric, metric)
        request = ConversionRequest(name, bound=bound, p=p_arg)
        outcome = optimize_with_metric(dataset, index, fn, request, args.delta, config)
    return dataset, index, fn, outcome


def cmd_generate(args) -> int:
    spec = GeneratorSpec(
        distribution=args.dist,
        params=tuple(args.params),
        rows_per_group=args.rows,
        num_groups=args.groups,
        group_bias=args.bias,
        seed=args.seed,
    )
    to_csv(generate_synthetic(spec), args.out)
    print(json.dumps({"out": args.out, "rows": args.rows * args.groups, "groups": args.groups}))
    return 0


def cmd_run(args) -> int:
    _, _, _, outcome = _run_from_args(args)
    print(json.dumps(_outcome_payload(outcome), default=_jsonable))
    return EXIT_CODES[outcome.status]


def cmd_evaluate(args) -> int:
    dataset, index, fn, outcome = _run_from_args(args)
    payload = _outcome_payload(outcome)
    if outcome.status is SearchStatus.SATISFIED:
        truth = true_result(dataset, fn, index)
        conf, se = harness.simulated_confidence(
            dataset, index, fn, estimation.L2, outcome.error_bound,
            outcome.sizes, args.reps, args.seed, truth,
        )
        payload["confidence"] = conf
        payload["confidence_se"] = se
        payload["reps"] = args.reps
    print(json.dumps(payload, default=_jsonable))
    return EXIT_CODES[outcome.status]


def cmd_bench(args) -> int:
    base = GeneratorSpec(
        distribution=args.dist,
        params=tuple(args.params),
        rows_per_group=args.rows,
        num_groups=args.groups,
        group_bias=args.bias,
        seed=args.seed,
    )
    config = SearchConfig(
        resamples=args.resamples,
        init_low=args.init_lo,
        init_high=args.init_hi,
        init_length=args.init_len,
        seed=args.seed,
    )
    algorithms = tuple(args.algorithms)
    spec = harness.SweepSpec(
        factor=args.sweep,
        values=tuple(args.values),
        base=base,
        fn=parse_function(args.fn),
        eps_rel=args.eps_rel,
        delta=args.delta,
        alg_reps=args.reps,
        conf_reps=args.conf_reps,
        config=config,
        algorithms=algorithms,
        seed=args.seed,
    )
    rows = harness.run_sweep(spec)
    harness.write_sweep_csv(rows, args.out)
    print(json.dumps({"out": args.out, "rows": len(rows)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sampleopt",
        description="error-bounded sample-size optimization for grouped analytical queries",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic grouped CSV")
    g.add_argument("--dist", required=True, choices=["normal", "exponential", "uniform", "pareto"])
    g.add_argument("--params", required=True, nargs="+", type=float)
    g.add_argument("--rows", required=True, type=int, help="rows per group")
    g.add_argument("--groups", type=int, default=1)
    g.add_argument("--bias", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="optimize the sample size for a query on a CSV")
    _add_data_args(r)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="run, then verify the size with fresh draws")
    _add_data_args(e)
    e.add_argument("--reps", type=int, default=1000)
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench", help="sweep a factor and write a CSV report")
    b.add_argument("--sweep", required=True, choices=["eps_rel", "delta", "groups", "rows"])
    b.add_argument("--values", required=True, nargs="+", type=float)
    b.add_argument("--dist", default="normal")
    b.add_argument("--params", nargs="+", type=float, default=[1.0, 1.0])
    b.add_argument("--rows", type=int, default=1_000_000)
    b.add_argument("--groups", type=int, default=1)
    b.add_argument("--bias", type=float, default=0.0)
    b.add_argument("--fn", default="avg")
    b.add_argument("--eps-rel", type=float, default=0.01)
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--reps", type=int, default=3)
    b.add_argument("--conf-reps", type=int, default=200)
    b.add_argument("--algorithms", nargs="+", default=["optimizer", "clt"])
    b.add_argument("--B", type=int, default=500, dest="resamples")
    b.add_argument("--init-lo", type=int, default=4000)
    b.add_argument("--init-hi", type=int, default=8000)
    b.add_argument("--init-len", type=int, default=None)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
