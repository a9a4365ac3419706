"""Evaluation and benchmarking: simulated confidence, a normality-based
baseline sizer, function-by-distribution grids, and factor sweeps.

Simulated confidence redraws many independent samples at a fixed size vector
and reports how often the error against the exact full-data result stays
within the bound.  Sizes in reports are desk scale (a million rows by
default); wall times are only meaningful relative to one another within a
single report.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from . import estimation
from .analytics import AnalyticalFunction
from .dataset import Dataset, GeneratorSpec, GroupIndex, build_index, generate_synthetic, stack_groups, true_result
from .engine import ConversionRequest, SearchConfig, SearchStatus, optimize_sample_size, optimize_with_metric
from .sampling import stratified_sample

__all__ = [
    "z_score",
    "clt_baseline_size",
    "error_draws",
    "simulated_confidence",
    "GridCase",
    "EvalReport",
    "run_grid",
    "SweepSpec",
    "run_sweep",
    "write_sweep_csv",
    "config_hash",
]

_CONF_TAG = 23
_GRID_TAG = 29
_SWEEP_TAG = 31


def z_score(delta: float) -> float:
    """Two-sided standard normal critical value at confidence 1 - delta."""
    return NormalDist().inv_cdf(1.0 - delta / 2.0)


def clt_baseline_size(group_sigmas, bound: float, delta: float, group_sizes) -> np.ndarray:
    """Closed-form per-group sizes for AVG under a normality assumption.

    The squared-error budget is split evenly, bound / sqrt(m) per group, so
    n_i = ceil((z * sigma_i * sqrt(m) / bound) ** 2), clamped to the group.
    """
    sigmas = np.asarray(group_sigmas, dtype=np.float64)
    caps = np.asarray(group_sizes, dtype=np.int64)
    if not bound > 0:
        raise ValueError("error bound must be positive")
    m = sigmas.size
    z = z_score(delta)
    raw = np.ceil((z * sigmas * math.sqrt(m) / bound) ** 2)
    return np.clip(raw, 1, caps).astype(np.int64)


def error_draws(
    dataset: Dataset,
    index: GroupIndex,
    fn: AnalyticalFunction,
    sizes,
    metrics,
    reps: int,
    seed: int,
    truth=None,
) -> np.ndarray:
    """(reps, len(metrics)) errors of fresh samples at a fixed size vector."""
    if truth is None:
        truth = true_result(dataset, fn, index)
    truth = np.asarray(truth, dtype=np.float64)
    out = np.empty((reps, len(metrics)), dtype=np.float64)
    for r in range(reps):
        draw_seed = int(
            np.random.SeedSequence(entropy=(int(seed), _CONF_TAG, r)).generate_state(1, np.uint64)[0]
        )
        sample = stratified_sample(dataset, index, sizes, draw_seed)
        from .analytics import evaluate

        est = evaluate(fn, sample)
        for j, metric in enumerate(metrics):
            out[r, j] = estimation.metric_eval(metric, est, truth)
    return out


def simulated_confidence(
    dataset: Dataset,
    index: GroupIndex,
    fn: AnalyticalFunction,
    metric: str,
    bound: float,
    sizes,
    reps: int,
    seed: int,
    truth=None,
):
    """Fraction of ``reps`` independent draws whose error is within the bound,
    with its binomial standard error."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    errs = error_draws(dataset, index, fn, sizes, [metric], reps, seed, truth)[:, 0]
    c_hat = float((errs <= bound).mean())
    se = math.sqrt(c_hat * (1.0 - c_hat) / reps)
    return c_hat, se


def config_hash(obj) -> str:
    """Stable short hash of any json-able configuration mapping."""

    def _default(v):
        if dataclasses.is_dataclass(v):
            return dataclasses.asdict(v)
        if isinstance(v, np.ndarray):
            return v.tolist()
        if isinstance(v, (np.integer, np.floating)):
            return v.item()
        return str(v)

    blob = json.dumps(obj, sort_keys=True, default=_default).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class GridCase:
    """One function-by-distribution evaluation case.

    ``specs`` holds one generator per group block; pieces are stacked into a
    single table.  eps_rel scales the bound off the norm of the exact result.
    """

    name: str
    fn: AnalyticalFunction
    specs: tuple[GeneratorSpec, ...]
    eps_rel: float = 0.01

    def build(self) -> Dataset:
        pieces = [generate_synthetic(s) for s in self.specs]
        if len(pieces) == 1:
            return pieces[0]
        return stack_groups(pieces)

    @property
    def bootstrap_inconsistent(self) -> bool:
        """Cases the bootstrap is known not to cover: max-style quantile
        proxies and pareto tails with shape <= 2 (infinite variance)."""
        if self.fn.kind == "max_approx":
            return True
        return any(
            s.distribution == "pareto" and s.params[0] <= 2.0 for s in self.specs
        )


@dataclass
class RunRow:
    status: str
    total_size: int | None
    wall_time: float
    confidence: float | None
    confidence_se: float | None
    r2: float | None
    prediction_iterations: int
    outcome: object = field(repr=False, default=None)


@dataclass
class EvalReport:
    case: str
    eps: float
    delta: float
    flagged_inconsistent: bool
    status_counts: dict
    confidence: float | None
    confidence_se: float | None
    r2: float | None
    size_mean: float | None
    size_std: float | None
    time_mean: float
    time_std: float
    config_hash: str
    runs: list = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        d = {k: v for k, v in dataclasses.asdict(self).items() if k != "runs"}
        return d


def _mean_std(values):
    if not values:
        return None, None
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def evaluate_case(
    case: GridCase,
    *,
    delta: float = 0.05,
    alg_reps: int = 1,
    conf_reps: int = 1000,
    config: SearchConfig | None = None,
    seed: int = 0,
) -> EvalReport:
    """Run the optimizer on one case and verify its returned sizes."""
    if config is None:
        config = SearchConfig()
    dataset = case.build()
    index = build_index(dataset)
    truth = true_result(dataset, case.fn, index)
    norm = float(np.sqrt((truth * truth).sum()))
    if norm == 0.0:
        raise ValueError(f"case {case.name}: exact result is zero, relative bound undefined")
    eps = case.eps_rel * norm
    rows: list[RunRow] = []
    for rep in range(alg_reps):
        run_seed = int(
            np.random.SeedSequence(entropy=(int(seed), _GRID_TAG, rep)).generate_state(1, np.uint64)[0]
        )
        t0 = time.perf_counter()
        outcome = optimize_sample_size(
            dataset, index, case.fn, eps, delta, dataclasses.replace(config, seed=run_seed)
        )
        wall = time.perf_counter() - t0
        conf = conf_se = None
        total = None
        if outcome.status is SearchStatus.SATISFIED:
            total = int(outcome.sizes.sum())
            conf, conf_se = simulated_confidence(
                dataset, index, case.fn, estimation.L2, eps, outcome.sizes,
                conf_reps, run_seed, truth,
            )
        rows.append(
            RunRow(
                status=outcome.status.value,
                total_size=total,
                wall_time=wall,
                confidence=conf,
                confidence_se=conf_se,
                r2=outcome.final_r2,
                prediction_iterations=outcome.prediction_iterations(),
                outcome=outcome,
            )
        )
    counts: dict[str, int] = {}
    for row in rows:
        counts[row.status] = counts.get(row.status, 0) + 1
    sizes = [r.total_size for r in rows if r.total_size is not None]
    confs = [r.confidence for r in rows if r.confidence is not None]
    r2s = [r.r2 for r in rows if r.r2 is not None]
    size_mean, size_std = _mean_std(sizes)
    time_mean, time_std = _mean_std([r.wall_time for r in rows])
    return EvalReport(
        case=case.name,
        eps=eps,
        delta=delta,
        flagged_inconsistent=case.bootstrap_inconsistent,
        status_counts=counts,
        confidence=float(np.mean(confs)) if confs else None,
        confidence_se=float(np.mean([r.confidence_se for r in rows if r.confidence_se is not None])) if confs else None,
        r2=float(np.mean(r2s)) if r2s else None,
        size_mean=size_mean,
        size_std=size_std,
        time_mean=time_mean,
        time_std=time_std,
        config_hash=config_hash(
            {"config": config, "delta": delta, "eps": eps, "case": case.name, "seed": seed}
        ),
        runs=rows,
    )


def run_grid(
    cases,
    *,
    delta: float = 0.05,
    alg_reps: int = 1,
    conf_reps: int = 1000,
    config: SearchConfig | None = None,
    seed: int = 0,
) -> list[EvalReport]:
    """Evaluate every case; per-case failures land in the report rows."""
    return [
        evaluate_case(
            case, delta=delta, alg_reps=alg_reps, conf_reps=conf_reps,
            config=config, seed=seed + i,
        )
        for i, case in enumerate(cases)
    ]


@dataclass(frozen=True)
class SweepSpec:
    """One-factor sweep: vary eps_rel, delta, groups, or rows while holding
    the rest at their defaults."""

    factor: str
    values: tuple
    base: GeneratorSpec
    fn: AnalyticalFunction
    eps_rel: float = 0.01
    delta: float = 0.05
    alg_reps: int = 3
    conf_reps: int = 200
    config: SearchConfig = field(default_factory=SearchConfig)
    algorithms: tuple[str, ...] = ("optimizer", "clt", "ordering")
    seed: int = 0

    def __post_init__(self):
        if self.factor not in ("eps_rel", "delta", "groups", "rows"):
            raise ValueError(f"unknown sweep factor {self.factor!r}")
        if not self.values:
            raise ValueError("values must be non-empty")


def _sweep_instance(spec: SweepSpec, value):
    eps_rel, delta, base = spec.eps_rel, spec.delta, spec.base
    if spec.factor == "eps_rel":
        eps_rel = float(value)
    elif spec.factor == "delta":
        delta = float(value)
    elif spec.factor == "groups":
        base = dataclasses.replace(base, num_groups=int(value))
    elif spec.factor == "rows":
        base = dataclasses.replace(base, rows_per_group=int(value))
    return eps_rel, delta, base


def run_sweep(spec: SweepSpec) -> list[dict]:
    """One row per (factor value, repetition, algorithm)."""
    rows: list[dict] = []
    hash_ = config_hash({"spec": spec, "config": spec.config})
    for vi, value in enumerate(spec.values):
        eps_rel, delta, base = _sweep_instance(spec, value)
        dataset = generate_synthetic(base)
        index = build_index(dataset)
        truth = true_result(dataset, spec.fn, index)
        norm = float(np.sqrt((truth * truth).sum()))
        eps = eps_rel * norm
        sigmas = np.array(
            [dataset.measures[dataset.group_ids == g, 0].std() for g in range(dataset.num_groups)]
        )
        for rep in range(spec.alg_reps):
            run_seed = int(
                np.random.SeedSequence(entropy=(spec.seed, _SWEEP_TAG, vi, rep)).generate_state(1, np.uint64)[0]
            )
            for algorithm in spec.algorithms:
                if algorithm == "ordering" and dataset.num_groups < 2:
                    continue
                row = {
                    "factor": spec.factor,
                    "value": value,
                    "rep": rep,
                    "algorithm": algorithm,
                    "total_size": None,
                    "wall_time": None,
                    "confidence": None,
                    "status": None,
                    "config_hash": hash_,
                }
                t0 = time.perf_counter()
                if algorithm == "optimizer":
                    outcome = optimize_sample_size(
                        dataset, index, spec.fn, eps, delta,
                        dataclasses.replace(spec.config, seed=run_seed),
                    )
                    row["status"] = outcome.status.value
                    sizes = outcome.sizes
                elif algorithm == "clt":
                    if spec.fn.kind != "avg":
                        raise ValueError("the clt baseline supports avg only")
                    sizes = clt_baseline_size(sigmas, eps, delta, dataset.group_sizes)
                    row["status"] = "satisfied"
                elif algorithm == "ordering":
                    outcome = optimize_with_metric(
                        dataset, index, spec.fn, ConversionRequest("ordering"), delta,
                        dataclasses.replace(spec.config, seed=run_seed),
                    )
                    row["status"] = outcome.status.value
                    sizes = outcome.sizes
                else:
                    raise ValueError(f"unknown algorithm {algorithm!r}")
                row["wall_time"] = time.perf_counter() - t0
                if sizes is not None and row["status"] == "satisfied":
                    row["total_size"] = int(np.asarray(sizes).sum())
                    conf, _ = simulated_confidence(
                        dataset, index, spec.fn, estimation.L2, eps, sizes,
                        spec.conf_reps, run_seed, truth,
                    )
                    row["confidence"] = conf
                rows.append(row)
    return rows


def write_sweep_csv(rows, path) -> None:
    import csv

    fields = ["factor", "value", "rep", "algorithm", "total_size", "wall_time", "confidence", "status", "config_hash"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
