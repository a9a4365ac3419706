"""Iterative sample-size search: draw, estimate, refit, predict, repeat.

The loop runs in two phases.  Initialization draws ``init_length`` size
vectors whose coordinates are each either end of the initialization interval
(low with probability high / (low + high)), the two-point design that
minimizes the variance of the later fit for a fixed interval.  Every
iteration draws a stratified sample, estimates its error with the bootstrap
under the squared-error (L2) metric, appends the record to the profile, and
stops as soon as the estimate is within the bound.  After initialization the
next size comes from fitting the log-linear error model, running the failure
diagnostic, and solving for the cheapest size meeting the bound; a
monotone-growth guard keeps every group strictly increasing while the bound
is unmet, and a run where every group is pinned at its population size ends
as population-exhausted.

Other error metrics ride on the same loop by converting their bound to an
equivalent squared-error bound first (identity for the max metric, 1/sqrt(m)
for the L1 metric, 1/sqrt(2) for the pairwise max-difference metric, and the
minimum adjacent gap of a pilot estimate, over sqrt(2), for order
preservation).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import analytics, estimation, model
from .analytics import AnalyticalFunction
from .dataset import Dataset, GroupIndex
from .estimation import BootstrapConfig
from .model import ErrorProfile, ErrorRecord, ModelParams, UnrecoverableFit
from .sampling import Sample, stratified_sample

__all__ = [
    "SearchStatus",
    "SearchConfig",
    "IterationRecord",
    "SearchOutcome",
    "ConversionRequest",
    "IndistinguishableGroupsError",
    "initialize_sizes",
    "convert_bound",
    "order_bound",
    "optimize_sample_size",
    "optimize_with_metric",
]

CONVERTIBLE_METRICS = ("l2", "linf", "lp", "l1", "max_difference", "ordering")

# entropy tags for the engine's independent seed streams
_INIT_TAG = 3
_SAMPLE_TAG = 5
_BOOT_TAG = 7
_PILOT_TAG = 11


class IndistinguishableGroupsError(ValueError):
    """Two groups of a pilot estimate tie exactly; no ordering bound exists."""


class SearchStatus(str, Enum):
    SATISFIED = "satisfied"
    UNRECOVERABLE_FAILURE = "unrecoverable_failure"
    ITERATION_CAP_EXCEEDED = "iteration_cap_exceeded"
    POPULATION_EXHAUSTED = "population_exhausted"


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the search loop.

    init_length defaults to max(20, 5 * (m + 1)) when left unset; it must be
    at least m + 2 so the first fit is determined.
    """

    resamples: int = 500
    init_low: int = 4000
    init_high: int = 8000
    init_length: int | None = None
    min_slope_sum: float = 0.01
    max_iterations: int = 100
    pilot_reps: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.resamples < 1:
            raise ValueError("resamples must be >= 1")
        if not (1 <= self.init_low <= self.init_high):
            raise ValueError("need 1 <= init_low <= init_high")
        if not self.min_slope_sum > 0:
            raise ValueError("min_slope_sum must be positive")
        if self.pilot_reps < 1:
            raise ValueError("pilot_reps must be >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    def resolved_init_length(self, num_groups: int) -> int:
        if self.init_length is not None:
            return self.init_length
        return max(20, 5 * (num_groups + 1))


@dataclass(frozen=True)
class IterationRecord:
    """One loop iteration for the trace log."""

    index: int
    phase: str  # "init" or "predict"
    sizes: tuple[int, ...] | None
    total_size: int | None
    error: float | None
    params: tuple[float, ...] | None  # raw fitted coefficients, predict phase
    r2: float | None
    pre_guard_sizes: tuple[int, ...] | None
    guard_raised: bool
    slopes_recovered: bool
    touched_rows: int | None


@dataclass(frozen=True)
class SearchOutcome:
    """Terminal state of one search run.

    status SATISFIED implies error <= error_bound.  ``error_bound`` is the
    bound the loop actually enforced (after any metric conversion or
    sum/count rescaling); ``requested_bound`` echoes the caller's original
    bound when they differ.
    """

    status: SearchStatus
    error_bound: float
    delta: float
    metric: str
    sizes: np.ndarray | None
    error: float | None
    sample: Sample | None
    result: np.ndarray | None
    trace: tuple[IterationRecord, ...]
    profile: ErrorProfile
    final_params: ModelParams | None
    final_r2: float | None
    failure_params: ModelParams | None
    iterations: int
    init_length: int
    requested_bound: float | None = None
    bound_scale: float | None = None

    def prediction_iterations(self) -> int:
        return sum(1 for rec in self.trace if rec.phase == "predict")

    def trace_jsonl(self) -> str:
        lines = []
        for i, rec in enumerate(self.trace):
            row = {
                "iteration": rec.index,
                "phase": rec.phase,
                "sizes": list(rec.sizes) if rec.sizes is not None else None,
                "error": rec.error,
                "params": list(rec.params) if rec.params is not None else None,
                "r2": rec.r2,
                "status": self.status.value if i == len(self.trace) - 1 else "continue",
            }
            lines.append(json.dumps(row))
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class ConversionRequest:
    """A bound stated under some supported metric, to be mapped to an
    equivalent squared-error bound."""

    metric: str
    bound: float | None = None
    p: float | None = None

    def __post_init__(self):
        if self.metric not in CONVERTIBLE_METRICS:
            raise ValueError(f"unsupported metric {self.metric!r}")
        if self.metric == "ordering":
            if self.bound is not None:
                raise ValueError("ordering derives its bound from a pilot estimate")
        else:
            if self.bound is None or not self.bound > 0:
                raise ValueError("bound must be positive")
        if self.metric == "lp":
            if self.p is None or self.p < 1:
                raise ValueError("lp requires p >= 1")


def _engine_seed(master: int, tag: int, k: int) -> int:
    state = np.random.SeedSequence(entropy=(master, tag, k)).generate_state(1, np.uint64)
    return int(state[0])


def initialize_sizes(init_low: int, init_high: int, length: int, num_groups: int, seed: int) -> np.ndarray:
    """The initialization design: a (length, num_groups) matrix whose entries
    are init_low with probability init_high / (init_low + init_high), else
    init_high, independently.  Deterministic per seed."""
    if not (1 <= init_low <= init_high):
        raise ValueError("need 1 <= init_low <= init_high")
    if length < 1 or num_groups < 1:
        raise ValueError("length and num_groups must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), _INIT_TAG)))
    low_prob = init_high / (init_low + init_high)
    pick_low = rng.random((length, num_groups)) < low_prob
    return np.where(pick_low, init_low, init_high).astype(np.int64)


def order_bound(approx_result) -> float:
    """Largest squared-error radius that provably preserves the sort order of
    a result vector: the minimum adjacent gap after sorting, over sqrt(2)."""
    values = np.asarray(approx_result, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValueError("ordering needs at least 2 scalar group results")
    gaps = np.diff(np.sort(values))
    smallest = float(gaps.min())
    if smallest == 0.0:
        raise IndistinguishableGroupsError("indistinguishable groups: tied results")
    return smallest / math.sqrt(2.0)


def convert_bound(request: ConversionRequest, num_groups: int, pilot=None) -> float:
    """Equivalent squared-error bound for a request under another metric."""
    metric, bound = request.metric, request.bound
    if metric == "ordering":
        if pilot is None:
            raise ValueError("ordering conversion requires a pilot result")
        return order_bound(pilot)
    if metric in ("l2", "linf"):
        return bound
    if metric == "lp":
        if request.p >= 2:
            return bound
        # for 1 <= p < 2 the p-norm exceeds the 2-norm by at most
        # m ** (1/p - 1/2)
        return bound / num_groups ** (1.0 / request.p - 0.5)
    if metric == "l1":
        return bound / math.sqrt(num_groups)
    if metric == "max_difference":
        return bound / math.sqrt(2.0)
    raise ValueError(f"unsupported metric {metric!r}")


def _final_fit(profile: ErrorProfile):
    try:
        params = model.fit_wls(profile)
    except (model.UnderdeterminedProfileError, model.DegenerateProfileError):
        return None, None
    try:
        r2 = model.r2_score(profile, params)
    except (ValueError, model.UndefinedRSquaredError):
        r2 = None
    return params, r2


def optimize_sample_size(
    dataset: Dataset,
    index: GroupIndex,
    fn: AnalyticalFunction,
    error_bound: float,
    delta: float,
    config: SearchConfig | None = None,
) -> SearchOutcome:
    """Find a near-minimal stratified sample whose estimated squared error is
    within ``error_bound`` at confidence 1 - delta.

    All failure modes are statuses, not exceptions.  The run is a pure
    function of (dataset, fn, bounds, config): every random stream is derived
    from the config seed.
    """
    if config is None:
        config = SearchConfig()
    if not error_bound > 0:
        raise ValueError("error bound must be positive")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    m = dataset.num_groups
    min_group = int(dataset.group_sizes.min())
    if config.init_high > min_group:
        raise ValueError(
            f"init_high {config.init_high} exceeds the smallest group ({min_group})"
        )
    length = config.resolved_init_length(m)
    if length < m + 2:
        raise ValueError(f"init_length must be >= {m + 2} for {m} groups")
    if config.max_iterations <= length:
        raise ValueError("max_iterations must exceed init_length")

    requested = fn
    scale = None
    target_bound = float(error_bound)
    if fn.kind in ("sum", "count"):
        fn, scales = analytics.transform_inconsistent(fn, dataset.group_sizes)
        scale = float(scales.max())
        target_bound = target_bound / scale

    # drawn out to the iteration cap: entries past init_length only feed the
    # fallback below when an all-identical initialization leaves the first
    # fit rank deficient
    init_plan = initialize_sizes(
        config.init_low, config.init_high, config.max_iterations, m, config.seed
    )
    profile = ErrorProfile(m)
    trace: list[IterationRecord] = []
    prev_sizes: np.ndarray | None = None

    def _outcome(status, sizes=None, error=None, sample=None, failure_params=None):
        final_params, final_r2 = _final_fit(profile)
        result = None
        if sample is not None:
            result = analytics.evaluate(requested, sample)
        return SearchOutcome(
            status=status,
            error_bound=target_bound,
            delta=delta,
            metric=estimation.L2,
            sizes=sizes,
            error=error,
            sample=sample,
            result=result,
            trace=tuple(trace),
            profile=profile,
            final_params=final_params,
            final_r2=final_r2,
            failure_params=failure_params,
            iterations=len(trace),
            init_length=length,
            requested_bound=float(error_bound) if scale is not None else None,
            bound_scale=scale,
        )

    for k in range(1, config.max_iterations + 1):
        params_tuple = None
        r2 = None
        pre_guard = None
        guard_raised = False
        recovered = False
        if k <= length:
            phase = "init"
            sizes = init_plan[k - 1].copy()
        else:
            phase = "predict"
            try:
                fitted = model.fit_wls(profile)
            except (model.DegenerateProfileError, model.UnderdeterminedProfileError):
                # the initialization happened to repeat one size vector; keep
                # initializing until the profile supports a fit
                phase = "init"
                sizes = init_plan[k - 1].copy()
                fitted = None
        if phase == "predict":
            params_tuple = tuple(fitted.coef.tolist())
            try:
                r2 = model.r2_score(profile, fitted)
            except model.UndefinedRSquaredError:
                r2 = None
            verdict = model.diagnose(fitted, config.min_slope_sum)
            if isinstance(verdict, UnrecoverableFit):
                trace.append(
                    IterationRecord(
                        index=k, phase=phase, sizes=None, total_size=None,
                        error=None, params=params_tuple, r2=r2,
                        pre_guard_sizes=None, guard_raised=False,
                        slopes_recovered=False, touched_rows=None,
                    )
                )
                return _outcome(
                    SearchStatus.UNRECOVERABLE_FAILURE, failure_params=fitted
                )
            recovered = verdict is not fitted
            predicted = model.predict_sizes(verdict, target_bound, dataset.group_sizes)
            pre_guard = tuple(int(v) for v in predicted)
            # strict growth while the bound is unmet, capped by the groups
            sizes = np.maximum(predicted, prev_sizes + 1)
            sizes = np.minimum(sizes, dataset.group_sizes)
            guard_raised = bool((predicted < prev_sizes + 1).any())
            if np.array_equal(sizes, prev_sizes):
                trace.append(
                    IterationRecord(
                        index=k, phase=phase, sizes=tuple(int(v) for v in sizes),
                        total_size=int(sizes.sum()), error=None,
                        params=params_tuple, r2=r2, pre_guard_sizes=pre_guard,
                        guard_raised=guard_raised, slopes_recovered=recovered,
                        touched_rows=None,
                    )
                )
                return _outcome(SearchStatus.POPULATION_EXHAUSTED)

        sample = stratified_sample(
            dataset, index, sizes, _engine_seed(config.seed, _SAMPLE_TAG, k)
        )
        boot = BootstrapConfig(
            resamples=config.resamples, seed=_engine_seed(config.seed, _BOOT_TAG, k)
        )
        err = estimation.bootstrap_error(sample, fn, estimation.L2, delta, boot)
        trace.append(
            IterationRecord(
                index=k, phase=phase, sizes=tuple(int(v) for v in sizes),
                total_size=int(sizes.sum()), error=err, params=params_tuple,
                r2=r2, pre_guard_sizes=pre_guard, guard_raised=guard_raised,
                slopes_recovered=recovered, touched_rows=sample.touched_rows,
            )
        )
        if err > 0.0:
            profile.append(ErrorRecord(sizes, err))
        if err <= target_bound:
            return _outcome(
                SearchStatus.SATISFIED, sizes=sizes, error=err, sample=sample
            )
        prev_sizes = sizes

    return _outcome(SearchStatus.ITERATION_CAP_EXCEEDED)


def _pilot_result(dataset, index, fn, config: SearchConfig) -> np.ndarray:
    """Average of pilot estimates at the top of the initialization interval."""
    sizes = np.minimum(
        np.full(dataset.num_groups, config.init_high, dtype=np.int64),
        dataset.group_sizes,
    )
    acc = None
    for r in range(config.pilot_reps):
        sample = stratified_sample(
            dataset, index, sizes, _engine_seed(config.seed, _PILOT_TAG, r)
        )
        est = analytics.evaluate(fn, sample)
        acc = est if acc is None else acc + est
    return acc / config.pilot_reps


def optimize_with_metric(
    dataset: Dataset,
    index: GroupIndex,
    fn: AnalyticalFunction,
    request: ConversionRequest,
    delta: float,
    config: SearchConfig | None = None,
) -> SearchOutcome:
    """Run the search for a bound stated under another metric.

    The bound is converted to an equivalent squared-error bound and the run
    delegated to optimize_sample_size; with the same seed, an identity
    conversion reproduces the direct run exactly.  Ordering requests first
    average pilot_reps pilot estimates and derive the bound from their gaps.
    """
    if config is None:
        config = SearchConfig()
    pilot = None
    if request.metric == "ordering":
        pilot = _pilot_result(dataset, index, fn, config)
    converted = convert_bound(request, dataset.num_groups, pilot)
    outcome = optimize_sample_size(dataset, index, fn, converted, delta, config)
    return dataclasses.replace(
        outcome, metric=request.metric, requested_bound=request.bound
    )
