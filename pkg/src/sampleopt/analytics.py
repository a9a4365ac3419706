"""Per-group evaluation of analytical functions on samples or full data.

Scalar aggregates produce one entry per group; regressions (single-group
only) produce a coefficient block.  Quantiles use the lower order statistic
at rank ceil(q * n), with no interpolation, so results on resamples are
always elements of the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .sampling import Sample, exhaustive_sample

__all__ = [
    "COMPARATORS",
    "KINDS",
    "AnalyticalFunction",
    "Predicate",
    "InsufficientDataError",
    "ConvergenceError",
    "evaluate",
    "resample_estimates",
    "transform_inconsistent",
    "max_approx",
    "order_statistic_rank",
    "result_length",
]

COMPARATORS = {
    ">": np.greater,
    ">=": np.greater_equal,
    "<": np.less,
    "<=": np.less_equal,
    "==": np.equal,
    "!=": np.not_equal,
}

KINDS = (
    "avg",
    "var",
    "proportion",
    "sum",
    "count",
    "quantile",
    "median",
    "max_approx",
    "linreg",
    "logreg",
)

_SCALAR_KINDS = ("avg", "var", "proportion", "sum", "count", "quantile", "median", "max_approx")


class InsufficientDataError(ValueError):
    """A group block is too small for the requested statistic."""


class ConvergenceError(RuntimeError):
    """Iterative fit did not converge; carries the iteration count."""

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


@dataclass(frozen=True)
class Predicate:
    """(column, comparator, constant) row filter for proportions and counts."""

    column: str
    op: str
    value: float

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.op!r}")

    def mask(self, values: np.ndarray) -> np.ndarray:
        return COMPARATORS[self.op](values, self.value)

    @classmethod
    def parse(cls, text: str) -> "Predicate":
        """Parse e.g. "value>0.5" (two-character comparators checked first)."""
        for op in (">=", "<=", "==", "!=", ">", "<"):
            if op in text:
                col, _, rhs = text.partition(op)
                return cls(column=col.strip(), op=op, value=float(rhs))
        raise ValueError(f"cannot parse predicate {text!r}")

    def __str__(self):
        return f"{self.column}{self.op}{self.value:g}"


@dataclass(frozen=True)
class AnalyticalFunction:
    """An analytical query function plus its per-kind parameters."""

    kind: str
    q: float | None = None
    alpha: float | None = None
    predicate: Predicate | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown function kind {self.kind!r}")
        if self.kind == "quantile":
            if self.q is None or not (0.0 < self.q < 1.0):
                raise ValueError("quantile requires q in (0, 1)")
        if self.kind == "max_approx":
            if self.alpha is None or not (0.0 < self.alpha < 0.5):
                raise ValueError("max_approx requires alpha in (0, 0.5)")
        if self.kind in ("proportion", "count") and self.predicate is None:
            raise ValueError(f"{self.kind} requires a predicate")

    @classmethod
    def avg(cls):
        return cls("avg")

    @classmethod
    def var(cls):
        return cls("var")

    @classmethod
    def proportion(cls, predicate: Predicate):
        return cls("proportion", predicate=predicate)

    @classmethod
    def total(cls):
        """SUM over the measure column."""
        return cls("sum")

    @classmethod
    def count(cls, predicate: Predicate):
        return cls("count", predicate=predicate)

    @classmethod
    def quantile(cls, q: float):
        return cls("quantile", q=q)

    @classmethod
    def median(cls):
        return cls("median")

    @classmethod
    def max_approx(cls, alpha: float = 0.01):
        return cls("max_approx", alpha=alpha)

    @classmethod
    def linreg(cls):
        return cls("linreg")

    @classmethod
    def logreg(cls):
        return cls("logreg")

    @property
    def label(self) -> str:
        if self.kind == "quantile":
            return f"quantile({self.q:g})"
        if self.kind == "max_approx":
            return f"max_approx({self.alpha:g})"
        if self.kind in ("proportion", "count"):
            return f"{self.kind}({self.predicate})"
        return self.kind


def order_statistic_rank(q: float, n: int) -> int:
    """1-based rank ceil(q * n), with a small slack so exact multiples of
    1/n land on their integer despite float rounding."""
    return min(n, max(1, math.ceil(q * n - 1e-12)))


def max_approx(values, alpha: float) -> float:
    """Empirical (1 - alpha) quantile, the usual stand-in for MAX."""
    if not (0.0 < alpha < 0.5):
        raise ValueError("alpha must be in (0, 0.5)")
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty input")
    rank = order_statistic_rank(1.0 - alpha, values.size)
    return float(np.partition(values, rank - 1)[rank - 1])


def transform_inconsistent(fn: AnalyticalFunction, group_sizes):
    """Rewrite SUM/COUNT as their consistent mean-type counterparts.

    Returns (consistent function, per-group scale vector s); the caller
    optimizes the consistent estimator and scales results back with s.
    """
    scales = np.asarray(group_sizes, dtype=np.float64)
    if fn.kind == "sum":
        return AnalyticalFunction.avg(), scales
    if fn.kind == "count":
        return AnalyticalFunction.proportion(fn.predicate), scales
    raise ValueError(f"no transformation: {fn.kind} is already consistent")


def result_length(fn: AnalyticalFunction, num_groups: int, num_measures: int) -> int:
    if fn.kind in _SCALAR_KINDS:
        return num_groups
    return num_measures  # intercept + one slope per feature column


def _as_sample(data, index=None) -> Sample:
    if isinstance(data, Sample):
        return data
    if isinstance(data, Dataset):
        return exhaustive_sample(data, index)
    raise TypeError("expected a Sample or Dataset")


def _quantile_for(fn: AnalyticalFunction) -> float:
    if fn.kind == "median":
        return 0.5
    if fn.kind == "quantile":
        return fn.q
    return 1.0 - fn.alpha  # max_approx


def _predicate_column(fn: AnalyticalFunction, sample: Sample) -> int:
    return sample.measure_index(fn.predicate.column)


def _group_scalar(fn: AnalyticalFunction, col: np.ndarray, pop: float) -> float:
    n = col.size
    if fn.kind == "avg":
        return float(col.mean())
    if fn.kind == "var":
        if n < 2:
            raise InsufficientDataError("variance needs at least 2 values per group")
        return float(col.var(ddof=1))
    if fn.kind in ("quantile", "median", "max_approx"):
        rank = order_statistic_rank(_quantile_for(fn), n)
        return float(np.partition(col, rank - 1)[rank - 1])
    raise AssertionError(fn.kind)


def evaluate(fn: AnalyticalFunction, data, index=None) -> np.ndarray:
    """Plug-in estimate of ``fn`` per group; deterministic given the input.

    Scalar aggregates act on the first measure column unless a predicate
    names another; regressions use all measure columns with the last one as
    the target and are limited to single-group data.
    """
    sample = _as_sample(data, index)
    kind = fn.kind
    if kind in ("sum", "count"):
        base, scales = transform_inconsistent(fn, sample.population_group_sizes)
        return scales * evaluate(base, sample)
    if kind in ("avg", "var", "quantile", "median", "max_approx"):
        out = np.empty(sample.num_groups, dtype=np.float64)
        for g, block in enumerate(sample.group_values):
            out[g] = _group_scalar(fn, block[:, 0], 0.0)
        return out
    if kind == "proportion":
        j = _predicate_column(fn, sample)
        out = np.empty(sample.num_groups, dtype=np.float64)
        for g, block in enumerate(sample.group_values):
            out[g] = float(fn.predicate.mask(block[:, j]).mean())
        return out
    if kind in ("linreg", "logreg"):
        if sample.num_groups != 1:
            raise ValueError("regressions support single-group queries only")
        block = sample.group_values[0]
        if block.shape[1] < 2:
            raise ValueError("regressions need at least 2 measure columns")
        X, y = block[:, :-1], block[:, -1]
        if kind == "linreg":
            return _linreg(X, y)
        return _logreg(X, y)
    raise AssertionError(kind)


def _linreg(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    design = np.column_stack([np.ones(len(X)), X])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    return coef


def _log_loss(design, y, coef):
    eta = design @ coef
    # log(1 + exp(eta)) - y * eta, stabilized
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta))


def _logreg(X: np.ndarray, y: np.ndarray, max_iter: int = 100, tol: float = 1e-8) -> np.ndarray:
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("logreg requires a {0,1} target column")
    design = np.column_stack([np.ones(len(X)), X])
    coef = np.zeros(design.shape[1])
    loss = _log_loss(design, y, coef)
    for it in range(1, max_iter + 1):
        eta = design @ coef
        mu = 1.0 / (1.0 + np.exp(-eta))
        grad = design.T @ (y - mu) / len(y)
        if np.abs(grad).max() <= tol:
            return coef
        w = np.clip(mu * (1.0 - mu), 1e-10, None)
        hess = design.T @ (design * w[:, None]) / len(y)
        step = np.linalg.solve(hess + 1e-12 * np.eye(len(coef)), grad)
        lam = 1.0
        for _ in range(30):  # damping: halve until the loss improves
            trial = coef + lam * step
            trial_loss = _log_loss(design, y, trial)
            if trial_loss <= loss:
                coef, loss = trial, trial_loss
                break
            lam *= 0.5
        else:
            raise ConvergenceError("logreg step search failed", iterations=it)
    raise ConvergenceError("logreg did not converge", iterations=max_iter)


def resample_estimates(fn: AnalyticalFunction, sample: Sample, index_matrices) -> np.ndarray:
    """Estimates of ``fn`` on B resamples given per-group (B, n_i) index
    matrices into the sample's group blocks.

    Matches evaluate() exactly on each resample; vectorized across resamples
    for the aggregate kinds.
    """
    kind = fn.kind
    B = index_matrices[0].shape[0]
    if kind in ("sum", "count"):
        base, scales = transform_inconsistent(fn, sample.population_group_sizes)
        return resample_estimates(base, sample, index_matrices) * scales[None, :]
    if kind in ("avg", "var", "quantile", "median", "max_approx"):
        out = np.empty((B, sample.num_groups), dtype=np.float64)
        for g, block in enumerate(sample.group_values):
            col = np.ascontiguousarray(block[:, 0])
            gathered = col[index_matrices[g]]
            if kind == "avg":
                out[:, g] = gathered.mean(axis=1)
            elif kind == "var":
                if gathered.shape[1] < 2:
                    raise InsufficientDataError("variance needs at least 2 values per group")
                out[:, g] = gathered.var(axis=1, ddof=1)
            else:
                rank = order_statistic_rank(_quantile_for(fn), gathered.shape[1])
                out[:, g] = np.partition(gathered, rank - 1, axis=1)[:, rank - 1]
        return out
    if kind == "proportion":
        j = _predicate_column(fn, sample)
        out = np.empty((B, sample.num_groups), dtype=np.float64)
        for g, block in enumerate(sample.group_values):
            flags = fn.predicate.mask(block[:, j]).astype(np.float64)
            out[:, g] = flags[index_matrices[g]].mean(axis=1)
        return out
    if kind in ("linreg", "logreg"):
        block = sample.group_values[0]
        width = block.shape[1]
        out = np.empty((B, width), dtype=np.float64)
        for b in range(B):
            rows = block[index_matrices[0][b]]
            X, y = rows[:, :-1], rows[:, -1]
            out[b] = _linreg(X, y) if kind == "linreg" else _logreg(X, y)
        return out
    raise AssertionError(kind)
