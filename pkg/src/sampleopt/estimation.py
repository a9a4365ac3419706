"""Error metrics over result vectors and bootstrap error estimation.

The bootstrap draws per-group resamples with replacement, of the same
per-group sizes as the sample (a stratified bootstrap: groups are
independent samples, so pooling would be wrong), evaluates the function on
each resample, and reports the empirical (1 - delta) quantile of the
distances to the sample's own plug-in estimate.  The quantile uses the
conservative upper order statistic at rank ceil((1 - delta) * B).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import analytics
from .analytics import AnalyticalFunction
from .sampling import Sample

__all__ = [
    "L2",
    "LINF",
    "L1",
    "GEOMETRIC_MEAN",
    "MAX_DIFFERENCE",
    "METRICS",
    "ErrorConstraint",
    "BootstrapConfig",
    "metric_eval",
    "bootstrap_error",
    "resample_error_distances",
]

L2 = "l2"
LINF = "linf"
L1 = "l1"
GEOMETRIC_MEAN = "geometric_mean"
MAX_DIFFERENCE = "max_difference"
METRICS = (L2, LINF, L1, GEOMETRIC_MEAN, MAX_DIFFERENCE)

# cap on gathered elements per chunk when vectorizing resamples
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class ErrorConstraint:
    """Error bound with its allowed failure probability."""

    bound: float
    delta: float

    def __post_init__(self):
        if not self.bound > 0:
            raise ValueError("error bound must be positive")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must be in (0, 1)")


@dataclass(frozen=True)
class BootstrapConfig:
    resamples: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.resamples < 1:
            raise ValueError("resamples must be >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


def _check_layout(approx: np.ndarray, truth: np.ndarray):
    if approx.shape != truth.shape:
        raise ValueError(
            f"result layout mismatch: {approx.shape} vs {truth.shape}"
        )


def metric_eval(metric: str, approx, truth) -> float:
    """Distance between an approximate and a reference result vector."""
    approx = np.asarray(approx, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    _check_layout(approx, truth)
    return float(_metric_rows(metric, approx[None, :], truth)[0])


def _metric_rows(metric: str, estimates: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Vectorized metric over rows of (B, L) estimates against one truth."""
    diffs = estimates - truth[None, :]
    if metric == L2:
        return np.sqrt((diffs * diffs).sum(axis=1))
    if metric == LINF:
        return np.abs(diffs).max(axis=1)
    if metric == L1:
        return np.abs(diffs).sum(axis=1)
    if metric == GEOMETRIC_MEAN:
        with np.errstate(divide="ignore"):
            logs = np.log(np.abs(diffs))
        return np.exp(logs.mean(axis=1))  # -inf rows map to 0
    if metric == MAX_DIFFERENCE:
        return diffs.max(axis=1) - diffs.min(axis=1)
    raise ValueError(f"unknown metric {metric!r}")


def _upper_quantile_rank(level: float, count: int) -> int:
    """1-based rank ceil(level * count), clamped to [1, count]."""
    import math

    return min(count, max(1, math.ceil(level * count - 1e-12)))


def resample_error_distances(
    sample: Sample, fn: AnalyticalFunction, metric: str, config: BootstrapConfig
) -> np.ndarray:
    """Distances d(T*_b, T) for B per-group resamples with replacement.

    Resample b draws from a stream derived from (seed, b), so the vector is
    reproducible no matter how resamples would be scheduled; evaluation is
    chunked to bound memory.
    """
    truth = analytics.evaluate(fn, sample)
    sizes = sample.sizes
    B = config.resamples
    children = np.random.SeedSequence(config.seed).spawn(B)
    total = int(sizes.sum())
    chunk = max(1, int(_CHUNK_ELEMENTS // max(total, 1)))
    out = np.empty(B, dtype=np.float64)
    for start in range(0, B, chunk):
        batch = children[start : start + chunk]
        mats = [
            np.empty((len(batch), int(n)), dtype=np.intp) for n in sizes
        ]
        for j, child in enumerate(batch):
            rng = np.random.default_rng(child)
            for g, n in enumerate(sizes):
                mats[g][j] = rng.integers(0, int(n), size=int(n))
        estimates = analytics.resample_estimates(fn, sample, mats)
        out[start : start + len(batch)] = _metric_rows(metric, estimates, truth)
    return out


def bootstrap_error(
    sample: Sample,
    fn: AnalyticalFunction,
    metric: str,
    delta: float,
    config: BootstrapConfig,
) -> float:
    """Estimated error at confidence 1 - delta for ``fn`` on the sample."""
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must be in (0, 1)")
    distances = np.sort(resample_error_distances(sample, fn, metric, config))
    rank = _upper_quantile_rank(1.0 - delta, config.resamples)
    return float(distances[rank - 1])
