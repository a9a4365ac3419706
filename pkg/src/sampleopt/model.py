"""Log-linear error model: profile records, weighted fitting, the failure
diagnostic, and closed-form size prediction.

The model predicts the log of the estimated error from a size vector n as

    H(n) = c0 - sum_i c_i * log(n_i)

with coefficients (c0, c1, ..., cm).  Fitting minimizes squared residuals
against log error targets, weighting each record by its total sample size
(records drawn at larger sizes approximate the modeled error better, so they
earn larger weights).  Given positive slopes, minimizing total size subject
to H(n) <= log(eps) has the closed form

    n_i = c_i * exp((c0 - sum_j c_j log c_j - log eps) / sum_j c_j),

whose pre-rounding vector meets the constraint with equality.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ErrorRecord",
    "ErrorProfile",
    "ModelParams",
    "UnrecoverableFit",
    "DiagnosticConfig",
    "DegenerateProfileError",
    "UnderdeterminedProfileError",
    "UndefinedRSquaredError",
    "design_row",
    "fit_wls",
    "fit_ols",
    "r2_score",
    "diagnose",
    "predict_log_error",
    "predict_sizes_real",
    "predict_sizes",
]

_RANK_RTOL = 1e-10


class DegenerateProfileError(ValueError):
    """Design matrix is rank deficient (e.g. duplicate size vectors only)."""


class UnderdeterminedProfileError(ValueError):
    """Fewer records than coefficients."""


class UndefinedRSquaredError(ValueError):
    """All log-error targets are equal; r^2 has no meaning."""


@dataclass(frozen=True)
class ErrorRecord:
    """One (size vector, estimated error) observation; error must be positive
    because fitting works on log targets."""

    sizes: np.ndarray
    error: float

    def __post_init__(self):
        sizes = np.asarray(self.sizes, dtype=np.int64)
        if (sizes < 1).any():
            raise ValueError("sizes must be >= 1")
        if not self.error > 0:
            raise ValueError("estimated error must be positive")
        sizes.setflags(write=False)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "error", float(self.error))

    @property
    def total_size(self) -> int:
        return int(self.sizes.sum())


class ErrorProfile:
    """Append-only list of error records sharing one group count."""

    def __init__(self, num_groups: int):
        if num_groups < 1:
            raise ValueError("num_groups must be >= 1")
        self._num_groups = int(num_groups)
        self._records: list[ErrorRecord] = []

    @property
    def num_groups(self) -> int:
        return self._num_groups

    @property
    def records(self) -> tuple[ErrorRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def append(self, record: ErrorRecord) -> None:
        if record.sizes.shape != (self._num_groups,):
            raise ValueError("record group count does not match the profile")
        self._records.append(record)

    def design_matrix(self) -> np.ndarray:
        return np.vstack([design_row(r.sizes) for r in self._records])

    def log_targets(self) -> np.ndarray:
        return np.log([r.error for r in self._records])

    def weights(self) -> np.ndarray:
        return np.array([r.total_size for r in self._records], dtype=np.float64)

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {"iteration": i + 1, "sizes": r.sizes.tolist(), "error": r.error}
            )
            for i, r in enumerate(self._records)
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def write_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str, num_groups: int | None = None) -> "ErrorProfile":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows:
            raise ValueError("empty profile log")
        if num_groups is None:
            num_groups = len(rows[0]["sizes"])
        profile = cls(num_groups)
        for row in rows:
            profile.append(ErrorRecord(np.asarray(row["sizes"]), row["error"]))
        return profile


@dataclass(frozen=True)
class ModelParams:
    """Coefficients (intercept, one slope per group) of the error model."""

    coef: np.ndarray

    def __post_init__(self):
        coef = np.asarray(self.coef, dtype=np.float64)
        if coef.ndim != 1 or coef.size < 2:
            raise ValueError("need an intercept plus at least one slope")
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)

    @property
    def intercept(self) -> float:
        return float(self.coef[0])

    @property
    def slopes(self) -> np.ndarray:
        return self.coef[1:]

    @property
    def num_groups(self) -> int:
        return self.coef.size - 1

    def slope_sum(self) -> float:
        return float(self.slopes.sum())


@dataclass(frozen=True)
class UnrecoverableFit:
    """Diagnostic verdict: slopes sum below threshold, so growing the sample
    would not shrink the estimated error.  Carries the offending estimate."""

    params: ModelParams


@dataclass(frozen=True)
class DiagnosticConfig:
    min_slope_sum: float = 0.01

    def __post_init__(self):
        if not self.min_slope_sum > 0:
            raise ValueError("min_slope_sum must be positive")


def design_row(sizes) -> np.ndarray:
    """Regression row (1, -log n_1, ..., -log n_m) for a size vector."""
    sizes = np.asarray(sizes, dtype=np.float64)
    if (sizes < 1).any():
        raise ValueError("sizes must be >= 1")
    return np.concatenate([[1.0], -np.log(sizes)])


def fit_wls(profile: ErrorProfile, weights=None) -> ModelParams:
    """Weighted least squares fit of the error model to a profile.

    Default weights are each record's total sample size.  Solved through an
    orthogonal factorization of the scaled design rather than the normal
    equations; rank is judged at relative tolerance 1e-10.
    """
    k, m = len(profile), profile.num_groups
    if k < m + 1:
        raise UnderdeterminedProfileError(
            f"need at least {m + 1} records to fit {m + 1} coefficients, have {k}"
        )
    design = profile.design_matrix()
    targets = profile.log_targets()
    w = profile.weights() if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (k,) or (w <= 0).any():
        raise ValueError("weights must be positive, one per record")
    sw = np.sqrt(w)
    coef, _, rank, _ = np.linalg.lstsq(design * sw[:, None], targets * sw, rcond=_RANK_RTOL)
    if rank < m + 1:
        raise DegenerateProfileError("degenerate profile: design matrix is rank deficient")
    return ModelParams(coef)


def fit_ols(profile: ErrorProfile) -> ModelParams:
    """Unweighted fit; identical to fit_wls with equal weights."""
    return fit_wls(profile, weights=np.ones(len(profile)))


def r2_score(profile: ErrorProfile, params: ModelParams) -> float:
    """Coefficient of determination on log-error targets, unweighted."""
    if len(profile) < 2:
        raise ValueError("r2 needs at least 2 records")
    targets = profile.log_targets()
    fitted = profile.design_matrix() @ params.coef
    ss_tot = float(((targets - targets.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise UndefinedRSquaredError("undefined r2: all log-error targets are equal")
    ss_res = float(((targets - fitted) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def diagnose(params: ModelParams, min_slope_sum: float = 0.01):
    """Failure check and recovery for a fitted model.

    Slope sum at or below the threshold means the estimated error would barely
    respond to any size increase: unrecoverable, returned as a verdict value.
    A non-positive individual slope (skewed group) is recovered by replacing
    every slope with the slope mean, which only grows the prediction.
    Idempotent.
    """
    slopes = params.slopes
    if slopes.sum() <= min_slope_sum:
        return UnrecoverableFit(params)
    if slopes.min() <= 0.0:
        mean = slopes.mean()
        coef = np.concatenate([[params.intercept], np.full(params.num_groups, mean)])
        return ModelParams(coef)
    return params


def predict_log_error(params: ModelParams, sizes) -> float:
    """Model value H(n) at a size vector."""
    return float(params.coef @ design_row(sizes))


def predict_sizes_real(params: ModelParams, error_bound: float) -> np.ndarray:
    """Pre-rounding minimizer of total size subject to H(n) <= log(bound).

    Requires strictly positive slopes (run diagnose first).  The returned
    vector satisfies H(n) = log(bound) exactly and its entries are
    proportional to the slopes.
    """
    if not error_bound > 0:
        raise ValueError("error bound must be positive")
    slopes = params.slopes
    if (slopes <= 0).any():
        raise ValueError("prediction requires positive slopes; run diagnose first")
    total = slopes.sum()
    exponent = (params.intercept - float(slopes @ np.log(slopes)) - math.log(error_bound)) / total
    with np.errstate(over="ignore"):
        return slopes * np.exp(exponent)


def predict_sizes(params: ModelParams, error_bound: float, group_sizes=None) -> np.ndarray:
    """Predicted optimal size vector, rounded and clamped to [1, group size]."""
    raw = predict_sizes_real(params, error_bound)
    rounded = np.round(raw)
    if group_sizes is None:
        if not np.isfinite(rounded).all() or (rounded >= 2**62).any():
            raise ValueError("predicted sizes overflow; pass group_sizes to clamp")
        return np.clip(rounded, 1, None).astype(np.int64)
    upper = np.asarray(group_sizes, dtype=np.float64)
    return np.clip(rounded, 1, upper).astype(np.int64)
