"""Columnar grouped datasets: synthetic generation, CSV round-trips, group
indexing, and exact full-data query results."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CsvFormatError",
    "Dataset",
    "GroupIndex",
    "GeneratorSpec",
    "generate_synthetic",
    "load_csv",
    "to_csv",
    "stack_groups",
    "build_index",
    "true_result",
]

DISTRIBUTIONS = ("normal", "exponential", "uniform", "pareto")

# entropy tags keep generator streams disjoint from sampler streams when a
# caller reuses one master seed
_GEN_STREAM_TAG = 101


class CsvFormatError(ValueError):
    """Malformed CSV input; ``row`` is the 1-based data row when known."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable columnar table: one group label per row plus real measures.

    Group ids are dense integers in first-appearance order of the labels.
    Every group is non-empty and the per-group counts sum to the row count.
    Arrays are frozen after construction and safe to share across readers.
    """

    group_ids: np.ndarray
    group_names: tuple[str, ...]
    measures: np.ndarray
    measure_names: tuple[str, ...]

    def __post_init__(self):
        gids = np.ascontiguousarray(self.group_ids, dtype=np.int64)
        vals = np.ascontiguousarray(self.measures, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2:
            raise ValueError("measures must be a 1-D or 2-D array")
        if vals.shape[0] != gids.shape[0]:
            raise ValueError("measure rows do not match group column length")
        if vals.shape[1] != len(self.measure_names):
            raise ValueError("measure_names does not match measure columns")
        if gids.shape[0] == 0:
            raise ValueError("empty dataset")
        m = len(self.group_names)
        if gids.min() < 0 or gids.max() >= m:
            raise ValueError("group id out of range")
        sizes = np.bincount(gids, minlength=m)
        if (sizes == 0).any():
            raise ValueError("every group must be non-empty")
        gids.setflags(write=False)
        vals.setflags(write=False)
        sizes.setflags(write=False)
        object.__setattr__(self, "group_ids", gids)
        object.__setattr__(self, "measures", vals)
        object.__setattr__(self, "group_names", tuple(self.group_names))
        object.__setattr__(self, "measure_names", tuple(self.measure_names))
        object.__setattr__(self, "group_sizes", sizes)

    group_sizes: np.ndarray = None  # derived in __post_init__

    @property
    def num_rows(self) -> int:
        return int(self.group_ids.shape[0])

    @property
    def num_groups(self) -> int:
        return len(self.group_names)

    def measure(self, name: str) -> np.ndarray:
        """Single measure column by name."""
        try:
            j = self.measure_names.index(name)
        except ValueError:
            raise KeyError(f"unknown measure column {name!r}") from None
        return self.measures[:, j]

    @classmethod
    def from_columns(cls, labels, measures: dict) -> "Dataset":
        """Build from a label sequence and named measure columns.

        Labels map to dense ids in first-appearance order.
        """
        labels = [str(v) for v in labels]
        order = dict.fromkeys(labels)
        names = tuple(order.keys())
        lut = {name: i for i, name in enumerate(names)}
        gids = np.fromiter((lut[v] for v in labels), dtype=np.int64, count=len(labels))
        cols = tuple(measures.keys())
        mat = np.column_stack([np.asarray(measures[c], dtype=np.float64) for c in cols])
        return cls(group_ids=gids, group_names=names, measures=mat, measure_names=cols)


@dataclass(frozen=True, eq=False)
class GroupIndex:
    """Per-group sorted row positions (one inverted list per group value).

    Lists are disjoint, each list i has length group_sizes[i], and their
    union is exactly range(num_rows).
    """

    lists: tuple[np.ndarray, ...]

    def __post_init__(self):
        for arr in self.lists:
            arr.setflags(write=False)

    @property
    def num_groups(self) -> int:
        return len(self.lists)


def build_index(dataset: Dataset) -> GroupIndex:
    """Invert the group column into per-group sorted position lists."""
    order = np.argsort(dataset.group_ids, kind="stable")
    bounds = np.cumsum(dataset.group_sizes)[:-1]
    return GroupIndex(lists=tuple(np.split(order, bounds)))


@dataclass(frozen=True)
class GeneratorSpec:
    """Recipe for a synthetic grouped dataset.

    distribution: one of "normal" (mu, sigma), "exponential" (scale),
        "uniform" (lo, hi), "pareto" (shape, minimum fixed at 1).
    rows_per_group: rows drawn i.i.d. for each group.
    group_bias: per-group additive offset, given as a fraction of the
        distribution mean (sample mean when the mean is undefined).  A scalar
        b expands to the ladder (0, b, 2b, ...), so adjacent groups differ by
        b times the base result.
    seed: non-negative 64-bit master seed; generation is bit-reproducible.
    """

    distribution: str
    params: tuple[float, ...]
    rows_per_group: int
    num_groups: int = 1
    group_bias: float | tuple[float, ...] = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.distribution!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if self.rows_per_group < 1:
            raise ValueError("rows_per_group must be >= 1")
        if self.num_groups < 1:
            raise ValueError("num_groups must be >= 1")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        kind = self.distribution
        if kind == "normal":
            if len(params) != 2 or params[1] <= 0:
                raise ValueError("normal needs (mu, sigma) with sigma > 0")
        elif kind == "exponential":
            if len(params) != 1 or params[0] <= 0:
                raise ValueError("exponential needs (scale,) with scale > 0")
        elif kind == "uniform":
            if len(params) != 2 or params[0] >= params[1]:
                raise ValueError("uniform needs (lo, hi) with lo < hi")
        elif kind == "pareto":
            if len(params) != 1 or params[0] <= 0:
                raise ValueError("pareto needs (shape,) with shape > 0")

    @property
    def bias_fractions(self) -> tuple[float, ...]:
        if isinstance(self.group_bias, tuple):
            if len(self.group_bias) != self.num_groups:
                raise ValueError("group_bias length must equal num_groups")
            return tuple(float(b) for b in self.group_bias)
        b = float(self.group_bias)
        return tuple(i * b for i in range(self.num_groups))


def analytic_mean(distribution: str, params: tuple[float, ...]) -> float | None:
    """Mean of the named distribution, or None when it is undefined."""
    if distribution == "normal":
        return params[0]
    if distribution == "exponential":
        return params[0]
    if distribution == "uniform":
        return (params[0] + params[1]) / 2.0
    if distribution == "pareto":
        shape = params[0]
        if shape > 1.0:
            return shape / (shape - 1.0)
        return None
    raise ValueError(f"unknown distribution {distribution!r}")


def _draw(rng: np.random.Generator, distribution: str, params, size: int) -> np.ndarray:
    if distribution == "normal":
        return rng.normal(params[0], params[1], size)
    if distribution == "exponential":
        return rng.exponential(params[0], size)
    if distribution == "uniform":
        return rng.uniform(params[0], params[1], size)
    if distribution == "pareto":
        # classical Pareto with minimum 1: (1 - U) ** (-1/shape)
        return 1.0 + rng.pareto(params[0], size)
    raise ValueError(f"unknown distribution {distribution!r}")


def generate_synthetic(spec: GeneratorSpec) -> Dataset:
    """Draw a grouped dataset from the spec; deterministic for a fixed seed.

    Each group gets an independent stream, values are drawn i.i.d. from the
    named distribution and then shifted by bias * base result, where the base
    result is the distribution mean (or the group's sample mean when the mean
    is undefined, as for pareto with shape <= 1).
    """
    fractions = spec.bias_fractions
    rows = spec.rows_per_group
    cols = []
    gids = np.repeat(np.arange(spec.num_groups, dtype=np.int64), rows)
    base = analytic_mean(spec.distribution, spec.params)
    for g in range(spec.num_groups):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=(spec.seed, _GEN_STREAM_TAG, g))
        )
        values = _draw(rng, spec.distribution, spec.params, rows)
        ref = base if base is not None else float(values.mean())
        values = values + fractions[g] * ref
        cols.append(values)
    names = tuple(f"g{g}" for g in range(spec.num_groups))
    return Dataset(
        group_ids=gids,
        group_names=names,
        measures=np.concatenate(cols),
        measure_names=("value",),
    )


def stack_groups(datasets, labels=None) -> Dataset:
    """Concatenate datasets group-wise into one multi-group dataset.

    Groups are renumbered in order across the inputs; all inputs must share
    measure columns.  Used to combine per-distribution pieces into one table.
    """
    datasets = list(datasets)
    if not datasets:
        raise ValueError("need at least one dataset")
    names = datasets[0].measure_names
    for d in datasets[1:]:
        if d.measure_names != names:
            raise ValueError("measure columns differ between datasets")
    total_groups = sum(d.num_groups for d in datasets)
    if labels is None:
        labels = tuple(f"g{i}" for i in range(total_groups))
    if len(labels) != total_groups:
        raise ValueError("labels length must equal the combined group count")
    gid_parts, val_parts = [], []
    offset = 0
    for d in datasets:
        gid_parts.append(d.group_ids + offset)
        val_parts.append(d.measures)
        offset += d.num_groups
    return Dataset(
        group_ids=np.concatenate(gid_parts),
        group_names=tuple(labels),
        measures=np.vstack(val_parts),
        measure_names=names,
    )


def load_csv(path, group_column: str, measure_columns) -> Dataset:
    """Read a header-ed, comma-separated UTF-8 file into a Dataset.

    Group labels map to dense ids in first-appearance order.  Parse failures
    report the 1-based data row.
    """
    measure_columns = list(measure_columns)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise CsvFormatError("empty file: no header row")
        missing = [c for c in [group_column, *measure_columns] if c not in header]
        if missing:
            raise CsvFormatError(f"missing columns: {', '.join(missing)}")
        g_at = header.index(group_column)
        m_at = [header.index(c) for c in measure_columns]
        labels: list[str] = []
        columns: list[list[float]] = [[] for _ in measure_columns]
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) <= max(g_at, *m_at):
                raise CsvFormatError(f"short row at row {row_no}", row=row_no)
            labels.append(row[g_at])
            for out, j, name in zip(columns, m_at, measure_columns):
                cell = row[j]
                try:
                    out.append(float(cell))
                except ValueError:
                    raise CsvFormatError(
                        f"cannot parse measure {name!r} value {cell!r} at row {row_no}",
                        row=row_no,
                    ) from None
    if not labels:
        raise CsvFormatError("empty dataset: header only")
    return Dataset.from_columns(labels, dict(zip(measure_columns, columns)))


def to_csv(dataset: Dataset, path, group_column: str = "group") -> None:
    """Write the dataset in the same CSV shape load_csv reads."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([group_column, *dataset.measure_names])
        names = dataset.group_names
        for gid, row in zip(dataset.group_ids, dataset.measures):
            writer.writerow([names[gid], *(repr(float(v)) for v in row)])


def true_result(dataset: Dataset, fn, index: GroupIndex | None = None) -> np.ndarray:
    """Exact per-group result of an analytical function on the full data."""
    from . import analytics, sampling

    view = sampling.exhaustive_sample(dataset, index)
    return analytics.evaluate(fn, view)
