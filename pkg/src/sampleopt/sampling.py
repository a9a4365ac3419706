"""Fixed-size uniform stratified sampling through a group index.

Each group is drawn independently and without replacement.  Low sampling
rates walk the group's inverted list with geometric skips: the skip process
selects list entries like a coin-flip scan but only ever touches the
selected candidates, and the candidate set is then trimmed (or topped up)
uniformly to the exact requested size, which preserves uniformity over
k-subsets.  Rates above GAP_RATE_LIMIT use a partial shuffle of the list
held as a sparse displacement map, so only the drawn entries materialize.
Either way the work per call is O(total sample size) in expectation,
independent of the table size; the ``touched_rows`` counter on the returned
sample records the entries actually considered so callers can verify that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, GroupIndex, build_index

__all__ = ["GAP_RATE_LIMIT", "Sample", "stratified_sample", "exhaustive_sample", "total_size"]

GAP_RATE_LIMIT = 0.1

_SAMPLE_STREAM_TAG = 211


@dataclass(frozen=True, eq=False)
class Sample:
    """Per-group measure values and row positions drawn from a dataset.

    Positions within a group are distinct members of that group's inverted
    list.  ``population_group_sizes`` keeps the full per-group row counts so
    estimators that need them (scaled sums and counts) stay self-contained.
    """

    group_values: tuple[np.ndarray, ...]
    positions: tuple[np.ndarray, ...]
    measure_names: tuple[str, ...]
    population_group_sizes: np.ndarray
    touched_rows: int

    @property
    def num_groups(self) -> int:
        return len(self.positions)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(p) for p in self.positions], dtype=np.int64)

    def total_size(self) -> int:
        return int(self.sizes.sum())

    def measure_index(self, name: str) -> int:
        try:
            return self.measure_names.index(name)
        except ValueError:
            raise KeyError(f"unknown measure column {name!r}") from None


def total_size(sizes) -> int:
    """Sum of per-group sample sizes."""
    return int(np.asarray(sizes).sum())


def validate_sizes(sizes: np.ndarray, group_sizes: np.ndarray) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.shape != group_sizes.shape:
        raise ValueError("size vector length must equal the group count")
    if (sizes < 1).any():
        bad = int(np.argmax(sizes < 1))
        raise ValueError(f"group {bad}: sample size must be >= 1, got {int(sizes[bad])}")
    if (sizes > group_sizes).any():
        bad = int(np.argmax(sizes > group_sizes))
        raise ValueError(
            f"group {bad}: sample size {int(sizes[bad])} exceeds group size "
            f"{int(group_sizes[bad])}"
        )
    return sizes


def _gap_candidates(rng: np.random.Generator, population: int, rate: float):
    """All positions selected by a skip scan of ``range(population)``.

    Equivalent to keeping each position with probability ``rate`` but doing
    work proportional to the number kept.
    """
    out = []
    pos = 0  # next unscanned position
    expect = population * rate
    batch = int(expect + 6.0 * math.sqrt(expect) + 16.0)
    while pos < population:
        gaps = rng.geometric(rate, size=batch)
        steps = np.cumsum(gaps) + (pos - 1)
        out.append(steps[steps < population])
        pos = int(steps[-1]) + 1
    return np.concatenate(out)


def _draw_group(rng: np.random.Generator, population: int, want: int):
    """Uniform without-replacement draw of ``want`` list offsets.

    Returns (sorted offsets, candidates touched).
    """
    if want == population:
        return np.arange(population, dtype=np.int64), population
    if want / population <= GAP_RATE_LIMIT:
        # overshoot the rate slightly so the exact-size adjustment is almost
        # always a uniform trim of the candidate set
        rate = min(0.5, (want + 3.0 * math.sqrt(want) + 5.0) / population)
        cand = _gap_candidates(rng, population, rate)
        touched = len(cand)
        if len(cand) >= want:
            keep = rng.permutation(len(cand))[:want]
            sel = cand[keep]
        else:
            chosen = set(cand.tolist())
            extra = []
            need = want - len(cand)
            while need > 0:
                for v in rng.integers(0, population, size=2 * need + 8).tolist():
                    if v not in chosen:
                        chosen.add(v)
                        extra.append(v)
                        need -= 1
                        if need == 0:
                            break
            touched += len(extra)
            sel = np.concatenate([cand, np.array(extra, dtype=np.int64)])
    else:
        # partial shuffle with a sparse displacement map: only the drawn
        # entries are ever materialized, so the work stays O(want)
        draws = rng.integers(np.arange(want), population)
        state: dict[int, int] = {}
        sel = np.empty(want, dtype=np.int64)
        for t in range(want):
            j = int(draws[t])
            vj = state.get(j, j)
            sel[t] = vj
            state[j] = state.get(t, t)
        touched = want
    sel = np.sort(sel)
    return sel.astype(np.int64, copy=False), touched


def stratified_sample(dataset: Dataset, index: GroupIndex, sizes, seed: int) -> Sample:
    """Draw ``sizes[i]`` distinct rows uniformly from each group.

    Deterministic for a fixed seed; per-group streams are derived from
    (seed, group id), so groups could be drawn concurrently without changing
    the result.
    """
    sizes = validate_sizes(np.asarray(sizes, dtype=np.int64), dataset.group_sizes)
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError("seed must be a non-negative integer")
    values, positions = [], []
    touched = 0
    for g in range(dataset.num_groups):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=(int(seed), _SAMPLE_STREAM_TAG, g))
        )
        offsets, t = _draw_group(rng, int(dataset.group_sizes[g]), int(sizes[g]))
        rows = index.lists[g][offsets]
        positions.append(rows)
        values.append(dataset.measures[rows])
        touched += t
    return Sample(
        group_values=tuple(values),
        positions=tuple(positions),
        measure_names=dataset.measure_names,
        population_group_sizes=dataset.group_sizes,
        touched_rows=touched,
    )


def exhaustive_sample(dataset: Dataset, index: GroupIndex | None = None) -> Sample:
    """Every row of every group, as a Sample view for full-data evaluation."""
    if index is None:
        index = build_index(dataset)
    positions = tuple(index.lists)
    values = tuple(dataset.measures[rows] for rows in positions)
    return Sample(
        group_values=values,
        positions=positions,
        measure_names=dataset.measure_names,
        population_group_sizes=dataset.group_sizes,
        touched_rows=dataset.num_rows,
    )
