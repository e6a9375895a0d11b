"""Partitioning of a dataset along one conditioning variable.

Three schemes are provided: equal-count bins (order-sensitive on tied
data), stratum-preserving bins with small-stratum merging (order-free),
and overlapping sliding windows for running statistics.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import PartitionError

EQUAL_COUNT = "equal-count"
STRATIFIED = "stratified"
SLIDING_WINDOW = "sliding-window"

AUTO = "auto"


@dataclass(frozen=True)
class Bin:
    """One bin: member row indices and the mean conditioning value."""

    indices: np.ndarray
    representative: float

    @property
    def count(self) -> int:
        return self.indices.size


@dataclass(frozen=True)
class BinPartition:
    """Ordered assignment of dataset rows to bins over one variable.

    Bins are ordered by non-decreasing representative value.  For the
    equal-count and stratified schemes the bins are disjoint and cover
    all rows; sliding windows overlap by design.
    """

    variable: str
    bins: tuple[Bin, ...]
    scheme: str
    size: int
    undersized: bool = False  # stratified fallback: everything merged, still below min_count

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    @property
    def counts(self) -> np.ndarray:
        return np.array([b.count for b in self.bins])

    @property
    def representatives(self) -> np.ndarray:
        return np.array([b.representative for b in self.bins])


def resolve_bin_count(n_bins: int | str, size: int) -> int:
    """Turn the ``"auto"`` sentinel into round(sqrt(M))."""
    if n_bins == AUTO:
        return int(round(math.sqrt(size)))
    return int(n_bins)


def equal_count_bins(values, n_bins: int | str, variable: str = "value") -> BinPartition:
    """Split rows into contiguous runs of near-equal size along ``values``.

    Rows are ordered by a stable sort, so tied values keep their input
    order: on stratified data the resulting bins (and any statistic of
    them) depend on the row order of the dataset.  Sizes differ by at
    most one, with the larger bins first.  Passing ``"auto"`` for
    ``n_bins`` uses round(sqrt(M)).
    """
    vals = np.asarray(values, dtype=float).ravel()
    m = vals.size
    n = resolve_bin_count(n_bins, m)
    if n < 1:
        raise PartitionError(f"need at least one bin, got {n}")
    if n > m:
        raise PartitionError(f"cannot split {m} rows into {n} non-empty bins")
    order = np.argsort(vals, kind="stable")
    base, extra = divmod(m, n)
    bins = []
    start = 0
    for i in range(n):
        width = base + 1 if i < extra else base
        members = order[start:start + width]
        bins.append(Bin(_frozen(members), float(vals[members].mean())))
        start += width
    return BinPartition(variable, tuple(bins), EQUAL_COUNT, m)


def stratified_bins(values, min_count: int = 100, variable: str = "value") -> BinPartition:
    """Bins that preserve strata, merging small ones into their neighbors.

    Starting from the exact strata (one bin per distinct value, ascending),
    the smallest stratum below ``min_count`` (ties: lowest value) is merged
    with the smaller of its two neighbors (ties: the left one); the merged
    representative is the count-weighted mean.  This repeats until no bin
    is below ``min_count`` or a single bin remains.  The outcome does not
    depend on the row order of the data.

    A dataset smaller than ``min_count`` collapses to a single bin flagged
    ``undersized`` instead of raising.
    """
    if min_count < 1:
        raise PartitionError(f"minimum stratum count must be >= 1, got {min_count}")
    vals = np.asarray(values, dtype=float).ravel()
    if vals.size == 0:
        raise PartitionError("cannot bin an empty sequence")
    unique, inverse, counts = np.unique(vals, return_inverse=True, return_counts=True)
    order = np.argsort(inverse, kind="stable")
    bounds = np.cumsum(counts)[:-1]
    # per-stratum state; merged strata keep a list of index chunks that is
    # only concatenated and sorted once the merging is over
    parts = [[seg] for seg in np.split(order, bounds)]
    reps = [float(v) for v in unique]
    sizes = [int(c) for c in counts]
    k = len(sizes)
    left = list(range(-1, k - 1))
    right = list(range(1, k + 1))
    right[-1] = -1
    alive = [True] * k
    n_alive = k

    # representatives are strictly increasing and never collide, so the
    # (size, rep) heap order reproduces the sequential smallest-first scan
    heap = [(c, r, i) for i, (c, r) in enumerate(zip(sizes, reps)) if c < min_count]
    heapq.heapify(heap)
    while heap and n_alive > 1:
        size, rep, i = heapq.heappop(heap)
        if not alive[i] or sizes[i] != size or reps[i] != rep or size >= min_count:
            continue  # stale entry
        li, ri = left[i], right[i]
        if li == -1:
            j = ri
        elif ri == -1:
            j = li
        else:
            j = li if sizes[li] <= sizes[ri] else ri
        total = sizes[i] + sizes[j]
        lo, hi = (i, j) if i < j else (j, i)
        reps[lo] = (sizes[lo] * reps[lo] + sizes[hi] * reps[hi]) / total
        parts[lo].extend(parts[hi])
        sizes[lo] = total
        alive[hi] = False
        n_alive -= 1
        right[lo] = right[hi]
        if right[hi] != -1:
            left[right[hi]] = lo
        if sizes[lo] < min_count:
            heapq.heappush(heap, (sizes[lo], reps[lo], lo))

    survivors = [i for i in range(k) if alive[i]]
    undersized = n_alive == 1 and sizes[survivors[0]] < min_count
    bins = tuple(Bin(_frozen(np.sort(np.concatenate(parts[i]))), reps[i]) for i in survivors)
    return BinPartition(variable, bins, STRATIFIED, vals.size, undersized=undersized)


def sliding_window(values, window: int, step: int | None = None,
                   variable: str = "value") -> BinPartition:
    """Overlapping fixed-size windows over the value-sorted rows.

    The step defaults to max(1, window // 10), a 10% advance that keeps
    running-statistic curves smooth at tractable cost; a final window
    ending on the last row is always included.
    """
    vals = np.asarray(values, dtype=float).ravel()
    m = vals.size
    if window > m:
        raise PartitionError(f"window of {window} exceeds the {m} available rows")
    if window < 2:
        raise PartitionError(f"window must cover at least 2 rows, got {window}")
    if step is None:
        step = max(1, window // 10)
    if step < 1:
        raise PartitionError(f"step must be positive, got {step}")
    order = np.argsort(vals, kind="stable")
    starts = list(range(0, m - window + 1, step))
    if starts[-1] != m - window:
        starts.append(m - window)
    bins = []
    for start in starts:
        members = order[start:start + window]
        bins.append(Bin(_frozen(members), float(vals[members].mean())))
    return BinPartition(variable, tuple(bins), SLIDING_WINDOW, m)


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.flags.writeable = False
    return out
