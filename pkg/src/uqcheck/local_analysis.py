"""Binned conditional calibration analyses of z-scores.

The central object is the local analysis: a statistic of the z-scores
(mean, mean of squares, or variance) estimated with a confidence
interval inside every bin of a partition, summarized by the fraction of
bins whose interval covers the target.  Conditioning on the uncertainty
itself tests consistency; conditioning on an input feature tests
adaptivity.  Supporting diagnostics cover serial correlation of the
binned series, sensitivity to row reordering, and the classic
reliability curve.

All estimates derive their RNG streams from (root seed, statistic, bin),
so per-bin work can run in any order, or concurrently, with identical
results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .binning import BinPartition, equal_count_bins
from .dataset import Dataset, zscores
from .errors import ConstantInputError, InsufficientSampleError, PartitionError
from .stats_core import (Interval, StatEstimate, binomial_fv_interval, substream,
                         z_mean, z_mean_squares, z_variance)

ZM = "ZM"
ZMS = "ZMS"
ZVAR = "ZVAR"
KINDS = (ZM, ZMS, ZVAR)

UNCERTAINTY = "uncertainty"
_UNCERTAINTY_ALIASES = (UNCERTAINTY, "uE", "u_E")

# substream tags: 0..2 index the statistic kinds, the rest are reserved
# for draws that must not disturb per-bin interval estimates
_KIND_STREAM = {ZM: 0, ZMS: 1, ZVAR: 2}
_PERM_STREAM = 3
_BINOM_STREAM = 4


@dataclass(frozen=True)
class AverageCalibration:
    """Global z-score mean, mean of squares and variance with intervals."""

    mean: StatEstimate
    mean_squares: StatEstimate
    variance: StatEstimate

    @property
    def all_valid(self) -> bool:
        return self.mean.valid and self.mean_squares.valid and self.variance.valid


@dataclass(frozen=True)
class LZResult:
    """Per-bin statistic estimates over one partition, with the f_v summary.

    ``estimates`` is aligned with the partition's bins; entries are None
    for bins too small to estimate (fewer than 2 usable points), which
    are excluded from the f_v denominator and listed in ``skipped``.
    """

    partition: BinPartition
    kind: str
    estimates: tuple[StatEstimate | None, ...]
    f_v: float
    f_v_interval: Interval
    skipped: tuple[int, ...]
    level: float
    resamples: int
    seed: int

    @property
    def counted(self) -> int:
        return len(self.estimates) - len(self.skipped)

    @property
    def valid_count(self) -> int:
        return sum(1 for e in self.estimates if e is not None and e.valid)

    def series(self) -> np.ndarray:
        """Point values of the counted bins, in bin order."""
        return np.array([e.value for e in self.estimates if e is not None])


@dataclass(frozen=True)
class ACFSeries:
    """Sample autocorrelation of a binned-statistic series."""

    lags: np.ndarray
    values: np.ndarray
    band: float  # +/- significance band at the requested level
    level: float


@dataclass(frozen=True)
class PerturbationSummary:
    """Dispersion of f_v under random row reordering.

    ``spread`` brackets the reordering dispersion alone; ``combined``
    additionally perturbs each replicate by binomial noise to reflect
    the finite number of bins.
    """

    kind: str
    values: np.ndarray
    mean: float
    spread: tuple[float, float]
    combined: tuple[float, float]
    level: float


@dataclass(frozen=True)
class ReliabilityCurve:
    """Per-bin (RMV, RMSE) pairs and relative calibration errors."""

    partition: BinPartition
    rmv: np.ndarray
    rmse: np.ndarray
    rce_values: np.ndarray
    global_rce: float


def conditioning_values(d: Dataset, by: str) -> np.ndarray:
    """Resolve a conditioning-variable selector to its column."""
    if by in _UNCERTAINTY_ALIASES:
        return d.uncertainties
    return d.feature(by)


def average_calibration_report(d: Dataset, level: float = 0.95, B: int = 1000,
                               seed: int = 0) -> AverageCalibration:
    """Global calibration check: mean, mean of squares and variance of Z.

    A calibrated dataset has mean 0, mean of squares 1 and variance 1;
    each estimate carries an interval and validity flag at ``level``.
    """
    z = zscores(d)
    return AverageCalibration(
        mean=z_mean(z, level),
        mean_squares=z_mean_squares(z, level, B, seed, stream=(_KIND_STREAM[ZMS], 0)),
        variance=z_variance(z, level, B, seed, stream=(_KIND_STREAM[ZVAR], 0)),
    )


def _estimate(kind, sample, level, B, seed, bin_index):
    stream = (_KIND_STREAM[kind], bin_index)
    if kind == ZM:
        return z_mean(sample, level)
    if kind == ZMS:
        return z_mean_squares(sample, level, B, seed, stream=stream)
    if kind == ZVAR:
        return z_variance(sample, level, B, seed, stream=stream)
    raise ValueError(f"unknown statistic kind {kind!r}; expected one of {KINDS}")


def _lz_over_partition(z, partition, kind, level, B, seed):
    estimates: list[StatEstimate | None] = []
    skipped = []
    for i, b in enumerate(partition.bins):
        if b.count < 2:
            estimates.append(None)
            skipped.append(i)
            continue
        estimates.append(_estimate(kind, z[b.indices], level, B, seed, i))
    counted = len(estimates) - len(skipped)
    if counted == 0:
        raise InsufficientSampleError("no bin holds the 2+ points needed for estimation")
    valid = sum(1 for e in estimates if e is not None and e.valid)
    f_v = valid / counted
    return LZResult(partition, kind, tuple(estimates), f_v,
                    binomial_fv_interval(counted, level, level),
                    tuple(skipped), level, B, seed)


def lz_analysis(d: Dataset, by: str, partition: BinPartition, kind: str = ZMS,
                level: float = 0.95, B: int = 1000, seed: int = 0) -> LZResult:
    """Binned statistic of the z-scores over a partition of one variable.

    Parameters
    ----------
    d : Dataset
    by : str
        ``"uncertainty"`` (consistency) or a feature name (adaptivity).
    partition : BinPartition
        Must have been built on that same variable over this dataset.
    kind : str
        One of ``ZM`` (mean, target 0), ``ZMS`` (mean of squares,
        target 1) or ``ZVAR`` (variance, target 1).
    level, B, seed
        Interval level, bootstrap resamples, root seed.

    Each counted bin yields an estimate with interval and validity flag;
    f_v is the exact fraction of valid bins among those counted, with a
    binomial interval reflecting the finite bin count.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown statistic kind {kind!r}; expected one of {KINDS}")
    values = conditioning_values(d, by)
    if partition.size != d.size:
        raise PartitionError(f"partition holds {partition.size} rows, dataset has {d.size}")
    if partition.variable != by:
        raise PartitionError(f"partition was built on {partition.variable!r}, analysis asked for {by!r}")
    all_members = np.concatenate([b.indices for b in partition.bins]) if partition.bins else np.array([], int)
    if all_members.size and (all_members.min() < 0 or all_members.max() >= d.size):
        raise PartitionError("partition refers to rows outside the dataset")
    del values  # resolution above doubles as a selector check
    return _lz_over_partition(zscores(d), partition, kind, level, B, seed)


def fraction_valid(result: LZResult, coverage: float | None = None) -> StatEstimate:
    """f_v packaged as an estimate tested against the expected coverage.

    On a calibrated dataset the fraction of valid bins should sit near
    the per-bin interval coverage; the binomial interval says how far it
    may stray given the number of bins.  ``coverage`` defaults to the
    analysis level, but an empirically measured interval coverage can be
    passed instead.

    The flag is one-sided: the analysis is rejected when the observed
    fraction falls below the interval.  A fraction above it means the
    per-bin intervals were conservative, not that the data are
    miscalibrated.
    """
    if result.counted < 1:
        raise InsufficientSampleError("f_v needs at least one counted bin")
    if coverage is None:
        coverage = result.level
    interval = binomial_fv_interval(result.counted, result.level, coverage)
    return StatEstimate(result.f_v, interval, coverage,
                        valid=result.f_v >= interval.low)


def acf(series, max_lag: int | None = None, level: float = 0.95) -> ACFSeries:
    """Sample autocorrelation function with a flat significance band.

    r_k = sum_t (x_t - xbar)(x_{t+k} - xbar) / sum_t (x_t - xbar)^2 for
    lags 0..max_lag (default min(20, len/4)); the band is
    +/- z_{(1+level)/2} / sqrt(len).  Slowly decaying values flag
    clusters of adjacent deviant bins.
    """
    x = np.asarray(series, dtype=float).ravel()
    if max_lag is None:
        max_lag = min(20, x.size // 4)
    if x.size < max_lag + 2:
        raise InsufficientSampleError(f"series of {x.size} too short for max lag {max_lag}")
    centered = x - x.mean()
    denom = float(np.dot(centered, centered))
    if denom == 0.0:
        raise ConstantInputError("autocorrelation undefined for a constant series")
    values = np.empty(max_lag + 1)
    values[0] = 1.0
    for k in range(1, max_lag + 1):
        values[k] = float(np.dot(centered[:-k], centered[k:])) / denom
    band = float(sps.norm.ppf(0.5 + level / 2.0)) / math.sqrt(x.size)
    return ACFSeries(np.arange(max_lag + 1), values, band, level)


def reorder_perturbation(d: Dataset, by: str, n_bins: int | str, kind: str = ZMS,
                         n_perm: int = 1000, level: float = 0.95, B: int = 1000,
                         seed: int = 0) -> PerturbationSummary:
    """Dispersion of f_v when rows are randomly reordered before binning.

    Equal-count binning splits tied values by input order, so stratified
    conditioning variables make f_v order-dependent.  This rebuilds the
    partition and recomputes f_v for ``n_perm`` uniform row permutations,
    reporting the empirical spread and a combined spread where each
    replicate is additionally perturbed by Binomial(bins, f_v) noise.

    Permutations and binomial draws use streams separate from the
    bootstrap streams, so changing ``n_perm`` never alters per-bin
    intervals elsewhere.
    """
    if n_perm < 2:
        raise ValueError(f"need at least 2 permutations, got {n_perm}")
    values = conditioning_values(d, by)
    z = zscores(d)
    perm_rng = substream(seed, _PERM_STREAM)
    noise_rng = substream(seed, _BINOM_STREAM)
    fvs = np.empty(n_perm)
    noisy = np.empty(n_perm)
    for p in range(n_perm):
        perm = perm_rng.permutation(d.size)
        partition = equal_count_bins(values[perm], n_bins, variable=by)
        result = _lz_over_partition(z[perm], partition, kind, level, B, seed)
        fvs[p] = result.f_v
        noisy[p] = noise_rng.binomial(result.counted, result.f_v) / result.counted
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(fvs, [alpha, 1.0 - alpha])
    nlo, nhi = np.quantile(noisy, [alpha, 1.0 - alpha])
    return PerturbationSummary(kind, fvs, float(fvs.mean()),
                               (float(lo), float(hi)), (float(nlo), float(nhi)), level)


def reliability_diagram(d: Dataset, n_bins: int | str) -> ReliabilityCurve:
    """RMSE against RMV over equal-count uncertainty bins.

    Per bin, RMV = sqrt(mean u^2) and RMSE = sqrt(mean E^2); a calibrated
    bin lies on the identity line and has relative calibration error
    (RMV - RMSE)/RMV near zero.  Per-bin values carry no interval; the
    global figure is in ``global_rce``.
    """
    partition = equal_count_bins(d.uncertainties, n_bins, variable=UNCERTAINTY)
    rmv = np.empty(partition.n_bins)
    rmse = np.empty(partition.n_bins)
    for i, b in enumerate(partition.bins):
        rmv[i] = math.sqrt(float(np.mean(d.uncertainties[b.indices] ** 2)))
        rmse[i] = math.sqrt(float(np.mean(d.errors[b.indices] ** 2)))
    rce_values = (rmv - rmse) / rmv
    return ReliabilityCurve(partition, rmv, rmse, rce_values, rce(d.errors, d.uncertainties))


def rce(errors, uncertainties) -> float:
    """Relative calibration error (RMV - RMSE)/RMV; zero when calibrated."""
    e = np.asarray(errors, dtype=float).ravel()
    u = np.asarray(uncertainties, dtype=float).ravel()
    if e.size != u.size:
        raise ValueError(f"length mismatch: {e.size} vs {u.size}")
    if e.size < 1:
        raise ValueError("need at least one pair")
    if not np.all(u > 0.0):
        raise ValueError("uncertainties must be strictly positive")
    rmv = math.sqrt(float(np.mean(u * u)))
    rmse = math.sqrt(float(np.mean(e * e)))
    return (rmv - rmse) / rmv
