"""Scalar z-score statistics and their confidence intervals.

The three estimators (mean, mean of squares, variance) all treat the
sample as a multiset: inputs are canonicalized by sorting before any
arithmetic, so results do not depend on the order in which a caller
assembled the sample.  Together with per-estimate RNG substreams this
makes every estimate bit-reproducible and safe to evaluate concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import InsufficientSampleError

INTERVAL_METHODS = ("student-t", "bootstrap-percentile", "binomial")

# Resamples are drawn in fixed-size blocks so that results are identical
# whatever the total B, without ever materializing a B x n index matrix.
_BOOT_CHUNK = 128

# Probability comparisons in the binomial quantile allow this absolute
# slack so that exact ties (e.g. CDF == tail mass as rationals) are not
# broken by float rounding.
_PROB_TOL = 1e-12


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent RNG stream derived from a root seed and an integer key.

    Distinct keys give statistically independent streams, so estimates
    keyed by (statistic, bin) can be evaluated in any order, or in
    parallel, without changing their results.
    """
    if seed < 0:
        raise ValueError("root seed must be non-negative")
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in key]]))


@dataclass(frozen=True)
class Interval:
    """Two-sided confidence interval with its nominal level and method tag."""

    low: float
    high: float
    level: float
    method: str

    def __post_init__(self):
        if not self.low <= self.high:
            raise ValueError(f"interval bounds out of order: [{self.low}, {self.high}]")
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"nominal level must be in (0, 1), got {self.level}")
        if self.method not in INTERVAL_METHODS:
            raise ValueError(f"unknown interval method {self.method!r}")

    def contains(self, x: float) -> bool:
        return self.low <= x <= self.high

    @property
    def width(self) -> float:
        return self.high - self.low


@dataclass(frozen=True)
class StatEstimate:
    """Point estimate, its confidence interval, and the value it should hit.

    ``valid`` defaults to "the interval covers the target", the right
    reading for estimates whose interval surrounds their own value.
    Operations whose interval brackets a null distribution instead (the
    fraction-of-valid-bins test) pass the flag explicitly.
    """

    value: float
    interval: Interval
    target: float
    valid: bool = None

    def __post_init__(self):
        if self.valid is None:
            object.__setattr__(self, "valid", self.interval.contains(self.target))


@dataclass(frozen=True)
class EnsembleSpec:
    """Ensemble size and the variance its z-scores should exhibit.

    When errors and uncertainties are summary statistics of n repeated
    predictions, z-scores follow a heavier-tailed law than the unit
    normal and their variance should match ``target_variance`` instead
    of 1.
    """

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("ensemble size must be at least 2")

    @property
    def dof(self) -> int:
        return self.n - 1

    @property
    def target_variance(self) -> float:
        return ensemble_target_variance(self.n)


def _as_sample(sample, minimum: int = 2) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < minimum:
        raise InsufficientSampleError(f"need at least {minimum} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return np.sort(x)


def _check_resamples(B: int):
    if B < 100:
        raise ValueError(f"resample count must be at least 100, got {B}")


def _percentile_bootstrap(values, row_stat, B, rng, level):
    """Percentile interval of ``row_stat`` over B index resamples of ``values``."""
    n = values.size
    boot = np.empty(B)
    done = 0
    while done < B:
        b = min(_BOOT_CHUNK, B - done)
        idx = rng.integers(0, n, size=(b, n))
        boot[done:done + b] = row_stat(values[idx])
        done += b
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(boot, [alpha, 1.0 - alpha])
    return float(low), float(high)


def z_mean(sample, level: float = 0.95) -> StatEstimate:
    """Sample mean with a Student-t interval, tested against 0.

    Parameters
    ----------
    sample : array-like
        At least two finite values.
    level : float
        Nominal two-sided coverage of the interval.

    The Student-t interval keeps close to nominal coverage for the mean
    even on moderately non-normal samples, so no resampling is needed.
    """
    x = _as_sample(sample)
    n = x.size
    mean = float(np.mean(x))
    s = float(np.std(x, ddof=1))
    half = float(sps.t.ppf(0.5 + level / 2.0, n - 1)) * s / math.sqrt(n)
    return StatEstimate(mean, Interval(mean - half, mean + half, level, "student-t"), 0.0)


def z_mean_squares(sample, level: float = 0.95, B: int = 1000, seed: int = 0,
                   stream: tuple[int, ...] = ()) -> StatEstimate:
    """Mean of squares with a percentile-bootstrap interval, tested against 1.

    Parameters
    ----------
    sample : array-like
        At least two finite values.
    level : float
        Nominal two-sided coverage.
    B : int
        Number of bootstrap resamples (minimum 100).
    seed, stream
        Root seed and optional substream key; fixed (seed, stream, B)
        give bit-identical intervals.

    Normal-theory intervals for a mean of squares degrade quickly away
    from normality, hence the bootstrap.
    """
    x = _as_sample(sample)
    _check_resamples(B)
    sq = x * x
    value = float(np.mean(sq))
    rng = substream(seed, *stream)
    low, high = _percentile_bootstrap(sq, lambda m: m.mean(axis=1), B, rng, level)
    return StatEstimate(value, Interval(low, high, level, "bootstrap-percentile"), 1.0)


def z_variance(sample, level: float = 0.95, B: int = 1000, seed: int = 0,
               stream: tuple[int, ...] = ()) -> StatEstimate:
    """Unbiased sample variance with a percentile-bootstrap interval, target 1."""
    x = _as_sample(sample)
    _check_resamples(B)
    value = float(np.var(x, ddof=1))
    rng = substream(seed, *stream)
    low, high = _percentile_bootstrap(x, lambda m: m.var(axis=1, ddof=1), B, rng, level)
    return StatEstimate(value, Interval(low, high, level, "bootstrap-percentile"), 1.0)


def binomial_fv_interval(n_bins: int, level: float, coverage: float) -> Interval:
    """Interval for a fraction of valid bins under Binomial(n_bins, coverage).

    The returned bounds are counts divided by ``n_bins``.  The lower
    count is the largest k whose strict lower tail P(X < k) does not
    exceed (1 - level)/2; the upper count is the smallest k with
    CDF(k) >= (1 + level)/2.  Probability comparisons carry a 1e-12
    slack so exact ties resolve the same way as in exact arithmetic,
    which keeps the interval as tight as the level allows.
    """
    if n_bins < 1:
        raise ValueError(f"need at least one bin, got {n_bins}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"nominal level must be in (0, 1), got {level}")
    if not 0.0 <= coverage <= 1.0:
        raise ValueError(f"coverage must be in [0, 1], got {coverage}")
    k = np.arange(n_bins + 1)
    cdf = sps.binom.cdf(k, n_bins, coverage)
    p_low = (1.0 - level) / 2.0
    p_high = (1.0 + level) / 2.0
    below = np.concatenate(([0.0], cdf[:-1]))  # P(X < k)
    k_low = int(k[below <= p_low + _PROB_TOL].max())
    k_high = int(k[cdf >= p_high - _PROB_TOL].min())
    return Interval(k_low / n_bins, k_high / n_bins, level, "binomial")


def ensemble_target_variance(n: int) -> float:
    """Expected z-score variance when E and u_E summarize n-member ensembles.

    Requires n >= 4; below that the variance of the underlying law is
    infinite or undefined.
    """
    if n < 4:
        raise ValueError(f"target variance undefined for ensemble size {n} (need n >= 4)")
    return (n - 1) / (n - 3)
