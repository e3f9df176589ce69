"""Unbiased p-quantile estimation.

The statistic is the interpolated sample quantile; order statistics are found
by randomized quickselect in expected linear time with a deterministic
median-of-medians fallback, so the per-replication cost stays proportional to
the batch size as the cost bound requires.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import (
    BatchDeltaOracle,
    ConfigError,
    EstimatorSummary,
    LevelDistribution,
    TripleEvaluation,
    run_estimator,
)
from .sampling import RandomStream, SampleSource, split_odd_even

__all__ = [
    "QUANTILE_RATIO_MAX",
    "QuantileSpec",
    "base_level",
    "select_order_stat",
    "sample_quantile",
    "quantile_delta",
    "make_quantile_oracle",
    "estimate_quantile",
]

# Strict upper ratio limit for quantiles: the difference second moments decay
# like n^2 * 2^(-3n/2), one half-order slower than the smooth-mean case.
QUANTILE_RATIO_MAX = 1.0 - 2.0 ** (-1.5)

_SMALL_CUTOFF = 16


@dataclass(frozen=True)
class QuantileSpec:
    """Quantile estimation configuration: target probability, base level,
    and level ratio inside the quantile window (1/2, 1 - 2^-3/2)."""

    p: float
    base: int
    ratio: float = 0.64

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ConfigError(f"quantile probability must be in (0, 1), got {self.p}")
        if self.base < base_level(self.p):
            raise ConfigError(
                f"base level {self.base} too small: need 2^base * p >= 1, "
                f"i.e. base >= {base_level(self.p)} for p={self.p}"
            )
        if not 0.5 < self.ratio < QUANTILE_RATIO_MAX:
            raise ConfigError(
                f"quantile ratio {self.ratio} outside (1/2, 1 - 2^-3/2) "
                f"= (0.5, {QUANTILE_RATIO_MAX:.6f})"
            )

    def distribution(self) -> LevelDistribution:
        # alpha = 1/2 reproduces the (1/2, 1 - 2^-3/2) window exactly
        return LevelDistribution(base=self.base, ratio=self.ratio, alpha=0.5)


def base_level(p: float) -> int:
    """Smallest level whose batch size supports the interpolation index:
    min{n >= 0 : 2^n * p >= 1}."""
    if not 0.0 < p < 1.0:
        raise ConfigError(f"quantile probability must be in (0, 1), got {p}")
    n = 0
    while (2**n) * p < 1.0:
        n += 1
    return n


def _insertion_select(a, lo, hi, counter):
    # exact ordering of a short window
    for i in range(lo + 1, hi + 1):
        v = a[i]
        j = i - 1
        while j >= lo:
            if counter is not None:
                counter[0] += 1
            if a[j] > v:
                a[j + 1] = a[j]
                j -= 1
            else:
                break
        a[j + 1] = v


def _median_of_medians(a, lo, hi, counter):
    # deterministic pivot with guaranteed 30/70 split
    while True:
        n = hi - lo + 1
        if n <= _SMALL_CUTOFF:
            _insertion_select(a, lo, hi, counter)
            return lo + n // 2
        write = lo
        for start in range(lo, hi + 1, 5):
            end = min(start + 4, hi)
            _insertion_select(a, start, end, counter)
            a[write], a[(start + end) // 2] = a[(start + end) // 2], a[write]
            write += 1
        hi = write - 1
        # recurse on the medians to find their median


def _partition3(a, lo, hi, pivot_idx, counter):
    """Three-way partition around a[pivot_idx]; returns the bounds (lt, gt)
    of the pivot-equal block. Ties collapse in one pass, so heavily tied
    batches cannot force quadratic behavior."""
    pivot = a[pivot_idx]
    lt, i, gt = lo, lo, hi
    while i <= gt:
        v = a[i]
        if counter is not None:
            counter[0] += 1
        if v < pivot:
            a[lt], a[i] = v, a[lt]
            lt += 1
            i += 1
        else:
            if counter is not None:
                counter[0] += 1
            if v > pivot:
                a[i], a[gt] = a[gt], v
                gt -= 1
            else:
                i += 1
    return lt, gt


def select_order_stat(
    values,
    k: int,
    stream: RandomStream | None = None,
    counter: list | None = None,
) -> tuple[float, list]:
    """k-th order statistic (1-based) in expected linear time.

    Randomized quickselect with pivots from the given stream (median-of-three
    when no stream is supplied); if the partition count ever exceeds the
    pathological budget, remaining pivots come from deterministic
    median-of-medians so the worst case stays linear. Returns the selected
    value and the partially ordered working list, in which positions >= k-1
    hold values >= the result.
    """
    a = list(values)
    n = len(a)
    if not 1 <= k <= n:
        raise ConfigError(f"order statistic {k} out of range for batch of {n}")
    lo, hi, target = 0, n - 1, k - 1
    pivot_gen = None
    budget = 4 * max(1, n.bit_length()) + 16
    passes = 0
    while hi - lo + 1 > _SMALL_CUTOFF:
        passes += 1
        if passes > budget:
            pivot_idx = _median_of_medians(a, lo, hi, counter)
        elif stream is not None:
            if pivot_gen is None:
                pivot_gen = stream.gen
            pivot_idx = lo + int(pivot_gen.integers(0, hi - lo + 1))
        else:
            mid = (lo + hi) // 2
            trio = sorted(((a[lo], lo), (a[mid], mid), (a[hi], hi)))
            if counter is not None:
                counter[0] += 3
            pivot_idx = trio[1][1]
        lt, gt = _partition3(a, lo, hi, pivot_idx, counter)
        if lt <= target <= gt:
            return a[target], a
        if target < lt:
            hi = lt - 1
        else:
            lo = gt + 1
    _insertion_select(a, lo, hi, counter)
    return a[target], a


def sample_quantile(
    batch,
    p: float,
    stream: RandomStream | None = None,
    counter: list | None = None,
) -> float:
    """Interpolated sample quantile (1 - w) X_(k) + w X_(k+1) with k = floor(np)
    and w = np - k, computed by selection rather than a full sort."""
    values = np.asarray(batch, dtype=np.float64).reshape(-1)
    n = values.shape[0]
    np_ = n * p
    if np_ < 1.0:
        raise ConfigError(f"need n*p >= 1 for the sample quantile, got n={n}, p={p}")
    k = int(np.floor(np_))
    w = np_ - k
    low, work = select_order_stat(values, k, stream=stream, counter=counter)
    if w == 0.0 or k + 1 > n:
        return low
    nxt = min(work[k:])
    if counter is not None:
        counter[0] += len(work) - k
    return (1.0 - w) * low + w * nxt


def quantile_delta(
    batch,
    p: float,
    stream: RandomStream | None = None,
    counter: list | None = None,
) -> TripleEvaluation:
    """Coupled difference of the interpolated sample quantile."""
    values = np.asarray(batch, dtype=np.float64).reshape(-1)
    odd, even = split_odd_even(values)
    y_full = sample_quantile(values, p, stream=stream, counter=counter)
    y_odd = sample_quantile(odd, p, stream=stream, counter=counter)
    y_even = sample_quantile(even, p, stream=stream, counter=counter)
    return TripleEvaluation(
        theta_full=np.array([y_full]),
        theta_odd=np.array([y_odd]),
        theta_even=np.array([y_even]),
        delta=np.array([y_full - 0.5 * (y_odd + y_even)]),
        cost=float(values.shape[0]),
    )


class _QuantileDelta:
    def __init__(self, p: float):
        self.p = p

    def __call__(self, batch, stream):
        return quantile_delta(batch, self.p, stream=stream)


class _QuantileBase:
    def __init__(self, p: float):
        self.p = p

    def __call__(self, batch, stream):
        return np.array([sample_quantile(batch, self.p, stream=stream)])


def make_quantile_oracle(source: SampleSource, p: float, max_level: int = 30) -> BatchDeltaOracle:
    if source.dimension != 1:
        raise ConfigError("quantile estimation needs a scalar source")
    if not 0.0 < p < 1.0:
        raise ConfigError(f"quantile probability must be in (0, 1), got {p}")
    return BatchDeltaOracle(source, _QuantileDelta(p), _QuantileBase(p), dim=1, max_level=max_level)


def estimate_quantile(
    source: SampleSource,
    p: float,
    spec: QuantileSpec | None = None,
    n_reps: int = 10_000,
    seed: int = 0,
    workers: int = 1,
    confidence: float = 0.95,
) -> EstimatorSummary:
    """Unbiased p-quantile estimate with the base term evaluated at the base
    level on an independent batch. The level ratio is validated against the
    quantile window at configuration time."""
    if spec is None:
        spec = QuantileSpec(p=p, base=base_level(p))
    elif spec.p != p:
        raise ConfigError(f"spec.p={spec.p} does not match requested p={p}")
    oracle = make_quantile_oracle(source, p)
    return run_estimator(
        oracle, spec.distribution(), n_reps, seed, workers=workers, confidence=confidence
    )
