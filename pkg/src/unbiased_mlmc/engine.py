"""Randomized-level debiasing engine.

One replication draws a geometric level N, evaluates the coupled level
difference at N on a fresh batch, scales by 1/p(N), and adds a base term
computed on an independent batch. Averaging i.i.d. replications gives an
unbiased estimate with finite variance and bounded expected sampling cost
when the difference second moments decay like 2^-(1+alpha)n and the level
ratio r sits in (1/2, 1 - 2^-(1+alpha)).
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from .sampling import ROLE_CODES, RandomStream, SampleSource, derive_stream, draw_batch

__all__ = [
    "EstimationError",
    "ConfigError",
    "ReplicationError",
    "FailureBudgetExceeded",
    "LevelOverflowError",
    "DegenerateDeltaError",
    "SolverError",
    "LevelDistribution",
    "TripleEvaluation",
    "BaseEvaluation",
    "Replication",
    "EstimatorSummary",
    "LevelOracle",
    "BatchDeltaOracle",
    "optimal_ratio",
    "pmf",
    "sample_level",
    "single_replication",
    "run_estimator",
    "summarize",
    "merge_summaries",
    "delta_decay_table",
    "estimate_alpha",
]

DEFAULT_MAX_LEVEL = 30
DEFAULT_FAILURE_BUDGET = 1e-3


class EstimationError(Exception):
    """Base class for estimation failures."""


class ConfigError(EstimationError):
    """Invalid parameter combination, rejected before any sampling."""


class ReplicationError(EstimationError):
    """A single replication failed; carries the drawn level for diagnosis."""

    def __init__(self, message: str, level: int | None = None):
        super().__init__(message)
        self.level = level


class FailureBudgetExceeded(EstimationError):
    """Too many replications failed; aborting instead of silently dropping
    them, since dropping failed replications would bias the estimate."""


class LevelOverflowError(ReplicationError):
    """Drawn level exceeds the batch materialization guard."""


class DegenerateDeltaError(EstimationError):
    """All level differences vanish: the statistic is linear in the
    empirical measure, so any ratio > 1/2 is valid and no decay exponent
    can be fitted."""


class SolverError(EstimationError):
    """Deterministic inner solver failed to converge."""


def optimal_ratio(alpha: float) -> float:
    """Geometric success ratio minimizing the work-normalized variance bound,
    r = 1 - 2^-(1 + alpha/2), for difference second moments O(2^-(1+alpha)n)."""
    if not alpha > 0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    return 1.0 - 2.0 ** (-(1.0 + alpha / 2.0))


@dataclass(frozen=True)
class LevelDistribution:
    """Geometric law of the random level N on {base, base+1, ...}.

    pmf(k) = ratio * (1 - ratio)^(k - base). The ratio must exceed 1/2 for
    finite expected cost and stay below 1 - 2^-(1+alpha) for finite second
    moment of the scaled differences.
    """

    base: int = 0
    ratio: float = optimal_ratio(1.0)
    alpha: float = 1.0

    def __post_init__(self):
        if self.base < 0 or int(self.base) != self.base:
            raise ConfigError(f"base level must be a nonnegative integer, got {self.base}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        upper = 1.0 - 2.0 ** (-(1.0 + self.alpha))
        if not 0.5 < self.ratio < upper:
            raise ConfigError(
                f"ratio {self.ratio} outside (1/2, {upper:.6f}) required for "
                f"finite cost and finite variance at alpha={self.alpha}"
            )

    def mean_batch_cost(self) -> float:
        """Expected sample count per replication for unit-cost i.i.d. oracles:
        2^base for the base term plus sum_k 2^(k+1) pmf(k) for the difference."""
        r = self.ratio
        return 2.0**self.base + 2.0 ** (self.base + 1) * r / (2.0 * r - 1.0)


def pmf(dist: LevelDistribution, k: int) -> float:
    if k < dist.base:
        return 0.0
    return dist.ratio * (1.0 - dist.ratio) ** (k - dist.base)


def sample_level(dist: LevelDistribution, stream: RandomStream) -> int:
    """Draw N by inversion: base + floor(log(U) / log(1-r)), one uniform."""
    u = stream.uniform()
    while u == 0.0:  # measure-zero guard for the log
        u = stream.uniform()
    return dist.base + int(math.floor(math.log(u) / math.log(1.0 - dist.ratio)))


@dataclass
class TripleEvaluation:
    """The three coupled statistic values at one level and their difference.

    delta == theta_full - (theta_odd + theta_even) / 2 by construction; cost
    is the sampling cost of the batch in primitive sample units.
    """

    theta_full: np.ndarray
    theta_odd: np.ndarray
    theta_even: np.ndarray
    delta: np.ndarray
    cost: float


@dataclass
class BaseEvaluation:
    value: np.ndarray
    cost: float


@dataclass
class Replication:
    """One independent copy of the debiased estimator."""

    value: np.ndarray
    level: int
    cost: float


@dataclass
class EstimatorSummary:
    count: int
    mean: np.ndarray
    variance: np.ndarray
    std_error: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    mean_cost: float
    work_normalized_variance: float
    confidence: float = 0.95


class LevelOracle(ABC):
    """Produces coupled level differences and independent base terms.

    Implementations must be pure given their stream arguments (fresh state
    per call) so replications can run on any number of workers.
    """

    dim: int = 1
    max_level: int = DEFAULT_MAX_LEVEL

    @abstractmethod
    def evaluate_level(self, level: int, stream: RandomStream) -> TripleEvaluation:
        """Evaluate the statistic on a fresh size-2^(level+1) batch and its
        odd/even halves; return the difference and sampling cost."""

    @abstractmethod
    def evaluate_base(self, base: int, stream: RandomStream) -> BaseEvaluation:
        """Evaluate the statistic on an independent size-2^base batch."""

    def check_level(self, level: int):
        if level > self.max_level:
            raise LevelOverflowError(
                f"drawn level {level} exceeds max_level={self.max_level}; "
                "raise the guard explicitly rather than truncating (truncation biases)",
                level=level,
            )


class BatchDeltaOracle(LevelOracle):
    """Oracle over i.i.d. batches from a sample source.

    delta_fn(batch, stream) -> TripleEvaluation with cost in batch rows;
    base_fn(batch, stream) -> statistic vector. The stream argument carries
    any auxiliary randomness the statistic needs (e.g. selection pivots).
    """

    def __init__(
        self,
        source: SampleSource,
        delta_fn: Callable[[np.ndarray, RandomStream], TripleEvaluation],
        base_fn: Callable[[np.ndarray, RandomStream], np.ndarray],
        dim: int = 1,
        max_level: int = DEFAULT_MAX_LEVEL,
    ):
        self.source = source
        self.delta_fn = delta_fn
        self.base_fn = base_fn
        self.dim = dim
        self.max_level = max_level

    def evaluate_level(self, level, stream):
        self.check_level(level)
        batch = draw_batch(self.source, 2 ** (level + 1), stream)
        ev = self.delta_fn(batch, stream.child(1))
        ev.cost *= self.source.cost_per_draw
        return ev

    def evaluate_base(self, base, stream):
        batch = draw_batch(self.source, 2**base, stream)
        value = np.atleast_1d(np.asarray(self.base_fn(batch, stream.child(1)), dtype=np.float64))
        return BaseEvaluation(value=value, cost=batch.shape[0] * self.source.cost_per_draw)


def single_replication(
    oracle: LevelOracle, dist: LevelDistribution, stream: RandomStream
) -> Replication:
    """One draw of the debiased estimator: difference at the drawn level,
    scaled by its probability, plus the independent base term.

    The level draw, the difference batch, and the base batch use disjoint
    role sub-streams, so N is independent of both batches.
    """
    level = sample_level(dist, stream.child(ROLE_CODES["level"]))
    try:
        base_ev = oracle.evaluate_base(dist.base, stream.child(ROLE_CODES["base"]))
        ev = oracle.evaluate_level(level, stream.child(ROLE_CODES["batch"]))
    except ReplicationError:
        raise
    except EstimationError as exc:
        raise ReplicationError(f"level {level} evaluation failed: {exc}", level=level) from exc
    value = ev.delta / pmf(dist, level) + base_ev.value
    return Replication(value=value, level=level, cost=ev.cost + base_ev.cost)


def _replicate_block(args):
    oracle, dist, seed, lo, hi = args
    dim = oracle.dim
    values = np.empty((hi - lo, dim), dtype=np.float64)
    levels = np.empty(hi - lo, dtype=np.int64)
    costs = np.empty(hi - lo, dtype=np.float64)
    failures = []
    for i in range(lo, hi):
        try:
            rep = single_replication(oracle, dist, RandomStream(seed, (i,)))
        except ReplicationError as exc:
            failures.append((i, exc.level, str(exc)))
            values[i - lo] = np.nan
            levels[i - lo] = -1
            costs[i - lo] = np.nan
            continue
        values[i - lo] = rep.value
        levels[i - lo] = rep.level
        costs[i - lo] = rep.cost
    return lo, values, levels, costs, failures


@dataclass
class ReplicationLog:
    """Raw per-replication results in replication-index order."""

    values: np.ndarray  # (n, dim); NaN rows mark failures
    levels: np.ndarray  # (n,); -1 marks failures
    costs: np.ndarray
    failures: list = field(default_factory=list)

    def ok_mask(self) -> np.ndarray:
        return self.levels >= 0


def run_replications(
    oracle: LevelOracle,
    dist: LevelDistribution,
    n_reps: int,
    seed: int,
    workers: int = 1,
    failure_budget: float = DEFAULT_FAILURE_BUDGET,
) -> ReplicationLog:
    """n_reps independent replications, streams derived from (seed, index).

    Results are identical for any worker count: each replication's randomness
    is a pure function of (seed, index) and blocks are reassembled by index.
    Aborts if the failed fraction exceeds the failure budget.
    """
    if n_reps < 2:
        raise ConfigError("need at least 2 replications")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    blocks = _block_ranges(n_reps, workers)
    args = [(oracle, dist, seed, lo, hi) for lo, hi in blocks]
    values = np.empty((n_reps, oracle.dim), dtype=np.float64)
    levels = np.empty(n_reps, dtype=np.int64)
    costs = np.empty(n_reps, dtype=np.float64)
    failures: list = []
    if workers == 1:
        results = map(_replicate_block, args)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_block, args))
    for lo, v, l, c, f in results:
        values[lo : lo + v.shape[0]] = v
        levels[lo : lo + v.shape[0]] = l
        costs[lo : lo + v.shape[0]] = c
        failures.extend(f)
    log = ReplicationLog(values=values, levels=levels, costs=costs, failures=failures)
    if len(failures) > failure_budget * n_reps:
        first = failures[0]
        raise FailureBudgetExceeded(
            f"{len(failures)}/{n_reps} replications failed (budget {failure_budget:.1%}); "
            f"first failure at replication {first[0]}: {first[2]}"
        )
    return log


def _block_ranges(n: int, workers: int) -> list[tuple[int, int]]:
    if workers == 1:
        return [(0, n)]
    size = max(1, -(-n // (4 * workers)))
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def run_estimator(
    oracle: LevelOracle,
    dist: LevelDistribution,
    n_reps: int,
    seed: int,
    workers: int = 1,
    confidence: float = 0.95,
    failure_budget: float = DEFAULT_FAILURE_BUDGET,
) -> EstimatorSummary:
    """Run and aggregate n_reps replications into an estimator summary."""
    log = run_replications(oracle, dist, n_reps, seed, workers, failure_budget)
    ok = log.ok_mask()
    return summarize_arrays(log.values[ok], log.costs[ok], confidence)


def summarize_arrays(values: np.ndarray, costs: np.ndarray, confidence: float) -> EstimatorSummary:
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    n = values.shape[0]
    if n < 2:
        raise ConfigError("summary needs at least 2 replications")
    if not 0.0 < confidence < 1.0:
        raise ConfigError(f"confidence must be in (0, 1), got {confidence}")
    mean = values.mean(axis=0)
    variance = values.var(axis=0, ddof=1)
    std_error = np.sqrt(variance / n)
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    mean_cost = float(np.mean(costs))
    return EstimatorSummary(
        count=n,
        mean=mean,
        variance=variance,
        std_error=std_error,
        ci_low=mean - z * std_error,
        ci_high=mean + z * std_error,
        mean_cost=mean_cost,
        work_normalized_variance=float(np.max(variance) * mean_cost),
        confidence=confidence,
    )


def summarize(replications: Sequence[Replication], confidence: float = 0.95) -> EstimatorSummary:
    """Componentwise mean, unbiased variance, normal-quantile CI, mean cost,
    and work-normalized variance (max-component variance times mean cost)."""
    if len(replications) < 2:
        raise ConfigError("summary needs at least 2 replications")
    values = np.stack([np.atleast_1d(r.value) for r in replications])
    costs = np.array([r.cost for r in replications])
    return summarize_arrays(values, costs, confidence)


def merge_summaries(a: EstimatorSummary, b: EstimatorSummary) -> EstimatorSummary:
    """Combine summaries of two disjoint replication sets (pooled moments)."""
    if a.confidence != b.confidence:
        raise ConfigError("cannot merge summaries at different confidence levels")
    n = a.count + b.count
    mean = (a.count * a.mean + b.count * b.mean) / n
    d = a.mean - b.mean
    m2 = (
        a.variance * (a.count - 1)
        + b.variance * (b.count - 1)
        + d * d * (a.count * b.count / n)
    )
    variance = m2 / (n - 1)
    std_error = np.sqrt(variance / n)
    z = NormalDist().inv_cdf(0.5 + a.confidence / 2.0)
    mean_cost = (a.count * a.mean_cost + b.count * b.mean_cost) / n
    return EstimatorSummary(
        count=n,
        mean=mean,
        variance=variance,
        std_error=std_error,
        ci_low=mean - z * std_error,
        ci_high=mean + z * std_error,
        mean_cost=mean_cost,
        work_normalized_variance=float(np.max(variance) * mean_cost),
        confidence=a.confidence,
    )


def delta_decay_table(
    oracle: LevelOracle, levels: Sequence[int], reps_per_level: int, seed: int
) -> list[tuple[int, float]]:
    """Mean squared difference norm per level, for decay diagnostics.

    Each level consumes one dedicated pilot stream sequentially; successive
    evaluations read disjoint segments, so they are i.i.d.
    """
    table = []
    for level in levels:
        stream = derive_stream(seed, level, "pilot")
        total = 0.0
        for _ in range(reps_per_level):
            ev = oracle.evaluate_level(level, stream)
            total += float(np.sum(ev.delta * ev.delta))
        table.append((level, total / reps_per_level))
    return table


def estimate_alpha(
    oracle: LevelOracle, levels: Sequence[int], reps_per_level: int, seed: int
) -> float:
    """Pilot estimate of the decay exponent: fit log2(mean |delta|^2) ~ s*n
    by least squares and return alpha_hat = -s - 1, clamped to [0.1, 3]."""
    levels = list(levels)
    if len(levels) < 4:
        raise ConfigError("alpha estimation needs at least 4 levels")
    if reps_per_level < 100:
        raise ConfigError("alpha estimation needs at least 100 replications per level")
    table = delta_decay_table(oracle, levels, reps_per_level, seed)
    if any(m == 0.0 for _, m in table):
        raise DegenerateDeltaError(
            "linear functional: level differences are identically zero, any ratio > 1/2 is valid"
        )
    ns = np.array([n for n, _ in table], dtype=np.float64)
    logs = np.log2([m for _, m in table])
    slope = np.polyfit(ns, logs, 1)[0]
    return float(min(3.0, max(0.1, -slope - 1.0)))
