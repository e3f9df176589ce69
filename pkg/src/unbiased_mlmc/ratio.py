"""Ratio-of-means estimation: regenerative steady-state averages and
self-normalized importance sampling.

Both reduce to the smooth-functional setting with g(x1, x2) = x1/x2 applied
to per-cycle (reward sum, cycle length) pairs or per-draw (weighted reward,
weight) pairs.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .engine import (
    BatchDeltaOracle,
    EstimationError,
    LevelOracle,
    ReplicationError,
    BaseEvaluation,
    TripleEvaluation,
)
from .sampling import RandomStream, SampleSource, split_odd_even

__all__ = [
    "CyclePair",
    "WeightedPair",
    "weighted_pairs",
    "RegenerativeProcess",
    "LindleyQueue",
    "mm1_queue",
    "waiting_time_reward",
    "unit_reward",
    "simulate_cycle",
    "ratio_functional",
    "paired_ratio_delta",
    "RegenerativeOracle",
    "make_regen_oracle",
    "make_snis_oracle",
]

DEFAULT_CYCLE_CAP = 10_000_000


@dataclass
class CyclePair:
    """One regenerative cycle: reward sum over the cycle states, the cycle
    length, and the step cost spent simulating it."""

    x1: float
    x2: float
    cost: float


@dataclass
class WeightedPair:
    """One self-normalized importance sample: weighted reward and weight."""

    numerator: float
    weight: float

    def __post_init__(self):
        if not (np.isfinite(self.weight) and self.weight > 0.0):
            raise EstimationError(
                f"importance weight must be positive and finite, got {self.weight}"
            )


def weighted_pairs(target_unnormalized, proposal_pdf, reward, batch) -> list[WeightedPair]:
    """Materialize the weighted pairs for a proposal batch (validating each)."""
    weights = np.asarray(target_unnormalized(batch), dtype=np.float64) / np.asarray(
        proposal_pdf(batch), dtype=np.float64
    )
    rewards = np.asarray(reward(batch), dtype=np.float64)
    return [WeightedPair(float(w * f), float(w)) for w, f in zip(weights, rewards)]


class RegenerativeProcess(ABC):
    """Zero-delayed regenerative process contract.

    The process starts in its regeneration state; a cycle runs until the
    state first returns to the regeneration set. Cycles simulated from
    disjoint stream segments are i.i.d.
    """

    @abstractmethod
    def initial_state(self):
        """The regeneration state the process restarts from."""

    @abstractmethod
    def step(self, state, stream: RandomStream):
        """Advance one step using the stream's randomness."""

    @abstractmethod
    def regenerated(self, state) -> bool:
        """Whether the state is back in the regeneration set."""

    @abstractmethod
    def reward(self, state) -> float:
        """Per-state reward f accumulated over cycle states 0..tau-1."""


def waiting_time_reward(w: float) -> float:
    return w


def unit_reward(w: float) -> float:
    return 1.0


class LindleyQueue(RegenerativeProcess):
    """Single-server FIFO waiting times W(n+1) = max(W(n) + S(n) - A(n+1), 0),
    regenerating whenever a customer finds the system idle (W = 0)."""

    def __init__(
        self,
        interarrival: SampleSource,
        service: SampleSource,
        reward: Callable[[float], float] = waiting_time_reward,
    ):
        if interarrival.dimension != 1 or service.dimension != 1:
            raise EstimationError("queue interarrival/service sources must be scalar")
        self.interarrival = interarrival
        self.service = service
        self._reward = reward

    def initial_state(self):
        return 0.0

    def step(self, state, stream):
        s = float(self.service.draw(1, stream)[0, 0])
        a = float(self.interarrival.draw(1, stream)[0, 0])
        return max(state + s - a, 0.0)

    def regenerated(self, state):
        return state == 0.0

    def reward(self, state):
        return self._reward(state)


def mm1_queue(
    arrival_rate: float,
    service_rate: float,
    reward: Callable[[float], float] = waiting_time_reward,
) -> LindleyQueue:
    """M/M/1 waiting-time chain; requires arrival_rate < service_rate."""
    from .sampling import ExponentialSource

    if not 0 < arrival_rate < service_rate:
        raise EstimationError(
            f"M/M/1 needs 0 < arrival rate < service rate, got {arrival_rate}, {service_rate}"
        )
    return LindleyQueue(ExponentialSource(arrival_rate), ExponentialSource(service_rate), reward)


def simulate_cycle(
    proc: RegenerativeProcess, stream: RandomStream, cap: int = DEFAULT_CYCLE_CAP
) -> CyclePair:
    """Simulate one complete zero-delayed cycle.

    x1 sums the reward over states 0..tau-1 and x2 = tau, so a unit reward
    makes x1 == x2 exactly. Cycles longer than the cap abort the replication
    rather than truncate, since truncation biases.
    """
    state = proc.initial_state()
    x1 = float(proc.reward(state))
    tau = 1
    while True:
        state = proc.step(state, stream)
        if proc.regenerated(state):
            return CyclePair(x1=x1, x2=float(tau), cost=float(tau))
        x1 += float(proc.reward(state))
        tau += 1
        if tau > cap:
            raise ReplicationError(f"cycle exceeded safety cap of {cap} steps")


def ratio_functional(pairs: np.ndarray) -> float:
    """(mean of first components) / (mean of second components)."""
    pairs = np.asarray(pairs, dtype=np.float64)
    num = float(np.mean(pairs[:, 0]))
    den = float(np.mean(pairs[:, 1]))
    if not den > 0:
        raise EstimationError(f"ratio denominator mean must be positive, got {den}")
    return num / den


def paired_ratio_delta(numerators: np.ndarray, denominators: np.ndarray) -> TripleEvaluation:
    """Coupled difference for a ratio of means over (numerator, denominator)
    pairs, with the full-batch sums formed from the half sums so that a
    constant ratio yields an exactly zero difference."""
    num_o, num_e = split_odd_even(numerators)
    den_o, den_e = split_odd_even(denominators)
    sn_o, sn_e = float(np.sum(num_o)), float(np.sum(num_e))
    sd_o, sd_e = float(np.sum(den_o)), float(np.sum(den_e))
    for label, s in (("odd", sd_o), ("even", sd_e)):
        if not s > 0:
            raise EstimationError(f"{label}-half denominator sum must be positive, got {s}")
    theta_full = (sn_o + sn_e) / (sd_o + sd_e)
    theta_odd = sn_o / sd_o
    theta_even = sn_e / sd_e
    return TripleEvaluation(
        theta_full=np.array([theta_full]),
        theta_odd=np.array([theta_odd]),
        theta_even=np.array([theta_even]),
        delta=np.array([theta_full - 0.5 * (theta_odd + theta_even)]),
        cost=float(numerators.shape[0]),
    )


class RegenerativeOracle(LevelOracle):
    """Level oracle over i.i.d. regenerative cycles.

    A level-n evaluation simulates 2^(n+1) cycles, splits them odd/even by
    cycle index, and applies the ratio of means. Cost is the total number of
    simulated steps, not the number of cycles.
    """

    dim = 1

    def __init__(self, proc: RegenerativeProcess, cycle_cap: int = DEFAULT_CYCLE_CAP, max_level: int = 30):
        self.proc = proc
        self.cycle_cap = cycle_cap
        self.max_level = max_level

    def _cycles(self, count: int, stream: RandomStream) -> tuple[np.ndarray, np.ndarray, float]:
        # one substream per cycle: no state leaks between cycles
        x1 = np.empty(count)
        x2 = np.empty(count)
        cost = 0.0
        for i in range(count):
            pair = simulate_cycle(self.proc, stream.child(i), self.cycle_cap)
            x1[i] = pair.x1
            x2[i] = pair.x2
            cost += pair.cost
        return x1, x2, cost

    def evaluate_level(self, level, stream):
        self.check_level(level)
        x1, x2, cost = self._cycles(2 ** (level + 1), stream)
        ev = paired_ratio_delta(x1, x2)
        ev.cost = cost
        return ev

    def evaluate_base(self, base, stream):
        x1, x2, cost = self._cycles(2**base, stream)
        return BaseEvaluation(value=np.array([ratio_functional(np.column_stack([x1, x2]))]), cost=cost)


def make_regen_oracle(
    proc: RegenerativeProcess,
    cycle_cap: int = DEFAULT_CYCLE_CAP,
    max_level: int = 30,
) -> RegenerativeOracle:
    return RegenerativeOracle(proc, cycle_cap=cycle_cap, max_level=max_level)


class _SnisDelta:
    def __init__(self, target_unnormalized, proposal_pdf, reward):
        self.h = target_unnormalized
        self.q = proposal_pdf
        self.f = reward

    def pairs(self, batch):
        weights = np.asarray(self.h(batch), dtype=np.float64) / np.asarray(
            self.q(batch), dtype=np.float64
        )
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise EstimationError("importance weights must be positive and finite")
        return weights * np.asarray(self.f(batch), dtype=np.float64), weights

    def __call__(self, batch, stream):
        numerators, weights = self.pairs(batch)
        ev = paired_ratio_delta(numerators, weights)
        ev.cost = float(batch.shape[0])
        return ev


class _SnisBase(_SnisDelta):
    def __call__(self, batch, stream):
        numerators, weights = self.pairs(batch)
        return np.array([ratio_functional(np.column_stack([numerators, weights]))])


def make_snis_oracle(
    target_unnormalized: Callable[[np.ndarray], np.ndarray],
    proposal: SampleSource,
    reward: Callable[[np.ndarray], np.ndarray],
    max_level: int = 30,
) -> BatchDeltaOracle:
    """Self-normalized importance sampling oracle for E_pi[f(Y)] where the
    target density is known only up to a constant.

    The proposal source must expose pdf(batch) and should dominate the
    target (heavier tails); that contract is the caller's responsibility.
    """
    pdf = getattr(proposal, "pdf", None)
    if pdf is None:
        raise EstimationError("proposal source must expose a pdf(batch) method")
    return BatchDeltaOracle(
        proposal,
        _SnisDelta(target_unnormalized, pdf, reward),
        _SnisBase(target_unnormalized, pdf, reward),
        dim=1,
        max_level=max_level,
    )
