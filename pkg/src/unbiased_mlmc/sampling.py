"""Reproducible sample sources, counter-based random streams, and batch utilities.

Streams are identified purely by an integer seed plus a derivation path, so any
replication can be regenerated on any worker in any order. The odd/even batch
split used by the coupled level differences lives here too.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

__all__ = [
    "RandomStream",
    "derive_stream",
    "SampleSource",
    "BernoulliSource",
    "UniformSource",
    "ExponentialSource",
    "NormalSource",
    "LognormalSource",
    "ConstantSource",
    "VectorSource",
    "EmpiricalSource",
    "empirical_source",
    "draw_batch",
    "split_odd_even",
    "interleave",
    "coupled_means",
]

# Stream roles within one replication. The level draw must never share
# generator state with the batches (N independent of the differences).
ROLE_CODES = {"level": 0, "batch": 1, "base": 2, "pilot": 3}

_ENTROPY_MASK = (1 << 128) - 1


class RandomStream:
    """A lazily materialized counter-based generator addressed by (seed, path).

    The same (seed, path) reproduces the identical draw sequence on every
    platform and worker; distinct paths give statistically independent
    streams (the seed-sequence spawn-key mechanism). ``child(i)`` derives a
    sub-stream without consuming state.
    """

    __slots__ = ("entropy", "path", "_gen")

    def __init__(self, entropy: int, path: tuple[int, ...] = ()):
        self.entropy = int(entropy) & _ENTROPY_MASK
        self.path = tuple(int(p) for p in path)
        self._gen = None

    @property
    def gen(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.entropy, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.Philox(seed=ss))
        return self._gen

    def child(self, *indices: int) -> "RandomStream":
        return RandomStream(self.entropy, self.path + indices)

    def uniform(self, size=None):
        return self.gen.random(size)

    def __repr__(self):
        return f"RandomStream(seed={self.entropy}, path={self.path})"


def derive_stream(seed: int, replication_index: int, role: str) -> RandomStream:
    """Stream for one role of one replication.

    Roles: "level" (the level draw N), "batch" (the difference batch),
    "base" (the independent base-term batch), "pilot" (decay diagnostics).
    """
    if role not in ROLE_CODES:
        raise ValueError(f"unknown stream role {role!r}; expected one of {sorted(ROLE_CODES)}")
    return RandomStream(seed, (int(replication_index), ROLE_CODES[role]))


class SampleSource(ABC):
    """An i.i.d. vector sample generator with a declared per-draw cost."""

    dimension: int = 1
    cost_per_draw: float = 1.0

    @abstractmethod
    def draw(self, n: int, stream: RandomStream) -> np.ndarray:
        """Return n i.i.d. draws as an (n, dimension) array, in stream order."""


class BernoulliSource(SampleSource):
    def __init__(self, p: float):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"Bernoulli p must be in [0, 1], got {p}")
        self.p = float(p)

    def draw(self, n, stream):
        return (stream.gen.random(n) < self.p).astype(np.float64).reshape(n, 1)


class UniformSource(SampleSource):
    def __init__(self, low: float = 0.0, high: float = 1.0):
        if not high > low:
            raise ValueError("uniform needs high > low")
        self.low, self.high = float(low), float(high)

    def draw(self, n, stream):
        return stream.gen.uniform(self.low, self.high, size=(n, 1))


class ExponentialSource(SampleSource):
    def __init__(self, rate: float = 1.0):
        if not rate > 0:
            raise ValueError("exponential rate must be positive")
        self.rate = float(rate)

    def draw(self, n, stream):
        return (stream.gen.standard_exponential((n, 1)) / self.rate)


class NormalSource(SampleSource):
    def __init__(self, mean: float = 0.0, sd: float = 1.0):
        if not sd > 0:
            raise ValueError("normal sd must be positive")
        self.mean, self.sd = float(mean), float(sd)

    def draw(self, n, stream):
        return self.mean + self.sd * stream.gen.standard_normal((n, 1))

    def pdf(self, x: np.ndarray) -> np.ndarray:
        z = (np.asarray(x, dtype=np.float64).reshape(-1) - self.mean) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * np.sqrt(2.0 * np.pi))


class LognormalSource(SampleSource):
    def __init__(self, mu: float = 0.0, sigma: float = 1.0):
        if not sigma > 0:
            raise ValueError("lognormal sigma must be positive")
        self.mu, self.sigma = float(mu), float(sigma)

    def draw(self, n, stream):
        return np.exp(self.mu + self.sigma * stream.gen.standard_normal((n, 1)))


class ConstantSource(SampleSource):
    def __init__(self, value):
        self.value = np.atleast_1d(np.asarray(value, dtype=np.float64))
        self.dimension = self.value.size

    def draw(self, n, stream):
        return np.tile(self.value, (n, 1))


class VectorSource(SampleSource):
    """Independent scalar sources stacked as the coordinates of one vector draw."""

    def __init__(self, components: Sequence[SampleSource]):
        comps = list(components)
        if not comps:
            raise ValueError("vector source needs at least one component")
        if any(c.dimension != 1 for c in comps):
            raise ValueError("vector source components must be scalar sources")
        self.components = comps
        self.dimension = len(comps)
        self.cost_per_draw = float(sum(c.cost_per_draw for c in comps)) / len(comps)

    def draw(self, n, stream):
        cols = [c.draw(n, stream) for c in self.components]
        return np.hstack(cols)


class EmpiricalSource(SampleSource):
    """Uniform i.i.d. resampling (with replacement) of the rows of a dataset."""

    def __init__(self, dataset: np.ndarray):
        data = np.asarray(dataset, dtype=np.float64)
        if data.ndim == 1:
            data = data.reshape(-1, 1)
        if data.ndim != 2 or data.shape[0] == 0:
            raise ValueError("empirical source needs a non-empty 2-D dataset")
        self.data = data
        self.dimension = data.shape[1]

    def draw(self, n, stream):
        idx = stream.gen.integers(0, self.data.shape[0], size=n)
        return self.data[idx]


def empirical_source(dataset: np.ndarray) -> EmpiricalSource:
    return EmpiricalSource(dataset)


def draw_batch(source: SampleSource, n_samples: int, stream: RandomStream) -> np.ndarray:
    """n_samples i.i.d. draws from the source, in stream order."""
    if n_samples < 1:
        raise ValueError("batch size must be >= 1")
    batch = source.draw(int(n_samples), stream)
    if batch.shape != (n_samples, source.dimension):
        raise ValueError(
            f"source returned shape {batch.shape}, expected {(n_samples, source.dimension)}"
        )
    return batch


def split_odd_even(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a batch into its 1-based odd-position and even-position halves."""
    n = batch.shape[0]
    if n % 2 != 0:
        raise ValueError(f"odd/even split needs an even batch length, got {n}")
    return batch[0::2], batch[1::2]


def interleave(odd: np.ndarray, even: np.ndarray) -> np.ndarray:
    """Inverse of split_odd_even: restore the original interleaved order."""
    if odd.shape != even.shape:
        raise ValueError("halves must have equal shapes")
    out = np.empty((odd.shape[0] * 2,) + odd.shape[1:], dtype=np.result_type(odd, even))
    out[0::2] = odd
    out[1::2] = even
    return out


def coupled_means(batch: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Means of the full batch and of its odd/even halves, computed so that
    full == (odd + even) / 2 holds to the last bit.

    The full-batch sum is formed as (odd sum + even sum); dividing by the
    power-of-two batch lengths is then exact, which makes the coupling
    identity hold exactly for affine statistics.
    """
    odd, even = split_odd_even(batch)
    sum_odd = odd.sum(axis=0, dtype=np.float64)
    sum_even = even.sum(axis=0, dtype=np.float64)
    half = odd.shape[0]
    return (sum_odd + sum_even) / (2 * half), sum_odd / half, sum_even / half
