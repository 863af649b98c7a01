"""Stochastic primitives: error increments, context weights and the packet channel.

Every process is immutable; randomness comes from a numpy ``Generator`` that the
caller owns. ``make_rng(seed, stream)`` gives each process its own independent
stream so that, for a fixed seed, the increment and weight paths do not depend on
how many channel or policy draws a particular policy consumes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# stream ids, one per source of randomness in a run
INCREMENT_STREAM = 0
WEIGHT_STREAM = 1
CHANNEL_STREAM = 2
POLICY_STREAM = 3
PLANT_STREAM = 4


class ConfigurationError(ValueError):
    """Invalid process or scenario parameters."""


def make_rng(seed, stream: int = 0) -> np.random.Generator:
    """Independent generator for ``(seed, stream)``.

    ``seed`` may be an int or a tuple of ints (e.g. ``(seed, point_index)``).
    """
    entropy = list(seed) if isinstance(seed, (tuple, list)) else seed
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=(stream,)))


@dataclass(frozen=True)
class IncrementProcess:
    """Zero-mean Gaussian error increments with variance ``variance``."""

    variance: float = 1.0

    def __post_init__(self):
        if not (self.variance > 0 and np.isfinite(self.variance)):
            raise ConfigurationError(f"increment variance must be > 0, got {self.variance}")

    @property
    def mean(self) -> float:
        return 0.0

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    def path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, self.std, size=n)


@dataclass(frozen=True)
class ConstantIncrement:
    """Deterministic increment ``A_t = value`` for every slot.

    Not a model of status evolution; used to pin trajectories in checks
    (ramps for the age equivalence, ``A = 0`` for perfect tracking).
    """

    value: float = 1.0

    @property
    def mean(self) -> float:
        return float(self.value)

    @property
    def variance(self) -> float:
        return 0.0

    def path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, float(self.value))


def sample_increment(proc, rng: np.random.Generator) -> float:
    """One increment draw."""
    if isinstance(proc, ConstantIncrement):
        return float(proc.value)
    return float(rng.normal(0.0, proc.std))


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def __post_init__(self):
        if self.value < 0:
            raise ConfigurationError("weight values must be >= 0")

    @property
    def mean(self) -> float:
        return float(self.value)

    @property
    def support(self) -> list[tuple[float, float]]:
        return [(float(self.value), 1.0)]

    def sample(self, t: int, rng: np.random.Generator) -> float:
        return float(self.value)

    def path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.full(n, float(self.value))


@dataclass(frozen=True)
class TwoPointIid:
    """i.i.d. weights: ``high`` with probability ``prob_high``, else ``low``."""

    low: float = 1.0
    high: float = 100.0
    prob_high: float = 0.01

    def __post_init__(self):
        if self.low < 0 or self.high < 0:
            raise ConfigurationError("weight values must be >= 0")
        if not 0.0 <= self.prob_high <= 1.0:
            raise ConfigurationError(f"prob_high must lie in [0, 1], got {self.prob_high}")

    @property
    def mean(self) -> float:
        return self.low * (1.0 - self.prob_high) + self.high * self.prob_high

    @property
    def support(self) -> list[tuple[float, float]]:
        return [(float(self.low), 1.0 - self.prob_high), (float(self.high), float(self.prob_high))]

    def sample(self, t: int, rng: np.random.Generator) -> float:
        return float(self.high if rng.random() < self.prob_high else self.low)

    def path(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.where(rng.random(n) < self.prob_high, float(self.high), float(self.low))


@dataclass(frozen=True)
class Scheduled:
    """Deterministic piecewise-constant weights.

    ``intervals`` holds inclusive ``(start, end, value)`` triples that must tile
    ``[0, horizon)`` without gaps or overlaps.
    """

    intervals: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        ivs = tuple(sorted((int(s), int(e), float(v)) for s, e, v in self.intervals))
        if not ivs:
            raise ConfigurationError("Scheduled weights need at least one interval")
        expected = 0
        for s, e, v in ivs:
            if s != expected:
                raise ConfigurationError(f"interval starting at {s} leaves a gap or overlap at slot {expected}")
            if e < s:
                raise ConfigurationError(f"interval ({s}, {e}) is empty")
            if v < 0:
                raise ConfigurationError("weight values must be >= 0")
            expected = e + 1
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def critical_tail(cls, horizon: int, critical_len: int = 50, ordinary: float = 1.0,
                      critical: float = 100.0) -> "Scheduled":
        """Weight ``ordinary`` then ``critical`` on the last ``critical_len`` slots."""
        critical_len = min(critical_len, horizon)
        split = horizon - critical_len
        ivs = []
        if split > 0:
            ivs.append((0, split - 1, ordinary))
        if critical_len > 0:
            ivs.append((split, horizon - 1, critical))
        return cls(tuple(ivs))

    @property
    def horizon(self) -> int:
        return self.intervals[-1][1] + 1

    @property
    def mean(self) -> float:
        total = sum((e - s + 1) * v for s, e, v in self.intervals)
        return total / self.horizon

    @property
    def support(self):
        return None  # not i.i.d.

    def sample(self, t: int, rng: np.random.Generator | None = None) -> float:
        for s, e, v in self.intervals:
            if s <= t <= e:
                return v
        raise ConfigurationError(f"slot {t} is outside the weight schedule [0, {self.horizon})")

    def path(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        if n > self.horizon:
            raise ConfigurationError(f"slot {n - 1} is outside the weight schedule [0, {self.horizon})")
        out = np.empty(n)
        for s, e, v in self.intervals:
            out[s:e + 1] = v
        return out[:n]


WeightProcess = Constant | TwoPointIid | Scheduled


def sample_weight(proc: WeightProcess, t: int, rng: np.random.Generator) -> float:
    if t < 0:
        raise ConfigurationError("slot index must be >= 0")
    return proc.sample(t, rng)


@dataclass(frozen=True)
class Channel:
    """Bernoulli packet channel: a transmission succeeds with probability ``p``."""

    p: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ConfigurationError(f"success probability must lie in (0, 1], got {self.p}")

    def success(self, u: float) -> int:
        """Map a uniform draw in [0, 1) to a channel bit."""
        return int(u < self.p)


def sample_channel(ch: Channel, rng: np.random.Generator) -> int:
    return ch.success(rng.random())


def weight_support_arrays(support: Sequence[tuple[float, float]]):
    values = np.array([v for v, _ in support], dtype=float)
    probs = np.array([q for _, q in support], dtype=float)
    return values, probs
