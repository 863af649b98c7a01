"""Remote tracking control of a scalar linear plant over an update channel.

The controller only sees the terminal through status updates. It keeps a model
estimate ``xhat`` (overridden whenever a status packet arrives) and applies the
control that would put the plant on target if the estimate were exact. The
weighted tracking error then splits into ``a**2`` times the weighted
estimation error plus the irreducible noise term ``omega_bar * Var(r)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernel as K
from .processes import (CHANNEL_STREAM, PLANT_STREAM, POLICY_STREAM, WEIGHT_STREAM, Channel,
                        ConfigurationError, make_rng)
from .policies import PolicySpec
from .sim import SimulationError, _weight_path, batch_means


@dataclass(frozen=True)
class PlantConfig:
    a: float = 1.0
    b: float = 1.0
    noise_variance: float = 1.0
    reference: Sequence[float] | None = None  # defaults to y_t = 0

    def __post_init__(self):
        if self.b == 0:
            raise ConfigurationError("plant input gain b must be non-zero")
        if self.noise_variance < 0:
            raise ConfigurationError("noise variance must be >= 0")

    def reference_path(self, T: int) -> np.ndarray:
        if self.reference is None:
            return np.zeros(T)
        y = np.asarray(self.reference, dtype=float)
        if y.shape[0] < T:
            raise ConfigurationError(f"reference trajectory has {y.shape[0]} slots, need {T}")
        return np.ascontiguousarray(y[:T])


@dataclass
class ControllerState:
    xhat: float = 0.0
    last_control: float = 0.0


def optimal_control(xhat_prev: float, y: float, a: float, b: float) -> float:
    if b == 0:
        raise ValueError("plant input gain b must be non-zero")
    return (y - a * xhat_prev) / b


def estimator_step(xhat: float, v: float, a: float, b: float, received: float | None = None) -> float:
    if received is not None:
        return received
    return a * xhat + b * v


@dataclass(frozen=True)
class TrackingResult:
    avg_weighted_tracking_error: float
    avg_weighted_estimation_error: float
    tracking_stderr: float
    estimation_stderr: float
    residual: float  # tracking - a^2 * estimation - omega_bar * Var(r)
    residual_stderr: float
    avg_update_rate: float
    omega_bar: float
    x: np.ndarray | None = None
    xhat: np.ndarray | None = None

    def __iter__(self):
        yield self.avg_weighted_tracking_error
        yield self.avg_weighted_estimation_error


_KINDS = {"adaptive": K.ADAPTIVE, "randomized": K.RANDOMIZED, "periodic": K.PERIODIC,
          "never": K.NEVER, "always": K.ALWAYS}


def run_tracking(plant: PlantConfig, weights, policy: PolicySpec, channel: Channel, T: int, seed=0,
                 rho: float = 0.25, V: float = 1.0, batches: int = 100,
                 keep_path: bool = False) -> TrackingResult:
    """Simulate the closed loop for ``T`` slots and return the weighted averages.

    Unpacks as ``(avg_weighted_tracking_error, avg_weighted_estimation_error)``.
    """
    if policy.kind not in _KINDS:
        raise ConfigurationError(f"policy kind {policy.kind!r} is not supported by the tracker")
    if T < 1:
        raise ConfigurationError("horizon must be >= 1")
    r = make_rng(seed, PLANT_STREAM).normal(0.0, np.sqrt(plant.noise_variance), size=T)
    w = np.ascontiguousarray(_weight_path(weights, T + 1, make_rng(seed, WEIGHT_STREAM)), dtype=float)
    chan_u = make_rng(seed, CHANNEL_STREAM).random(T)
    pol_u = make_rng(seed, POLICY_STREAM).random(T)
    nb = min(batches, T)
    bt, be, br, bn = (np.zeros(nb) for _ in range(4))
    x, xhat = np.zeros(T), np.zeros(T)
    omega_bar = float(weights.mean)
    status, updates = K.track(r, plant.reference_path(T), w, chan_u, pol_u, float(plant.a), float(plant.b),
                              float(plant.noise_variance), _KINDS[policy.kind], float(rho), float(V), omega_bar,
                              float(channel.p), int(policy.period), bt, be, br, bn, x, xhat)
    if status > 0:
        raise SimulationError(f"plant state diverged at slot {status - 1}; "
                              f"|a| = {abs(plant.a)} with too few updates")
    trk, se_t = batch_means(bt, bn)
    est, se_e = batch_means(be, bn)
    resid, se_r = batch_means(br, bn)
    return TrackingResult(trk, est, se_t, se_e, resid, se_r, float(updates / T), omega_bar,
                          x if keep_path else None, xhat if keep_path else None)
