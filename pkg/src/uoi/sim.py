"""Slot-by-slot simulation of a status-update terminal under a frequency budget.

Per slot ``t``: the next weight ``omega[t+1]`` is revealed, the policy picks
``U[t]`` from ``(t, Q[t], omega[t+1], H[t])``, a channel bit is drawn only when
``U[t] = 1``, then error, virtual queue and age advance. The objective
accumulates ``omega[t] * Q[t]**2``; the drift diagnostic uses the next-slot
pairing ``omega[t+1] * Q[t+1]**2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernel as K
from .processes import (CHANNEL_STREAM, INCREMENT_STREAM, POLICY_STREAM, WEIGHT_STREAM, Channel,
                        ConfigurationError, IncrementProcess, Scheduled, make_rng)
from .policies import AdaptivePolicyParams, PolicySpec


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    horizon: int
    seed: int | tuple = 0
    increments: object = field(default_factory=IncrementProcess)
    weights: object = None
    channel: Channel = field(default_factory=Channel)
    policy: PolicySpec = field(default_factory=PolicySpec)
    rho: float = 0.25
    V: float = 1.0
    critical_period: tuple[int, int] | None = None  # inclusive slot range
    q0: float = 0.0
    h0: float = 0.0
    age0: int = 1
    batches: int = 100

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")
        if not 0 < self.rho <= 1:
            raise ConfigurationError(f"rho must lie in (0, 1], got {self.rho}")
        if not self.V > 0:
            raise ConfigurationError(f"V must be > 0, got {self.V}")
        if self.weights is None:
            raise ConfigurationError("weights process is required")
        if self.h0 < 0 or self.age0 < 1:
            raise ConfigurationError("h0 must be >= 0 and age0 >= 1")
        if self.batches < 1:
            raise ConfigurationError("batches must be >= 1")

    @property
    def omega_bar(self) -> float:
        return float(self.weights.mean)

    @property
    def theta(self) -> float:
        return AdaptivePolicyParams(self.V, self.omega_bar, self.channel.p, self.rho).theta

    def environment(self):
        return (self.horizon, self.seed, self.increments, self.weights, self.channel)


@dataclass(frozen=True)
class PeriodStats:
    critical_avg_sq_error: float
    ordinary_avg_sq_error: float
    critical_update_rate: float
    ordinary_update_rate: float


@dataclass(frozen=True)
class RunSummary:
    avg_uoi: float
    avg_aoi: float
    avg_update_rate: float
    final_h_over_t: float
    avg_drift_plus_penalty: float
    uoi_stderr: float
    dpp_stderr: float
    updates: int
    final_h: float
    horizon: int
    h0: float = 0.0
    per_period: PeriodStats | None = None
    policy: str = ""


@dataclass
class Trace:
    t: np.ndarray
    Q: np.ndarray
    omega: np.ndarray
    H: np.ndarray
    U: np.ndarray
    S: np.ndarray  # -1 where no transmission was attempted
    J: np.ndarray  # nan for non-adaptive policies
    uoi: np.ndarray
    age: np.ndarray

    COLUMNS = ("t", "Q", "omega", "H", "U", "S", "J", "uoi", "age")

    def __len__(self):
        return len(self.t)


def batch_means(batch_sums: np.ndarray, batch_counts: np.ndarray) -> tuple[float, float]:
    """Grand mean and the batch-means standard error."""
    keep = batch_counts > 0
    means = batch_sums[keep] / batch_counts[keep]
    total = batch_sums[keep].sum() / batch_counts[keep].sum()
    if means.size < 2:
        return float(total), float("nan")
    return float(total), float(means.std(ddof=1) / np.sqrt(means.size))


def _weight_path(weights, n: int, rng) -> np.ndarray:
    if isinstance(weights, Scheduled) and n == weights.horizon + 1:
        # lookahead past a schedule that ends with the horizon: only feeds the
        # final decision, which never reaches the averaged objective
        path = weights.path(n - 1, rng)
        return np.append(path, path[-1])
    return weights.path(n, rng)


def _policy_arrays(config: ScenarioConfig, weights: np.ndarray):
    spec = config.policy
    dummy3, dummy1 = np.zeros((1, 1, 1)), np.zeros(1)
    w_idx = np.zeros(weights.shape[0], dtype=np.int64)
    q_max, q_step = 1.0, 1.0
    kinds = {"adaptive": K.ADAPTIVE, "randomized": K.RANDOMIZED, "periodic": K.PERIODIC,
             "never": K.NEVER, "always": K.ALWAYS}
    if spec.kind != "tabular":
        return kinds[spec.kind], dummy3, dummy1, w_idx, q_max, q_step
    pol = spec.table
    if pol.metric == "aoi":
        return K.TABLE_AOI, dummy3, np.ascontiguousarray(pol.table(), dtype=float), w_idx, q_max, q_step
    d = pol.disc
    w_idx = d.weight_index(weights).astype(np.int64)
    return K.TABLE_UOI, np.ascontiguousarray(pol.table(), dtype=float), dummy1, w_idx, d.q_max, d.step


def run(config: ScenarioConfig, trace: bool = False) -> tuple[RunSummary, Trace | None]:
    T = config.horizon
    seed = config.seed
    incr = np.ascontiguousarray(config.increments.path(T, make_rng(seed, INCREMENT_STREAM)), dtype=float)
    weights = np.ascontiguousarray(_weight_path(config.weights, T + 1, make_rng(seed, WEIGHT_STREAM)),
                                   dtype=float)
    chan_u = make_rng(seed, CHANNEL_STREAM).random(T)
    pol_u = make_rng(seed, POLICY_STREAM).random(T)
    kind, tab3, tab1, w_idx, q_max, q_step = _policy_arrays(config, weights)

    nb = min(config.batches, T)
    b_uoi, b_dpp, b_n = np.zeros(nb), np.zeros(nb), np.zeros(nb)
    n_tr = T if trace else 1
    tr = [np.zeros(n_tr) for _ in range(8)]
    crit = config.critical_period or (-1, -2)
    p = config.channel.p
    omega_bar = config.omega_bar
    theta = config.theta

    res = K.simulate(incr, weights, w_idx, chan_u, pol_u, kind, float(config.rho), float(config.V),
                     omega_bar, float(p), int(config.policy.period), tab3, float(q_max), float(q_step), tab1,
                     float(config.q0), float(config.h0), int(config.age0), float(theta),
                     int(crit[0]), int(crit[1]), b_uoi, b_dpp, b_n, trace, *tr)
    if res[K.R_STATUS] > 0:
        raise SimulationError(f"estimation error overflowed at slot {int(res[K.R_STATUS]) - 1}")

    avg_uoi, se_uoi = batch_means(b_uoi, b_n)
    avg_dpp, se_dpp = batch_means(b_dpp, b_n)
    per_period = None
    if config.critical_period is not None:
        def ratio(a, n):
            return float(res[a] / res[n]) if res[n] > 0 else float("nan")
        per_period = PeriodStats(ratio(K.R_CRIT_SQ, K.R_CRIT_N), ratio(K.R_ORD_SQ, K.R_ORD_N),
                                 ratio(K.R_CRIT_U, K.R_CRIT_N), ratio(K.R_ORD_U, K.R_ORD_N))
    summary = RunSummary(avg_uoi=avg_uoi, avg_aoi=float(res[K.R_AOI] / T),
                         avg_update_rate=float(res[K.R_UPDATES] / T), final_h_over_t=float(res[K.R_FINAL_H] / T), avg_drift_plus_penalty=avg_dpp,
                         uoi_stderr=se_uoi, dpp_stderr=se_dpp, updates=int(res[K.R_UPDATES]),
                         final_h=float(res[K.R_FINAL_H]), horizon=T, h0=float(config.h0),
                         per_period=per_period, policy=config.policy.name)
    out = None
    if trace:
        out = Trace(t=np.arange(T), Q=tr[0], omega=tr[1], H=tr[2], U=tr[3].astype(np.int64),
                    S=tr[4].astype(np.int64), J=tr[5], uoi=tr[6], age=tr[7].astype(np.int64))
    return summary, out


def drift_plus_penalty_series(trace: Trace, V: float, theta: float) -> np.ndarray:
    """``L[t+1] - L[t] + omega[t+1] * Q[t+1]**2`` for consecutive trace records."""
    if len(trace) < 2:
        raise ValueError("drift diagnostic needs at least 2 trace records")
    L = 0.5 * V * trace.H ** 2 + theta * trace.Q ** 2
    return np.diff(L) + trace.omega[1:] * trace.Q[1:] ** 2


def drift_diagnostic(trace: Trace, V: float, theta: float) -> float:
    return float(drift_plus_penalty_series(trace, V, theta).mean())


def theorem1_bound(omega_bar: float, sigma2: float, p: float, rho: float, V: float) -> float:
    """Upper bound on the long-run average urgency under the adaptive policy."""
    if not p * rho > 0:
        raise ValueError("p * rho must be > 0")
    return omega_bar * sigma2 / (p * rho) + 0.5 * V


def compare_policies(configs: Sequence[ScenarioConfig]) -> list[RunSummary]:
    """Run several policies on one sampled environment (common random numbers)."""
    if not configs:
        return []
    env = configs[0].environment()
    for c in configs[1:]:
        if c.environment() != env:
            raise ConfigurationError("configs being compared must share horizon, seed and processes")
    return [run(c)[0] for c in configs]
