"""Scenario builders and per-point drivers shared by the CLI and the checks."""
from __future__ import annotations

import dataclasses
import logging

import numpy as np

from .mdp import Discretization, NonConvergenceError, lagrangian_sweep
from .policies import PolicySpec
from .processes import Channel, IncrementProcess, Scheduled, TwoPointIid
from .sim import ScenarioConfig, run, theorem1_bound

log = logging.getLogger(__name__)

TRADEOFF_POLICIES = ("adaptive", "randomized", "uoi-optimal", "aoi-optimal")


def sample_path_config(rho=0.25, p=1.0, V=1.0, T=5000, seed=0, sigma2=1.0, critical_len=50,
                       critical_weight=100.0, ordinary_weight=1.0, batches=100) -> ScenarioConfig:
    """Ordinary weight for most of the horizon, a critical burst at the end."""
    weights = Scheduled.critical_tail(T, critical_len, ordinary_weight, critical_weight)
    crit_len = min(critical_len, T)
    return ScenarioConfig(horizon=T, seed=seed, increments=IncrementProcess(sigma2), weights=weights,
                          channel=Channel(p), rho=rho, V=V, critical_period=(T - crit_len, T - 1),
                          batches=batches)


def tradeoff_point(rho, p=0.8, weights=None, sigma2=1.0, T=1_000_000, V=1.0, seed=0, q_bins=201,
                   age_max=100, rvi_tol=1e-8, rvi_max_iter=100_000, batches=100) -> list[dict]:
    """Adaptive, randomized and the two RVI baselines at one frequency budget.

    All four runs share increments and weights (common random numbers). A
    baseline whose solver fails to converge comes back with ``status`` set and
    NaN statistics.
    """
    weights = weights or TwoPointIid()
    base = ScenarioConfig(horizon=T, seed=seed, increments=IncrementProcess(sigma2), weights=weights,
                          channel=Channel(p), rho=rho, V=V, batches=batches)
    disc = Discretization.default(sigma2, p, rho, weights.support, q_bins=q_bins, age_max=age_max)
    specs = {"adaptive": PolicySpec("adaptive"), "randomized": PolicySpec("randomized")}
    status = {k: "ok" for k in TRADEOFF_POLICIES}
    model_cost = {}
    for name, metric in (("uoi-optimal", "uoi"), ("aoi-optimal", "aoi")):
        try:
            pt = lagrangian_sweep(disc, sigma2, p, metric, [rho], tol=rvi_tol, max_iter=rvi_max_iter)[0]
        except NonConvergenceError as exc:
            log.warning("rho=%s %s: %s", rho, name, exc)
            status[name] = "nonconverged"
            continue
        specs[name] = PolicySpec("tabular", table=pt.policy, label=name)
        model_cost[name] = pt.avg_cost

    rows = []
    for name in TRADEOFF_POLICIES:
        row = {"rho": rho, "policy": name, "avg_uoi": float("nan"), "avg_update_rate": float("nan"),
               "stderr": float("nan"), "status": status[name]}
        if name in specs:
            s, _ = run(dataclasses.replace(base, policy=specs[name]))
            row.update(avg_uoi=s.avg_uoi, avg_update_rate=s.avg_update_rate, stderr=s.uoi_stderr)
        rows.append(row)
    return rows


def bound_check_point(p, rho, V, weights=None, sigma2=1.0, T=1_000_000, seed=0, batches=100) -> dict:
    weights = weights or TwoPointIid()
    cfg = ScenarioConfig(horizon=T, seed=seed, increments=IncrementProcess(sigma2), weights=weights,
                         channel=Channel(p), rho=rho, V=V, batches=batches)
    s, _ = run(cfg)
    bound = theorem1_bound(weights.mean, sigma2, p, rho, V)
    ok = s.avg_uoi <= bound + 3 * s.uoi_stderr if np.isfinite(s.uoi_stderr) else s.avg_uoi <= bound
    return {"p": p, "rho": rho, "V": V, "omega_bar": weights.mean, "sigma2": sigma2, "avg_uoi": s.avg_uoi,
            "stderr": s.uoi_stderr, "bound": bound, "margin": bound - s.avg_uoi,
            "avg_update_rate": s.avg_update_rate, "h_over_t": s.final_h_over_t,
            "result": "PASS" if ok else "FAIL"}
