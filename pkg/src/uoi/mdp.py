"""Average-cost MDP baselines for the single-terminal update problem.

The continuous error is folded onto a symmetric grid, the MDP is solved by
relative value iteration for a Lagrangian price ``lam`` per transmission, and
``lagrangian_sweep`` searches ``lam`` (mixing the two bracketing policies) so
the solved policy meets an update-frequency budget exactly.

State layouts:

* ``metric="uoi"``: ``(q_index, w_index, w_next_index)`` flattened row-major,
  stage cost ``E[w_next * Q_next**2]``.
* ``metric="aoi"``: ages ``1..age_max`` (``age_max`` absorbs older ages), stage
  cost ``E[age_next]``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.special import ndtr

log = logging.getLogger(__name__)

METRICS = ("uoi", "aoi")


class NonConvergenceError(RuntimeError):
    def __init__(self, span: float, iterations: int):
        super().__init__(f"relative value iteration did not converge after {iterations} iterations "
                         f"(last span {span:.3e})")
        self.span = span
        self.iterations = iterations


class UnreachableRateError(ValueError):
    pass


@dataclass(frozen=True)
class Discretization:
    q_max: float
    q_bins: int
    weight_support: tuple[tuple[float, float], ...] = ((1.0, 1.0),)
    age_max: int = 100

    def __post_init__(self):
        if not self.q_max > 0:
            raise ValueError(f"q_max must be > 0, got {self.q_max}")
        if self.q_bins < 3 or self.q_bins % 2 == 0:
            raise ValueError(f"q_bins must be an odd integer >= 3, got {self.q_bins}")
        if self.age_max < 2:
            raise ValueError("age_max must be >= 2")
        support = tuple((float(v), float(q)) for v, q in self.weight_support)
        if not support:
            raise ValueError("weight support is empty")
        if any(v < 0 or q < 0 for v, q in support):
            raise ValueError("weight values and probabilities must be >= 0")
        if abs(sum(q for _, q in support) - 1.0) > 1e-12:
            raise ValueError("weight probabilities must sum to 1")
        object.__setattr__(self, "weight_support", support)

    @classmethod
    def default(cls, sigma2: float, p: float, rho: float, weight_support, q_bins: int = 201,
                age_max: int = 100) -> "Discretization":
        q_max = 10.0 * np.sqrt(sigma2) / np.sqrt(p * rho)
        return cls(q_max=float(q_max), q_bins=q_bins, weight_support=tuple(weight_support), age_max=age_max)

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(-self.q_max, self.q_max, self.q_bins)

    @property
    def step(self) -> float:
        return 2.0 * self.q_max / (self.q_bins - 1)

    @property
    def zero_index(self) -> int:
        return self.q_bins // 2

    @property
    def weight_values(self) -> np.ndarray:
        return np.array([v for v, _ in self.weight_support])

    @property
    def weight_probs(self) -> np.ndarray:
        return np.array([q for _, q in self.weight_support])

    def q_index(self, Q) -> np.ndarray:
        idx = np.rint((np.asarray(Q, dtype=float) + self.q_max) / self.step)
        return np.clip(idx, 0, self.q_bins - 1).astype(np.int64)

    def weight_index(self, omega) -> np.ndarray:
        vals = self.weight_values
        return np.abs(np.asarray(omega, dtype=float)[..., None] - vals).argmin(axis=-1)


def increment_kernel(disc: Discretization, sigma2: float) -> np.ndarray:
    """``K[i, j] = P(grid[i] + A lands in bin j)`` with tails lumped into the edge bins."""
    g = disc.grid
    sigma = np.sqrt(sigma2)
    upper = g[:-1] + disc.step / 2  # upper edges of all but the last bin
    cdf = ndtr((upper[None, :] - g[:, None]) / sigma)
    n = disc.q_bins
    cum = np.concatenate([np.zeros((n, 1)), cdf, np.ones((n, 1))], axis=1)
    return np.diff(cum, axis=1)


@dataclass(frozen=True)
class MdpModel:
    metric: str
    disc: Discretization
    sigma2: float
    p: float
    lam: float
    transitions: np.ndarray = field(repr=False)  # (2, S, S)
    base_cost: np.ndarray = field(repr=False)  # (2, S), cost without the transmission price
    states: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def initial_state(self) -> int:
        """Zero error (or age 1) with the first weight pair."""
        if self.metric == "aoi":
            return 0
        nw = len(self.disc.weight_support)
        return self.disc.zero_index * nw * nw

    @property
    def stage_cost(self) -> np.ndarray:
        return self.base_cost + self.lam * np.array([0.0, 1.0])[:, None]

    def with_lambda(self, lam: float) -> "MdpModel":
        if lam < 0:
            raise ValueError("lambda must be >= 0")
        return replace(self, lam=float(lam))


def build_mdp(disc: Discretization, sigma2: float, p: float, metric: str = "uoi",
              lam: float = 0.0) -> MdpModel:
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if metric == "aoi":
        return _build_aoi(disc, sigma2, p, lam)
    if not sigma2 > 0:
        raise ValueError("sigma2 must be > 0")

    K = increment_kernel(disc, sigma2)
    K1 = p * K[disc.zero_index][None, :] + (1 - p) * K
    nq = disc.q_bins
    w_vals, w_probs = disc.weight_values, disc.weight_probs
    nw = len(w_vals)
    # weight shift: (w, wn) -> (wn, fresh draw)
    shift = np.einsum("bc,d->bcd", np.eye(nw), w_probs)  # [wn, w', wn']
    shift = np.broadcast_to(shift[None], (nw, nw, nw, nw))  # [w, wn, w', wn']
    S = nq * nw * nw
    P = np.empty((2, S, S))
    for a, Kq in enumerate((K, K1)):
        P[a] = np.einsum("ij,abcd->iabjcd", Kq, shift).reshape(S, S)

    q2 = disc.grid ** 2
    eq2 = np.stack([K @ q2, K1 @ q2])  # (2, nq)
    cost = eq2[:, :, None, None] * w_vals[None, None, None, :]
    cost = np.broadcast_to(cost, (2, nq, nw, nw)).reshape(2, S).copy()
    qi, wi, wni = np.meshgrid(np.arange(nq), np.arange(nw), np.arange(nw), indexing="ij")
    states = np.stack([qi.ravel(), wi.ravel(), wni.ravel()], axis=1)
    return MdpModel("uoi", disc, float(sigma2), float(p), float(lam), P, cost, states)


def _build_aoi(disc: Discretization, sigma2: float, p: float, lam: float) -> MdpModel:
    n = disc.age_max
    ages = np.arange(1, n + 1)
    nxt = np.minimum(ages + 1, n) - 1
    P = np.zeros((2, n, n))
    P[0, np.arange(n), nxt] = 1.0
    P[1, np.arange(n), nxt] = 1.0 - p
    P[1, :, 0] += p
    cost = np.stack([P[0] @ ages, P[1] @ ages]).astype(float)
    return MdpModel("aoi", disc, float(sigma2), float(p), float(lam), P, cost, ages[:, None])


@dataclass
class MdpPolicy:
    """Update probability per state plus its long-run statistics.

    ``actions`` is 0/1 for deterministic policies; a mixed frontier policy has
    fractional entries where it randomises. ``average_cost`` is the
    Lagrangian average cost (stage cost including ``lam`` per update);
    ``metric_cost`` excludes the transmission price.
    """

    actions: np.ndarray
    average_cost: float
    average_update_rate: float
    metric: str
    disc: Discretization
    lam: float = 0.0
    metric_cost: float = float("nan")
    relative_values: np.ndarray | None = field(default=None, repr=False)
    iterations: int = 0
    span: float = 0.0

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=float)
        if self.actions.size == 0:
            raise ValueError("policy table is empty")

    def table(self) -> np.ndarray:
        """Actions reshaped to the state axes: ``(nq, nw, nw)`` or ``(age_max,)``."""
        if self.metric == "aoi":
            return self.actions.reshape(-1)
        nw = len(self.disc.weight_support)
        return self.actions.reshape(self.disc.q_bins, nw, nw)

    def action_probability(self, state) -> float:
        if self.actions.size == 0:
            raise ValueError("policy table is empty")
        if self.metric == "aoi":
            age = int(state)
            idx = min(max(age, 1), self.actions.size) - 1
            return float(self.actions[idx])
        Q, omega, omega_next = state
        d = self.disc
        qi = int(d.q_index(Q))
        wi = int(d.weight_index(omega))
        wni = int(d.weight_index(omega_next))
        return float(self.table()[qi, wi, wni])


def _bellman(mdp: MdpModel, h: np.ndarray, tau: float) -> np.ndarray:
    c = mdp.stage_cost
    return c + tau * np.einsum("aij,j->ai", mdp.transitions, h) + (1.0 - tau) * h[None, :]


def relative_value_iteration(mdp: MdpModel, tol: float = 1e-8, max_iter: int = 100_000,
                             h0: np.ndarray | None = None, aperiodicity: float = 0.5,
                             ref_state: int = 0) -> MdpPolicy:
    """Average-cost optimal policy by relative value iteration.

    Iterates on the aperiodic transform ``tau*P + (1-tau)*I`` (same gain and
    greedy policy, guaranteed convergence on periodic chains) until the span of
    ``T h - h`` drops below ``tol``.
    """
    if not 0 < aperiodicity <= 1:
        raise ValueError("aperiodicity must lie in (0, 1]")
    h = np.zeros(mdp.n_states) if h0 is None else np.array(h0, dtype=float)
    span = np.inf
    for it in range(1, max_iter + 1):
        Qsa = _bellman(mdp, h, aperiodicity)
        Th = Qsa.min(axis=0)
        diff = Th - h
        lo, hi = diff.min(), diff.max()
        span = hi - lo
        h = Th - Th[ref_state]
        if span < tol:
            break
    else:
        raise NonConvergenceError(float(span), max_iter)
    g = 0.5 * (lo + hi)
    Qsa = _bellman(mdp, h, aperiodicity)
    actions = (Qsa[1] < Qsa[0]).astype(float)
    metric_cost, rate = evaluate_policy(mdp, actions)
    return MdpPolicy(actions=actions, average_cost=float(g), average_update_rate=rate, metric=mdp.metric,
                     disc=mdp.disc, lam=mdp.lam, metric_cost=metric_cost, relative_values=h,
                     iterations=it, span=float(span))


def stationary_distribution(P: np.ndarray) -> tuple[np.ndarray, float]:
    """Stationary distribution of a unichain transition matrix and its residual."""
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        mu = np.linalg.solve(A, b)
        resid = float(np.abs(mu @ P - mu).max())
        if np.all(np.isfinite(mu)) and mu.min() > -1e-9 and resid < 1e-9:
            mu = np.clip(mu, 0.0, None)
            return mu / mu.sum(), resid
    except np.linalg.LinAlgError:
        pass
    # ill-conditioned: damped power iteration from uniform
    lazy = 0.5 * (P + np.eye(n))
    mu = np.full(n, 1.0 / n)
    for _ in range(200_000):
        nxt = mu @ lazy
        if np.abs(nxt - mu).max() < 1e-14:
            mu = nxt
            break
        mu = nxt
    resid = float(np.abs(mu @ P - mu).max())
    log.warning("stationary distribution via power iteration, residual %.3e", resid)
    return mu, resid


def closed_classes(P: np.ndarray) -> list[np.ndarray]:
    """Recurrent classes (closed strongly connected components) of a chain."""
    adj = csr_matrix(P > 0)
    n_comp, labels = connected_components(adj, directed=True, connection="strong")
    leaves = np.ones(n_comp, dtype=bool)
    rows, cols = adj.nonzero()
    leaves[labels[rows][labels[rows] != labels[cols]]] = False
    return [np.flatnonzero(labels == c) for c in np.flatnonzero(leaves)]


def limiting_distribution(P: np.ndarray, start: int) -> np.ndarray:
    """Long-run state occupation from ``start``; handles several recurrent classes."""
    classes = closed_classes(P)
    if len(classes) == 1:
        return stationary_distribution(P)[0]
    n = P.shape[0]
    recurrent = np.zeros(n, dtype=bool)
    for c in classes:
        recurrent[c] = True
    trans = np.flatnonzero(~recurrent)
    mu = np.zeros(n)
    for c in classes:
        if start in c:
            absorb = 1.0
        elif recurrent[start]:
            continue
        else:
            # probability of ending in class c, solved over the transient states
            A = np.eye(trans.size) - P[np.ix_(trans, trans)]
            rhs = P[np.ix_(trans, c)].sum(axis=1)
            absorb = np.linalg.solve(A, rhs)[np.searchsorted(trans, start)]
        if absorb > 0:
            sub = P[np.ix_(c, c)]
            mu[c] += absorb * stationary_distribution(sub / sub.sum(axis=1, keepdims=True))[0]
    return mu


def evaluate_policy(mdp: MdpModel, policy) -> tuple[float, float]:
    """Exact long-run (metric cost, update rate) of a stationary policy.

    ``policy`` is an :class:`MdpPolicy` or an array of per-state update
    probabilities. The cost excludes the Lagrangian transmission price. When
    the policy splits the chain into several recurrent classes the averages
    are taken from ``mdp.initial_state``.
    """
    pi = np.asarray(policy.actions if isinstance(policy, MdpPolicy) else policy, dtype=float)
    if pi.shape != (mdp.n_states,):
        raise ValueError(f"policy has {pi.size} entries, MDP has {mdp.n_states} states")
    P = (1 - pi)[:, None] * mdp.transitions[0] + pi[:, None] * mdp.transitions[1]
    c = (1 - pi) * mdp.base_cost[0] + pi * mdp.base_cost[1]
    mu = limiting_distribution(P, mdp.initial_state)
    return float(mu @ c), float(mu @ pi)


@dataclass
class SweepPoint:
    rho: float
    avg_cost: float
    policy: MdpPolicy
    lam: float
    mix: float = 1.0  # weight on the lower-price (higher-rate) policy


def lagrangian_sweep(disc: Discretization, sigma2: float, p: float, metric: str,
                     target_rates: Sequence[float], tol: float = 1e-8,
                     max_iter: int = 100_000) -> list[SweepPoint]:
    """Constrained-optimal policies, one per target update rate.

    For each target the transmission price is bisected until the two bracketing
    greedy policies are neighbours on the frontier (their rates straddle the
    target and they differ in at most one state, or the price interval has
    collapsed); the final policy randomises between them to hit the target
    rate exactly.
    """
    base = build_mdp(disc, sigma2, p, metric, 0.0)
    cache: dict[float, MdpPolicy] = {}
    last_h = [None]

    def solve(lam: float) -> MdpPolicy:
        if lam not in cache:
            pol = relative_value_iteration(base.with_lambda(lam), tol=tol, max_iter=max_iter, h0=last_h[0])
            last_h[0] = pol.relative_values
            cache[lam] = pol
        return cache[lam]

    out = []
    for rho in target_rates:
        if not 0 < rho < 1:
            raise UnreachableRateError(f"target rate {rho} outside (0, 1)")
        top = solve(0.0)
        if top.average_update_rate < rho - 1e-12:
            raise UnreachableRateError(f"target rate {rho} exceeds the maximum rate "
                                       f"{top.average_update_rate:.6f} of this MDP")
        # tightest bracket already known
        lo = max(l for l, pol in cache.items() if pol.average_update_rate >= rho)
        his = [l for l, pol in cache.items() if pol.average_update_rate <= rho]
        if his:
            hi = min(his)
        else:
            hi = max(1.0, 2 * lo)
            while solve(hi).average_update_rate > rho:
                hi *= 2
                if hi > 1e15:
                    raise UnreachableRateError(f"no price drives the rate below {rho}")
        for _ in range(200):
            p_lo, p_hi = solve(lo), solve(hi)
            if abs(p_lo.average_update_rate - rho) < 1e-12 or abs(p_hi.average_update_rate - rho) < 1e-12:
                break
            # neighbours on the frontier: both optimal at the breakpoint price
            if np.count_nonzero(p_lo.actions != p_hi.actions) <= 1 or hi - lo <= 1e-10 * max(1.0, hi):
                break
            mid = 0.5 * (lo + hi)
            if solve(mid).average_update_rate >= rho:
                lo = mid
            else:
                hi = mid
        out.append(_mix_point(base, rho, lo, hi, solve(lo), solve(hi)))
    return out


def _mix_point(base: MdpModel, rho: float, lam_lo: float, lam_hi: float, hi_rate: MdpPolicy,
               lo_rate: MdpPolicy) -> SweepPoint:
    r1, r0 = hi_rate.average_update_rate, lo_rate.average_update_rate
    if abs(r1 - rho) < 1e-12:
        alpha, actions, lam = 1.0, hi_rate.actions, lam_lo
    elif abs(r0 - rho) < 1e-12 or r1 - r0 < 1e-15:
        alpha, actions, lam = 0.0, lo_rate.actions, lam_hi
    else:
        def excess(a):
            return evaluate_policy(base, a * hi_rate.actions + (1 - a) * lo_rate.actions)[1] - rho
        alpha = brentq(excess, 0.0, 1.0, xtol=1e-15, rtol=1e-15)
        actions = alpha * hi_rate.actions + (1 - alpha) * lo_rate.actions
        lam = 0.5 * (lam_lo + lam_hi)
    cost, rate = evaluate_policy(base, actions)
    pol = MdpPolicy(actions=actions, average_cost=cost + lam * rate, average_update_rate=rate,
                    metric=base.metric, disc=base.disc, lam=lam, metric_cost=cost)
    return SweepPoint(rho=float(rho), avg_cost=cost, policy=pol, lam=lam, mix=float(alpha))


def save_policy(path, policy: MdpPolicy, sigma2: float | None = None, p: float | None = None) -> None:
    """Write a solved policy as a flat table with a ``#`` metadata header."""
    d = policy.disc
    support = ";".join(f"{v!r}:{q!r}" for v, q in d.weight_support)
    header = {
        "metric": policy.metric, "q_max": repr(d.q_max), "q_bins": d.q_bins, "weight_support": support,
        "age_max": d.age_max, "lam": repr(policy.lam), "average_cost": repr(policy.average_cost),
        "metric_cost": repr(policy.metric_cost), "average_update_rate": repr(policy.average_update_rate),
    }
    if sigma2 is not None:
        header["sigma2"] = repr(sigma2)
    if p is not None:
        header["p"] = repr(p)
    lines = [f"# {k}={v}" for k, v in header.items()]
    if policy.metric == "aoi":
        lines.append("age,action")
        lines += [f"{i + 1},{float(a)!r}" for i, a in enumerate(policy.actions)]
    else:
        lines.append("q_index,w_index,w_next_index,action")
        tab = policy.table()
        for (qi, wi, wni), a in np.ndenumerate(tab):
            lines.append(f"{qi},{wi},{wni},{float(a)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_policy(path) -> MdpPolicy:
    meta, rows = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line and not line[0].isalpha():
            rows.append([float(x) for x in line.split(",")])
    if not rows:
        raise ValueError(f"{path}: policy table is empty")
    support = tuple(tuple(float(x) for x in item.split(":")) for item in meta["weight_support"].split(";"))
    disc = Discretization(q_max=float(meta["q_max"]), q_bins=int(meta["q_bins"]), weight_support=support,
                          age_max=int(meta["age_max"]))
    rows = np.array(rows)
    return MdpPolicy(actions=rows[:, -1], average_cost=float(meta["average_cost"]),
                     average_update_rate=float(meta["average_update_rate"]), metric=meta["metric"],
                     disc=disc, lam=float(meta["lam"]), metric_cost=float(meta["metric_cost"]))
