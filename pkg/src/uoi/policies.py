"""Update decision rules.

Every rule looks at the same information: slot ``t``, current error ``Q``, the
next slot's weight ``omega_next`` and the virtual queue ``H``. The functions here
act on explicit state; the simulation kernel in :mod:`uoi._kernel` runs the same
rules in compiled form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .mdp import MdpPolicy


@dataclass(frozen=True)
class AdaptivePolicyParams:
    V: float
    omega_bar: float
    p: float
    rho: float

    def __post_init__(self):
        if not self.V > 0:
            raise ValueError(f"V must be > 0, got {self.V}")
        if self.omega_bar < 0:
            raise ValueError("omega_bar must be >= 0")
        if not (0 < self.p <= 1 and 0 < self.rho <= 1):
            raise ValueError("p and rho must lie in (0, 1]")

    @property
    def theta(self) -> float:
        """Lyapunov weight on the squared error that minimises the drift bound."""
        pr = self.p * self.rho
        return self.omega_bar * (1 - pr) / pr


@dataclass(frozen=True)
class PolicyDecision:
    U: int
    update_index: float = float("nan")
    threshold: float = float("nan")


def update_index(omega_next: float, params: AdaptivePolicyParams, Q: float) -> float:
    """Expected reduction of next-slot urgency from transmitting now."""
    ob = params.omega_bar
    return (omega_next - ob + ob / (params.p * params.rho)) * params.p * Q * Q


def adaptive_decide(J: float, V: float, H: float) -> PolicyDecision:
    # ties go to "no update"
    threshold = V * H
    return PolicyDecision(U=int(J > threshold), update_index=J, threshold=threshold)


def virtual_queue_step(H: float, rho: float, U: int) -> float:
    return max(H - rho + U, 0.0)


@dataclass
class VirtualQueue:
    rho: float
    H: float = 0.0
    history: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.H < 0:
            raise ValueError("H must be >= 0")

    def step(self, U: int) -> float:
        self.H = virtual_queue_step(self.H, self.rho, U)
        return self.H


def randomized_decide(rho: float, rng: np.random.Generator) -> int:
    if not 0 <= rho <= 1:
        raise ValueError("rho must lie in [0, 1]")
    return int(rng.random() < rho)


def periodic_decide(t: int, period: int) -> int:
    if period < 1:
        raise ValueError("period must be >= 1")
    return int(t % period == 0)


def tabular_decide(policy: "MdpPolicy", state, rng: np.random.Generator | None = None) -> int:
    """Look up the solved action for a continuous state.

    ``state`` is ``(Q, omega, omega_next)`` for urgency tables and an integer
    age for age tables. Out-of-range states are clamped to the grid edge.
    Fractional table entries (mixed policies) are resolved with ``rng``.
    """
    prob = policy.action_probability(state)
    if prob <= 0.0:
        return 0
    if prob >= 1.0:
        return 1
    if rng is None:
        raise ValueError("randomised table entry needs an rng")
    return int(rng.random() < prob)


POLICY_KINDS = ("adaptive", "randomized", "periodic", "tabular", "never", "always")


@dataclass(frozen=True)
class PolicySpec:
    """What a simulation run should use to decide updates.

    ``rho`` and ``V`` live on the scenario, not here, so one spec can be reused
    across frequency budgets.
    """

    kind: str = "adaptive"
    period: int = 1
    table: "MdpPolicy | None" = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.kind == "periodic" and self.period < 1:
            raise ValueError("period must be >= 1")
        if self.kind == "tabular" and self.table is None:
            raise ValueError("tabular policy needs a solved table")

    @property
    def name(self) -> str:
        return self.label or self.kind
