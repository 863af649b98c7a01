"""Per-slot recursions for estimation error, urgency of information and age."""
from __future__ import annotations

from typing import Sequence


def step_error(Q: float, A: float, U: int, S: int) -> float:
    """Error after one slot: cleared when an update is sent and gets through."""
    return (1 - U * S) * Q + A


def step_error_delayed(Q: float, A_t: float, D: int, increment_history: Sequence[float],
                       g_next: int, t: int) -> float:
    """Error recursion when the delivered packet was generated at ``g_next <= t``.

    On delivery the monitor still misses the increments accrued since the
    packet's generation, ``A[g_next] .. A[t-1]``. ``increment_history`` is
    indexed by absolute slot (a mapping or a sequence starting at slot 0).
    """
    if g_next > t:
        raise ValueError(f"generation slot {g_next} lies after current slot {t}")
    if not D:
        return Q + A_t
    missed = 0.0
    for tau in range(g_next, t):
        try:
            missed += increment_history[tau]
        except (IndexError, KeyError):
            raise ValueError(f"increment history has no entry for slot {tau}") from None
    return A_t + missed


def uoi(omega: float, Q: float) -> float:
    """Urgency of information with squared-error cost."""
    if omega < 0:
        raise ValueError(f"context weight must be >= 0, got {omega}")
    return omega * Q * Q


def step_age(age: int, U: int, S: int) -> int:
    # delivery completes inside the slot, so the next boundary sees age 1
    if age < 1:
        raise ValueError("age must be >= 1")
    return 1 if U * S == 1 else age + 1
