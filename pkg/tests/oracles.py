"""Independent reference computations used to freeze expected values."""
import itertools

import numpy as np
from scipy.linalg import null_space


def stationary_by_null_space(P):
    ns = null_space(P.T - np.eye(P.shape[0]))
    assert ns.shape[1] == 1, "chain is not unichain"
    mu = ns[:, 0]
    return mu / mu.sum()


def cesaro_limit_row(P, start, squarings=64):
    """Row ``start`` of the Cesaro limit matrix, via powers of the lazy chain.

    The lazy chain ``(I + P) / 2`` is aperiodic with the same limiting matrix,
    so ``lazy**(2**64)`` is the limit to machine precision.
    """
    M = 0.5 * (np.eye(P.shape[0]) + P)
    for _ in range(squarings):
        M = M @ M
        M /= M.sum(axis=1, keepdims=True)
    return M[start]


def exact_policy_cost(transitions, cost, actions, start=None):
    """Long-run average of ``cost`` under deterministic ``actions``.

    With ``start=None`` the chain must be unichain (null-space route);
    otherwise the average is taken from state ``start``.
    """
    idx = np.arange(len(actions))
    P = transitions[actions, idx, :]
    c = cost[actions, idx]
    mu = stationary_by_null_space(P) if start is None else cesaro_limit_row(P, start)
    return float(mu @ c), float(mu @ actions)


def brute_force_optimum(transitions, cost, start):
    """Minimum average cost from ``start`` over all 2**S deterministic stationary policies."""
    S = transitions.shape[1]
    best = np.inf
    for bits in itertools.product((0, 1), repeat=S):
        g, _ = exact_policy_cost(transitions, cost, np.array(bits), start=start)
        best = min(best, g)
    return best


def grid_gaussian_kernel_mc(grid, sigma, q, n, rng):
    """Monte Carlo bin frequencies of q + N(0, sigma^2) rounded onto ``grid`` (clamped)."""
    step = grid[1] - grid[0]
    x = q + rng.normal(0.0, sigma, n)
    idx = np.clip(np.rint((x - grid[0]) / step), 0, len(grid) - 1).astype(int)
    return np.bincount(idx, minlength=len(grid)) / n
