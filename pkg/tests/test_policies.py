import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from uoi.mdp import Discretization, MdpPolicy
from uoi.policies import (AdaptivePolicyParams, PolicySpec, VirtualQueue, adaptive_decide, periodic_decide,
                          randomized_decide, tabular_decide, update_index, virtual_queue_step)
from uoi.processes import make_rng


def test_update_index_examples():
    burst = AdaptivePolicyParams(V=1.0, omega_bar=1.0, p=1.0, rho=0.25)
    assert update_index(1.0, burst, 2.0) == 16.0
    assert update_index(37.0, burst, 0.0) == 0.0
    tradeoff = AdaptivePolicyParams(V=1.0, omega_bar=1.99, p=0.8, rho=0.25)
    assert update_index(100.0, tradeoff, 1.0) == pytest.approx((100 - 1.99 + 9.95) * 0.8)
    assert update_index(100.0, tradeoff, 1.0) == pytest.approx(86.368)


def test_theta_value():
    params = AdaptivePolicyParams(V=1.0, omega_bar=1.99, p=0.8, rho=0.25)
    assert params.theta == pytest.approx(1.99 * 0.8 / 0.2)


@pytest.mark.parametrize("J, V, H, U", [(16, 1, 2, 1), (0, 1, 0, 0), (5, 10, 0.5, 0)])
def test_adaptive_decide(J, V, H, U):
    d = adaptive_decide(J, V, H)
    assert d.U == U
    assert d.threshold == V * H
    assert d.update_index == J


@pytest.mark.parametrize("H, rho, U, expected", [(0, 0.25, 1, 0.75), (0.1, 0.25, 0, 0.0), (2, 0.25, 0, 1.75)])
def test_virtual_queue_step(H, rho, U, expected):
    assert virtual_queue_step(H, rho, U) == expected


@given(st.floats(0, 100), st.floats(0.01, 1), st.integers(0, 1))
def test_virtual_queue_bounded_moves(H, rho, U):
    Hn = virtual_queue_step(H, rho, U)
    assert Hn >= 0
    assert abs(Hn - H) <= max(rho, 1 - rho) + 1e-12


def test_virtual_queue_linear_growth_and_drain():
    vq = VirtualQueue(rho=0.25)
    for _ in range(40):
        vq.step(1)
    assert vq.H == pytest.approx(40 * 0.75)
    H0 = vq.H
    n = 0
    while vq.H > 0:
        vq.step(0)
        n += 1
    assert n == math.ceil(H0 / 0.25)


params_st = st.builds(AdaptivePolicyParams, V=st.floats(0.01, 100), omega_bar=st.floats(0, 100),
                      p=st.floats(0.01, 1), rho=st.floats(0.01, 1))


@given(params_st, st.floats(0, 200), st.floats(0, 50), st.floats(0, 50), st.floats(0, 50))
def test_adaptive_monotone_in_error(params, omega_next, H, q1, q2):
    lo, hi = sorted((q1, q2))
    u_lo = adaptive_decide(update_index(omega_next, params, lo), params.V, H).U
    u_hi = adaptive_decide(update_index(omega_next, params, hi), params.V, H).U
    assert u_lo <= u_hi


@given(st.floats(0, 1e4), st.floats(0.01, 100), st.floats(0, 100), st.floats(0, 100))
def test_adaptive_monotone_in_queue(J, V, h1, h2):
    lo, hi = sorted((h1, h2))
    assert adaptive_decide(J, V, hi).U <= adaptive_decide(J, V, lo).U


@given(params_st, st.floats(0, 200), st.floats(-50, 50))
def test_update_index_symmetric_and_quadratic(params, omega_next, Q):
    J = update_index(omega_next, params, Q)
    assert J == update_index(omega_next, params, -Q)
    assert update_index(omega_next, params, 2 * Q) == pytest.approx(4 * J, rel=1e-12, abs=1e-300)


def test_randomized_extremes_and_rate():
    rng = make_rng(0)
    assert sum(randomized_decide(0.0, rng) for _ in range(1000)) == 0
    assert sum(randomized_decide(1.0, rng) for _ in range(1000)) == 1000
    u = make_rng(1).random(10**6)
    assert 0.2487 <= np.mean(u < 0.25) <= 0.2513
    with pytest.raises(ValueError):
        randomized_decide(1.2, rng)


def test_periodic():
    assert periodic_decide(0, 4) == 1
    assert periodic_decide(3, 4) == 0
    for T in (1, 7, 100, 101):
        assert sum(periodic_decide(t, 4) for t in range(T)) == math.ceil(T / 4)
    with pytest.raises(ValueError):
        periodic_decide(0, 0)


def _policy(actions, disc, metric="uoi"):
    return MdpPolicy(actions=np.asarray(actions, float), average_cost=0.0, average_update_rate=0.0,
                     metric=metric, disc=disc)


def test_tabular_all_zero_and_single_state():
    disc = Discretization(q_max=2.0, q_bins=3)
    never = _policy([0, 0, 0], disc)
    assert all(tabular_decide(never, (q, 1.0, 1.0)) == 0 for q in np.linspace(-5, 5, 21))
    always = _policy([1.0, 1.0], Discretization(q_max=1.0, q_bins=3), metric="aoi")
    assert all(tabular_decide(always, age) == 1 for age in range(1, 10))


def test_tabular_three_point_lookup():
    disc = Discretization(q_max=1.0, q_bins=3, weight_support=((1.0, 0.5), (100.0, 0.5)))
    table = np.zeros((3, 2, 2))
    table[0, 1, 0] = 1
    table[2, 0, 1] = 1
    table[1, 1, 1] = 1
    pol = _policy(table.ravel(), disc)
    grid = {-1.0: 0, 0.0: 1, 1.0: 2}
    wvals = {1.0: 0, 100.0: 1}
    for q, qi in grid.items():
        for w, wi in wvals.items():
            for wn, wni in wvals.items():
                assert tabular_decide(pol, (q, w, wn)) == table[qi, wi, wni]
    # clamping beyond the grid
    assert tabular_decide(pol, (-7.0, 100.0, 1.0)) == 1
    assert tabular_decide(pol, (0.4, 100.0, 100.0)) == 1


def test_tabular_empty_table():
    with pytest.raises(ValueError):
        _policy([], Discretization(q_max=1.0, q_bins=3))


def test_tabular_mixed_entry_needs_rng():
    pol = _policy([0.5, 0.5], Discretization(q_max=1.0, q_bins=3), metric="aoi")
    with pytest.raises(ValueError):
        tabular_decide(pol, 1)
    rng = make_rng(0)
    rate = np.mean([tabular_decide(pol, 1, rng) for _ in range(20000)])
    assert abs(rate - 0.5) < 0.02


def test_policy_spec_validation():
    with pytest.raises(ValueError):
        PolicySpec("greedy")
    with pytest.raises(ValueError):
        PolicySpec("tabular")
    with pytest.raises(ValueError):
        AdaptivePolicyParams(V=0.0, omega_bar=1.0, p=1.0, rho=0.5)
