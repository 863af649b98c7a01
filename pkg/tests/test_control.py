import numpy as np
import pytest

from uoi.control import (ControllerState, PlantConfig, TrackingResult, estimator_step, optimal_control,
                         run_tracking)
from uoi.metrics import step_error
from uoi.policies import PolicySpec
from uoi.processes import PLANT_STREAM, Channel, ConfigurationError, Constant, TwoPointIid, make_rng
from uoi.sim import SimulationError


def test_optimal_control_examples():
    assert optimal_control(1.0, 3.0, 1.0, 2.0) == 1.0
    assert optimal_control(2.5, 5.0, 2.0, 0.7) == 0.0
    with pytest.raises(ValueError):
        optimal_control(1.0, 1.0, 1.0, 0.0)
    with pytest.raises(ConfigurationError):
        PlantConfig(b=0.0)


@pytest.mark.parametrize("a, b, omega_bar", [(1.0, 2.0, 1.99), (0.9, -1.5, 3.0)])
def test_control_perturbation_cost(a, b, omega_bar):
    # noise-free, exact estimate: next state a*xhat + b*v must hit y
    xhat, y = 0.8, -1.3
    v = optimal_control(xhat, y, a, b)
    eps = np.linspace(-2, 2, 401)
    cost = omega_bar * (a * xhat + b * (v + eps) - y) ** 2
    assert eps[cost.argmin()] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(cost - cost[200], omega_bar * b * b * eps ** 2, atol=1e-9)


def test_estimator_step():
    assert estimator_step(2.0, 1.0, 1.0, 2.0, received=5.0) == 5.0
    assert estimator_step(2.0, 1.0, 1.0, 2.0) == 4.0
    assert ControllerState().xhat == 0.0


def test_full_information_gives_zero_tracking_error():
    T = 500
    y = np.sin(np.arange(T) / 10.0)
    res = run_tracking(PlantConfig(1.3, 0.5, 0.0, y), Constant(1.0), PolicySpec("always"), Channel(1.0), T,
                       seed=1, rho=1.0, keep_path=True)
    assert res.avg_weighted_tracking_error == pytest.approx(0.0, abs=1e-20)
    np.testing.assert_allclose(res.x, res.xhat)
    np.testing.assert_allclose(res.x, y)


def test_result_unpacks_as_pair():
    res = run_tracking(PlantConfig(), Constant(1.0), PolicySpec("always"), Channel(1.0), 10, rho=1.0)
    trk, est = res
    assert isinstance(res, TrackingResult) and trk == res.avg_weighted_tracking_error and est == 0.0


def test_no_updates_estimation_error_grows_linearly():
    # e_{t-1} is a sum of t noise terms: E[e_{t-1}^2] = t * Var(r), averaging to (T-1)/2
    T, seeds = 200, 400
    vals = [run_tracking(PlantConfig(1.0, 1.0, 1.0), Constant(1.0), PolicySpec("never"), Channel(1.0), T,
                         seed=s).avg_weighted_estimation_error for s in range(seeds)]
    mean, se = np.mean(vals), np.std(vals, ddof=1) / np.sqrt(seeds)
    assert abs(mean - (T - 1) / 2) < 3 * se


def test_estimation_error_follows_error_recursion():
    T, seed = 3000, 6
    res = run_tracking(PlantConfig(1.0, 0.4, 1.0), TwoPointIid(), PolicySpec("adaptive"), Channel(0.7), T,
                       seed=seed, rho=0.3, keep_path=True)
    r = make_rng(seed, PLANT_STREAM).normal(0.0, 1.0, T)
    e = res.x - res.xhat
    pre = np.concatenate([[0.0], e[:-1]]) + r  # error before any delivery in slot t
    for t in range(T - 1):
        delivered = int(res.xhat[t] == res.x[t])
        assert e[t] == pytest.approx(0.0 if delivered else pre[t], abs=1e-9)
        assert step_error(pre[t], r[t + 1], delivered, 1) == pytest.approx(pre[t + 1], abs=1e-9)


def test_decomposition_moderate_horizon():
    res = run_tracking(PlantConfig(0.9, 2.0, 0.25), TwoPointIid(), PolicySpec("adaptive"), Channel(0.8),
                       200_000, seed=3, rho=0.25)
    pred = 0.81 * res.avg_weighted_estimation_error + res.omega_bar * 0.25
    assert res.residual == pytest.approx(res.avg_weighted_tracking_error - pred, abs=1e-9)
    assert abs(res.residual) <= 3 * res.residual_stderr


def test_divergence_aborts():
    with pytest.raises(SimulationError):
        run_tracking(PlantConfig(2.0, 1.0, 1.0), Constant(1.0), PolicySpec("never"), Channel(1.0), 5000)


def test_reference_too_short():
    with pytest.raises(ConfigurationError):
        run_tracking(PlantConfig(reference=[0.0] * 5), Constant(1.0), PolicySpec("never"), Channel(1.0), 10)
