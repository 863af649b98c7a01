import numpy as np
import pytest
from hypothesis import given, strategies as st

from uoi.metrics import step_age, step_error, step_error_delayed, uoi

reals = st.floats(-1e6, 1e6, allow_nan=False)
bits = st.integers(0, 1)


@pytest.mark.parametrize("args, expected", [
    ((3.0, 0.5, 1, 1), 0.5),
    ((3.0, 0.5, 1, 0), 3.5),
    ((0.0, 0.0, 0, 0), 0.0),
])
def test_step_error(args, expected):
    assert step_error(*args) == expected


def test_step_error_delayed_examples():
    assert step_error_delayed(7.0, 0.25, 1, [], g_next=4, t=4) == 0.25
    assert step_error_delayed(7.0, 0.5, 1, {3: 2.0}, g_next=3, t=4) == 2.5
    assert step_error_delayed(4.0, 1.0, 0, [9.0, 9.0], g_next=0, t=2) == 5.0


def test_step_error_delayed_missing_history():
    with pytest.raises(ValueError):
        step_error_delayed(1.0, 1.0, 1, [0.1], g_next=0, t=3)
    with pytest.raises(ValueError):
        step_error_delayed(1.0, 1.0, 1, [], g_next=5, t=3)


@given(reals, reals, bits, bits)
def test_delayed_fresh_packet_matches_instantaneous(Q, A, U, S):
    D = U * S
    assert step_error_delayed(Q, A, D, [], g_next=10, t=10) == step_error(Q, A, U, S)


@given(reals, reals, reals, reals, bits, bits, st.floats(-10, 10))
def test_step_error_linear(Q1, A1, Q2, A2, U, S, c):
    lhs = step_error(Q1 + c * Q2, A1 + c * A2, U, S)
    rhs = step_error(Q1, A1, U, S) + c * step_error(Q2, A2, U, S)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-3)


@pytest.mark.parametrize("omega, Q, expected", [(100, 2, 400), (0, 7, 0), (1, -3, 9)])
def test_uoi(omega, Q, expected):
    assert uoi(omega, Q) == expected


def test_uoi_negative_weight():
    with pytest.raises(ValueError):
        uoi(-1.0, 1.0)


@pytest.mark.parametrize("args, expected", [((5, 1, 1), 1), ((5, 1, 0), 6), ((1, 0, 0), 2)])
def test_step_age(args, expected):
    assert step_age(*args) == expected


@given(st.integers(1, 50), st.lists(st.tuples(bits, bits), min_size=1, max_size=200), st.floats(0, 100))
def test_unit_increments_reproduce_age(age0, decisions, omega):
    # forced A = 1 with Q0 = age0: error and age trajectories coincide
    Q, age = float(age0), age0
    for U, S in decisions:
        Q, age = step_error(Q, 1.0, U, S), step_age(age, U, S)
        assert Q == age
        assert uoi(omega, Q) == pytest.approx(omega * age ** 2, rel=1e-15)


@given(st.lists(st.tuples(reals, bits, bits), min_size=1, max_size=100))
def test_unit_weight_uoi_is_squared_error(steps):
    Q = 0.0
    for A, U, S in steps:
        Q = step_error(Q, A, U, S)
        assert uoi(1.0, Q) == Q ** 2
