import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from superflow.ode import integrate


def test_exponential():
    out = integrate(lambda t, y: y, 0.0, [1.0], 2.0, rtol=1e-10, atol=1e-13)
    assert out.reason == "reached" and out.t_last == 2.0
    assert abs(out.y_last[0] - math.e**2) <= 1e-8
    for t in np.linspace(0, 2, 17):
        assert abs(out.solution(t)[0] - math.exp(t)) <= 1e-8 * math.exp(t)
        assert abs(out.solution.derivative(t)[0] - math.exp(t)) <= 1e-6 * math.exp(t)


def test_backward_direction():
    out = integrate(lambda t, y: -2 * t * y, 0.0, [1.0], -1.5)
    assert out.reason == "reached"
    for t in np.linspace(-1.5, 0, 7):
        assert abs(out.solution(t)[0] - math.exp(-t * t)) <= 1e-8


def test_complex_states():
    out = integrate(lambda s, y: 1j * y, 0.0, np.array([1 + 0j]), math.pi)
    assert abs(out.y_last[0] + 1) <= 1e-8


def test_step_underflow_at_singularity():
    out = integrate(lambda t, y: y * y, 0.0, [2.0], 1.0)
    assert out.reason == "step_underflow"
    assert abs(out.t_last - 0.5) <= 1e-6


def test_accept_check_locates_boundary():
    out = integrate(lambda t, y: np.ones(1), 0.0, [0.0], 5.0,
                    accept_check=lambda t, y: "out" if y[0] > 1.0 else None)
    assert out.reason == "out"
    assert 1.0 - 1e-10 <= out.t_last <= 1.0


def test_max_steps():
    out = integrate(lambda t, y: np.cos(50 * t) * np.ones(1), 0.0, [0.0], 10.0, max_step=0.01, max_steps=20)
    assert out.reason == "max_steps" and out.n_steps == 20


def test_failing_rhs_shrinks_step():
    def fun(t, y):
        if t > 0.7 and y[0] < 100:
            raise ValueError("undefined")
        return np.ones(1)

    out = integrate(fun, 0.0, [0.0], 1.0)
    assert out.reason == "step_underflow" and out.t_last <= 0.7 + 1e-9


def test_bad_tolerances():
    with pytest.raises(ValueError):
        integrate(lambda t, y: y, 0.0, [1.0], 1.0, rtol=0)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 1.0))
def test_agrees_with_reference_solver(a, b, T):
    def f(t, y):
        return np.array([y[1], -a * y[0] - b * math.sin(y[0])])

    ours = integrate(f, 0.0, [0.3, -0.2], T, rtol=1e-10, atol=1e-12)
    ref = solve_ivp(f, (0, T), [0.3, -0.2], method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True)
    for t in np.linspace(0, T, 5):
        assert np.max(np.abs(ours.solution(t) - ref.sol(t))) <= 1e-8
