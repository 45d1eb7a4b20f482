import numpy as np
import pytest

from superflow.expr import Polynomial
from superflow.flow import ODESettings
from superflow.oracle import lie_series_oracle, oracle_deviation, random_polynomial_field
from superflow.supergeometry import SuperDomain, SuperVectorField

R11 = SuperDomain(("x",), ("xi",))


def test_susy_series_is_exact():
    X = SuperVectorField.from_terms(R11, {"x": [((), "1"), (("xi",), "1")], "xi": [((), "1")]})
    times = [-0.3, 0.1, 0.3]
    assert oracle_deviation(X, (0.4,), times, order=12) <= 1e-12


def test_linear_field_within_exponential_bound():
    X = SuperVectorField.from_terms(R11, {"x": [((), "x")]})
    times = list(np.linspace(-0.5, 0.5, 5))
    assert oracle_deviation(X, (0.8,), times, order=12) <= 1e-9


def test_series_terms_are_iterated_applications():
    X = SuperVectorField.from_terms(R11, {"x": [((), "x^2")]})
    s = lie_series_oracle(X, order=3)
    # X0^k(x) = k! x^{k+1}
    for k, u in enumerate(s.f_terms["x"]):
        expect = Polynomial.from_expression(f"{[1, 1, 2, 6][k]}*x^{k + 1}", ["x"])
        assert u.coefficient(0) == expect


def test_non_polynomial_fields_fall_back_to_expressions():
    X = SuperVectorField.from_terms(R11, {"x": [((), "sin(x)")], "xi": [(("xi",), "cos(x)")]})
    assert oracle_deviation(X, (0.3,), [-0.2, 0.2], order=10) <= 1e-7


def test_random_field_is_seeded():
    D = SuperDomain(("x", "y"), ("a", "b"))
    A = random_polynomial_field(D, 4)
    B = random_polynomial_field(D, 4)
    for n in D.coords:
        assert A.component(n) == B.component(n)
    assert random_polynomial_field(D, 5).component("x") != A.component("x")


def test_negative_order_rejected():
    with pytest.raises(ValueError):
        lie_series_oracle(SuperVectorField(R11, {}), order=-1)
