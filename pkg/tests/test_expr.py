import cmath
import math
import random

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from superflow.expr import (
    Const,
    DivisionByZeroError,
    DomainError,
    ParseError,
    Polynomial,
    UnboundVariableError,
    UnknownFunctionError,
    add,
    differentiate,
    div,
    evaluate,
    func,
    is_zero_function,
    mul,
    neg,
    parse,
    partial,
    power,
    var,
)

NAMES = ("y1", "y2")


# ---------------------------------------------------------------------------
# parsing and evaluation examples


def test_parse_variables():
    assert parse("y1^2 + sin(y1)*y2").variables() == {"y1", "y2"}


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse("2*(")
    assert info.value.position == 3


def test_unknown_function():
    with pytest.raises(UnknownFunctionError):
        parse("tan(y1)")


@pytest.mark.parametrize("text", ["", "1 +", "(y1", "y1 y2", "3 $ 4", "*2"])
def test_syntax_errors(text):
    with pytest.raises(ParseError):
        parse(text)


def test_exp_of_negative():
    assert evaluate(parse("exp(-y1)"), {"y1": 0}) == 1


def test_unary_minus_binds_tighter_than_power():
    assert evaluate("-y1^2", {"y1": 3}) == 9
    assert evaluate("-(y1^2)", {"y1": 3}) == -9
    assert evaluate("2^-1", {}) == 0.5
    assert evaluate("2^3^2", {}) == 512


def test_evaluate_examples():
    assert evaluate("y1^2", {"y1": 3}) == 9
    with pytest.raises(DivisionByZeroError):
        evaluate("1/y1", {"y1": 0})
    assert cmath.isclose(evaluate("log(y1)", {"y1": -1}, complex_mode=True), 1j * math.pi)


def test_evaluation_errors():
    with pytest.raises(UnboundVariableError):
        evaluate("y1 + y2", {"y1": 1})
    with pytest.raises(DomainError):
        evaluate("log(y1)", {"y1": 0})
    with pytest.raises(DomainError):
        evaluate("log(y1)", {"y1": -1})
    with pytest.raises(DomainError):
        evaluate("sqrt(y1)", {"y1": -1})
    with pytest.raises(DomainError):
        evaluate("y1^0.5", {"y1": -2})
    assert cmath.isclose(evaluate("y1^0.5", {"y1": -4}, complex_mode=True), 2j)


def test_reserved_constants():
    assert evaluate("pi", {}) == math.pi
    assert evaluate("I*I", {}, complex_mode=True) == -1


def test_light_normalisation():
    x = var("x")
    assert add(x, x) == mul(2, x)
    assert add(x, neg(x)) == 0
    assert mul(x, x) == power(x, 2)
    assert add(1, 2) == 3
    assert div(Const(1), Const(3)) * 3 == 1


# ---------------------------------------------------------------------------
# differentiation examples


def test_derivative_examples():
    assert differentiate("y1^2", "y1") == parse("2*y1")
    assert differentiate("sin(y1)*y2", "y2") == parse("sin(y1)")
    d = differentiate("exp(y1^2)", "y1")
    h = 1e-5
    fd = (math.exp((0.7 + h) ** 2) - math.exp((0.7 - h) ** 2)) / (2 * h)
    assert abs(evaluate(d, {"y1": 0.7}) - fd) <= 1e-7


def test_partial_orders():
    e = parse("y1^3*y2^2")
    assert partial(e, NAMES, (2, 1)) == parse("12*y1*y2")
    assert partial(e, NAMES, (0, 0)) == e


def test_zero_test():
    assert is_zero_function(parse("sin(y1)^2 + cos(y1)^2 - 1"), ["y1"])
    assert is_zero_function(parse("(y1 + y2)^2 - y1^2 - 2*y1*y2 - y2^2"))
    assert not is_zero_function(parse("y1 - y2"))
    assert not is_zero_function(parse("1e-6*y1"))
    assert is_zero_function(parse("log(y1) - log(y1)"))


def test_polynomial_ring():
    p = Polynomial.from_expression("y1^2 + 3*y1*y2 - 1", NAMES)
    q = Polynomial.from_expression("y2 - y1", NAMES)
    assert (p * q).to_expression().expand() == parse("(y1^2 + 3*y1*y2 - 1)*(y2 - y1)").expand()
    assert p.differentiate("y1") == Polynomial.from_expression("2*y1 + 3*y2", NAMES)
    assert p.evaluate([2.0, 1.0]) == 9.0
    with pytest.raises(ValueError):
        Polynomial.from_expression("sin(y1)", NAMES)


# ---------------------------------------------------------------------------
# properties

leaves = st.one_of(
    st.sampled_from([var("y1"), var("y2")]),
    st.integers(-3, 3).map(Const),
    st.floats(-2, 2, allow_nan=False).map(lambda v: Const(round(v, 3))),
)


def _extend(children):
    return st.one_of(
        st.tuples(children, children).map(lambda ab: add(*ab)),
        st.tuples(children, children).map(lambda ab: mul(*ab)),
        st.tuples(children, children).map(lambda ab: div(ab[0], add(2.5, mul(ab[1], ab[1])))),
        st.tuples(children, st.integers(0, 3)).map(lambda bk: power(bk[0], bk[1])),
        children.map(neg),
        children.map(lambda c: func("sin", c)),
        children.map(lambda c: func("cos", c)),
        children.map(lambda c: func("exp", mul(0.3, c))),
        children.map(lambda c: func("log", add(3, mul(c, c)))),
        children.map(lambda c: func("sqrt", add(1, mul(c, c)))),
    )


expressions = st.recursive(leaves, _extend, max_leaves=8)


def _points(seed, n=100):
    rng = random.Random(seed)
    return [(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)) for _ in range(n)]


def _value(e, pt):
    try:
        v = e.compile(NAMES)(pt)
    except (ArithmeticError, ValueError):
        return None
    return v if math.isfinite(v) and abs(v) < 1e8 else None


@given(expressions)
def test_print_parse_round_trip(e):
    back = parse(e.to_text())
    for pt in _points(1):
        a, b = _value(e, pt), _value(back, pt)
        assert (a is None) == (b is None)
        if a is not None:
            assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


@given(expressions, st.sampled_from(NAMES))
def test_derivative_matches_finite_differences(e, name):
    d = differentiate(e, name)
    h = 1e-5
    i = NAMES.index(name)
    checked = 0
    for pt in _points(2, 20):
        lo, hi = list(pt), list(pt)
        lo[i] -= h
        hi[i] += h
        vals = [_value(e, lo), _value(e, hi), _value(d, pt)]
        if any(v is None for v in vals):
            continue
        fd = (vals[1] - vals[0]) / (2 * h)
        assert abs(fd - vals[2]) <= 1e-6 * max(1.0, abs(vals[2]))
        checked += 1
    assume(checked > 0)


@given(expressions)
def test_mixed_partials_commute(e):
    a = differentiate(differentiate(e, "y1"), "y2")
    b = differentiate(differentiate(e, "y2"), "y1")
    for pt in _points(3, 30):
        va, vb = _value(a, pt), _value(b, pt)
        if va is None or vb is None:
            continue
        assert abs(va - vb) <= 1e-8 * max(1.0, abs(va))


@given(expressions)
def test_expand_preserves_values(e):
    x = e.expand()
    for pt in _points(4, 20):
        a, b = _value(e, pt), _value(x, pt)
        if a is None or b is None:
            continue
        assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


@given(expressions)
def test_difference_with_itself_is_zero(e):
    assert is_zero_function(add(e, neg(e)), NAMES)
