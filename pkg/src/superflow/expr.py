"""Scalar expressions in the even coordinates.

The text grammar (whitespace is ignored)::

    expr     := term (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*
    factor   := base ('^' factor)?
    base     := number | identifier | function '(' expr ')' | '(' expr ')' | '-' base
    function := exp | log | sin | cos | sqrt

Identifiers start with a letter and may contain letters, digits and
underscores.  Unary minus binds tighter than ``^``, so ``-x^2`` means
``(-x)^2``; write ``-(x^2)`` for the other reading.  ``pi`` and ``I`` (the imaginary unit) are reserved constants.

Trees are built through normalising constructors (:func:`add`, :func:`mul`,
...) that flatten sums and products, fold constants exactly where the inputs
are exact, and collect like terms.  No further simplification is attempted;
use :meth:`Expression.expand` for a polynomial normal form and
:func:`is_zero_function` to decide whether an expression vanishes.
"""

from __future__ import annotations

import cmath
import math
import random
import re
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
RESERVED = {"pi": math.pi, "I": 1j}

Number = int | Fraction | float | complex


class ExprError(Exception):
    pass


class ParseError(ExprError, ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownFunctionError(ParseError):
    pass


class EvaluationError(ExprError, ArithmeticError):
    pass


class UnboundVariableError(EvaluationError, NameError):
    pass


class DomainError(EvaluationError, ValueError):
    pass


class DivisionByZeroError(EvaluationError, ZeroDivisionError):
    pass


# --------------------------------------------------------------------------
# nodes


class Expression:
    """Immutable expression tree node; equality and hashing are structural."""

    __slots__ = ("_key", "_hash", "_text", "_derivs", "_vars", "_compiled")
    prec = 5

    def _init(self, key: tuple) -> None:
        self._key = key
        self._hash = hash(key)
        self._text = None
        self._derivs = {}
        self._vars = None
        self._compiled = {}

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Expression):
            return self._hash == other._hash and self._key == other._key
        if isinstance(other, (int, float, complex, Fraction)) and not isinstance(other, bool):
            return isinstance(self, Const) and self.value == other
        return NotImplemented

    def __hash__(self) -> int:
        return self._hash

    def __reduce__(self):
        return (parse, (self.to_text(),))

    # arithmetic builds normalised trees
    def __add__(self, other: Any) -> "Expression":
        return add(self, other)

    def __radd__(self, other: Any) -> "Expression":
        return add(other, self)

    def __sub__(self, other: Any) -> "Expression":
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other: Any) -> "Expression":
        return add(other, neg(self))

    def __mul__(self, other: Any) -> "Expression":
        return mul(self, other)

    def __rmul__(self, other: Any) -> "Expression":
        return mul(other, self)

    def __truediv__(self, other: Any) -> "Expression":
        return div(self, other)

    def __rtruediv__(self, other: Any) -> "Expression":
        return div(other, self)

    def __pow__(self, other: Any) -> "Expression":
        return power(self, other)

    def __neg__(self) -> "Expression":
        return neg(self)

    def __str__(self) -> str:
        return self.to_text()

    def __repr__(self) -> str:
        return f"Expression({self.to_text()!r})"

    # -- queries --------------------------------------------------------
    def children(self) -> tuple["Expression", ...]:
        return ()

    def variables(self) -> frozenset[str]:
        if self._vars is None:
            if isinstance(self, Var):
                self._vars = frozenset((self.name,))
            else:
                out: frozenset[str] = frozenset()
                for c in self.children():
                    out |= c.variables()
                self._vars = out
        return self._vars

    @property
    def is_constant(self) -> bool:
        return isinstance(self, Const)

    def to_text(self) -> str:
        if self._text is None:
            self._text = _render(self)
        return self._text

    def differentiate(self, var: str) -> "Expression":
        d = self._derivs.get(var)
        if d is None:
            d = Const(0) if var not in self.variables() else _derive(self, var)
            self._derivs[var] = d
        return d

    def substitute(self, mapping: Mapping[str, Any]) -> "Expression":
        if not self.variables() & mapping.keys():
            return self
        return _substitute(self, {k: as_expr(v) for k, v in mapping.items()})

    def expand(self) -> "Expression":
        return _from_poly(_poly(self))

    def compile(self, names: Sequence[str], complex_mode: bool = False) -> Callable[[Sequence[Number]], Number]:
        """Return ``f(values)`` evaluating the expression with ``names[i] = values[i]``."""
        key = (tuple(names), complex_mode)
        fn = self._compiled.get(key)
        if fn is None:
            missing = self.variables() - set(names)
            if missing:
                raise UnboundVariableError(f"unbound variable(s): {', '.join(sorted(missing))}")
            inner = _compile(self, {n: i for i, n in enumerate(names)}, complex_mode)

            def fn(values, _inner=inner):
                try:
                    return _inner(values)
                except EvaluationError:
                    raise
                except ZeroDivisionError as exc:
                    raise DivisionByZeroError(str(exc)) from exc
                except OverflowError as exc:
                    raise EvaluationError(f"overflow: {exc}") from exc
                except ValueError as exc:
                    raise DomainError(str(exc)) from exc

            self._compiled[key] = fn
        return fn


class Const(Expression):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        if isinstance(value, bool) or not isinstance(value, (int, float, complex, Fraction)):
            raise TypeError(f"not a scalar constant: {value!r}")
        if isinstance(value, Fraction) and value.denominator == 1:
            value = int(value.numerator)
        if isinstance(value, complex) and value.imag == 0:
            value = value.real
        self.value = value
        self._init(("c", value))


class Var(Expression):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init(("v", name))


class Add(Expression):
    __slots__ = ("terms",)
    prec = 1

    def __init__(self, terms: tuple[Expression, ...]):
        self.terms = terms
        self._init(("+",) + tuple(t._key for t in terms))

    def children(self):
        return self.terms


class Mul(Expression):
    __slots__ = ("factors",)
    prec = 3

    def __init__(self, factors: tuple[Expression, ...]):
        self.factors = factors
        self._init(("*",) + tuple(f._key for f in factors))

    def children(self):
        return self.factors


class Div(Expression):
    __slots__ = ("num", "den")
    prec = 3

    def __init__(self, num: Expression, den: Expression):
        self.num, self.den = num, den
        self._init(("/", num._key, den._key))

    def children(self):
        return (self.num, self.den)


class Pow(Expression):
    __slots__ = ("base", "exponent")
    prec = 4

    def __init__(self, base: Expression, exponent: Expression):
        self.base, self.exponent = base, exponent
        self._init(("^", base._key, exponent._key))

    def children(self):
        return (self.base, self.exponent)


class Func(Expression):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: Expression):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        self.name, self.arg = name, arg
        self._init(("f", name, arg._key))

    def children(self):
        return (self.arg,)


class Neg(Expression):
    __slots__ = ("arg",)
    prec = 2

    def __init__(self, arg: Expression):
        self.arg = arg
        self._init(("-", arg._key))

    def children(self):
        return (self.arg,)


ZERO = Const(0)
ONE = Const(1)


def as_expr(x: Any) -> Expression:
    if isinstance(x, Expression):
        return x
    if isinstance(x, str):
        return parse(x)
    return Const(x)


def var(name: str) -> Var:
    return Var(name)


# --------------------------------------------------------------------------
# exact constant arithmetic


def _exact(v: Number) -> bool:
    return isinstance(v, (int, Fraction))


def _cdiv(a: Number, b: Number) -> Number:
    if _exact(a) and _exact(b):
        return Fraction(a) / Fraction(b)
    return a / b


def _cpow(a: Number, k: int) -> Number:
    if _exact(a):
        return Fraction(a) ** k
    return a**k


# --------------------------------------------------------------------------
# normalising constructors


def _split_coeff(t: Expression) -> tuple[Number, Expression]:
    if isinstance(t, Neg):
        c, core = _split_coeff(t.arg)
        return -c, core
    if isinstance(t, Mul) and isinstance(t.factors[0], Const):
        rest = t.factors[1:]
        return t.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return 1, t


def _scaled(c: Number, core: Expression) -> Expression:
    if c == 1:
        return core
    if c == -1:
        return neg(core)
    return mul(Const(c), core)


def add(*terms: Any) -> Expression:
    flat: list[Expression] = []
    stack = [as_expr(t) for t in reversed(terms)]
    while stack:
        t = stack.pop()
        if isinstance(t, Add):
            stack.extend(reversed(t.terms))
        else:
            flat.append(t)
    const: Number = 0
    order: list[tuple] = []
    coeffs: dict[tuple, list] = {}
    for t in flat:
        if isinstance(t, Const):
            const = const + t.value
            continue
        c, core = _split_coeff(t)
        slot = coeffs.get(core._key)
        if slot is None:
            coeffs[core._key] = [c, core]
            order.append(core._key)
        else:
            slot[0] = slot[0] + c
    out = []
    for k in order:
        c, core = coeffs[k]
        if c != 0:
            out.append(_scaled(c, core))
    if const != 0:
        out.append(Const(const))
    if not out:
        return Const(0) if not isinstance(const, float) else Const(const)
    if len(out) == 1:
        return out[0]
    return Add(tuple(out))


def mul(*factors: Any) -> Expression:
    const: Number = 1
    flat: list[Expression] = []
    stack = [as_expr(f) for f in reversed(factors)]
    while stack:
        f = stack.pop()
        if isinstance(f, Const):
            const = const * f.value
        elif isinstance(f, Neg):
            const = -const
            stack.append(f.arg)
        elif isinstance(f, Mul):
            stack.extend(reversed(f.factors))
        else:
            flat.append(f)
    if const == 0:
        return Const(0)
    order: list[tuple] = []
    powers: dict[tuple, list] = {}
    loose: list[Expression] = []
    for f in flat:
        if isinstance(f, Pow) and isinstance(f.exponent, Const) and isinstance(f.exponent.value, int):
            base, k = f.base, f.exponent.value
        else:
            base, k = f, 1
        slot = powers.get(base._key)
        if slot is None:
            powers[base._key] = [base, k]
            order.append(base._key)
        else:
            slot[1] += k
    for key in order:
        base, k = powers[key]
        if k == 0:
            continue
        p = base if k == 1 else power(base, Const(k))
        if isinstance(p, Const):
            const = const * p.value
        elif isinstance(p, Mul):
            loose.extend(p.factors)
        else:
            loose.append(p)
    if not loose:
        return Const(const)
    body = loose[0] if len(loose) == 1 else Mul(tuple(loose))
    if const == 1:
        return body
    if const == -1:
        return Neg(body)
    return Mul((Const(const),) + tuple(loose))


def neg(e: Any) -> Expression:
    e = as_expr(e)
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        return mul(Const(-e.factors[0].value), *e.factors[1:])
    return Neg(e)


def div(a: Any, b: Any) -> Expression:
    a, b = as_expr(a), as_expr(b)
    if isinstance(b, Const):
        if b.value == 0:
            return Div(a, b)
        if b.value == 1:
            return a
        if isinstance(a, Const):
            return Const(_cdiv(a.value, b.value))
        if _exact(b.value):
            return mul(Const(Fraction(1) / Fraction(b.value)), a)
        return Div(a, b)
    if a == 0:
        return Const(0)
    return Div(a, b)


def power(b: Any, e: Any) -> Expression:
    b, e = as_expr(b), as_expr(e)
    if isinstance(e, Const):
        if e.value == 0:
            return Const(1)
        if e.value == 1:
            return b
        if isinstance(b, Const) and isinstance(e.value, int):
            if b.value == 0 and e.value < 0:
                return Pow(b, e)
            return Const(_cpow(b.value, e.value))
        if isinstance(b, Pow) and isinstance(e.value, int) and isinstance(b.exponent, Const) \
                and isinstance(b.exponent.value, int):
            return power(b.base, Const(b.exponent.value * e.value))
    if b == 1:
        return Const(1)
    return Pow(b, e)


_EXACT_FOLDS = {
    ("exp", 0): 1,
    ("log", 1): 0,
    ("sin", 0): 0,
    ("cos", 0): 1,
    ("sqrt", 0): 0,
    ("sqrt", 1): 1,
}


def func(name: str, arg: Any) -> Expression:
    arg = as_expr(arg)
    if isinstance(arg, Const) and _exact(arg.value):
        folded = _EXACT_FOLDS.get((name, arg.value))
        if folded is not None:
            return Const(folded)
    return Func(name, arg)


def exp(x: Any) -> Expression:
    return func("exp", x)


def log(x: Any) -> Expression:
    return func("log", x)


def sin(x: Any) -> Expression:
    return func("sin", x)


def cos(x: Any) -> Expression:
    return func("cos", x)


def sqrt(x: Any) -> Expression:
    return func("sqrt", x)


# --------------------------------------------------------------------------
# printing


def _const_text(v: Number) -> str:
    if isinstance(v, int):
        return str(v) if v >= 0 else f"({v})"
    if isinstance(v, Fraction):
        return f"({v.numerator}/{v.denominator})"
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"cannot print non-finite constant {v!r}")
        return repr(v) if v >= 0 else f"({v!r})"
    re_, im = v.real, v.imag
    return f"({re_!r} + {_const_text(im)}*I)"


def _wrap(e: Expression, min_prec: int) -> str:
    text = e.to_text()
    if e.prec < min_prec:
        return f"({text})"
    return text


def _render(e: Expression) -> str:
    if isinstance(e, Const):
        return _const_text(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({e.arg.to_text()})"
    if isinstance(e, Neg):
        return "-" + _wrap(e.arg, 5)
    if isinstance(e, Add):
        parts = [e.terms[0].to_text()]
        for t in e.terms[1:]:
            c, core = _split_coeff(t)
            if isinstance(t, Const) and _real_negative(t.value):
                parts.append(f" - {_const_text(-t.value)}")
            elif isinstance(t, (Neg, Mul)) and _real_negative(c):
                parts.append(" - " + _scaled(-c, core).to_text())
            else:
                parts.append(" + " + t.to_text())
        return "".join(parts)
    if isinstance(e, Mul):
        return "*".join(f"({f.to_text()})" if isinstance(f, Div) or f.prec < 3 else f.to_text()
                        for f in e.factors)
    if isinstance(e, Div):
        return f"{_wrap(e.num, 3)}/{_wrap(e.den, 4)}"
    if isinstance(e, Pow):
        b = e.base
        simple_base = isinstance(b, (Var, Func)) or (
            isinstance(b, Const) and isinstance(b.value, int) and b.value >= 0)
        bt = b.to_text() if simple_base else f"({b.to_text()})"
        x = e.exponent
        simple_exp = isinstance(x, Var) or (isinstance(x, Const) and isinstance(x.value, int) and x.value >= 0)
        xt = x.to_text()
        if not (simple_exp or (isinstance(x, Const) and xt.startswith("("))):
            xt = f"({xt})"
        return f"{bt}^{xt}"
    raise TypeError(type(e))


def _real_negative(v: Number) -> bool:
    return not isinstance(v, complex) and v < 0


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind == "end":
            what = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {value!r}, found {what}", pos)

    def expr(self) -> Expression:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            t = self.term()
            e = add(e, t) if op == "+" else add(e, neg(t))
        return e

    def term(self) -> Expression:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            f = self.factor()
            e = mul(e, f) if op == "*" else div(e, f)
        return e

    def factor(self) -> Expression:
        b = self.base()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return power(b, self.factor())
        return b

    def base(self) -> Expression:
        # unary minus binds tighter than '^': -x^2 is (-x)^2
        kind, val, pos = self.take()
        if (kind, val) == ("op", "-"):
            return neg(self.base())
        if kind == "num":
            if any(ch in val for ch in ".eE"):
                return Const(float(val))
            return Const(int(val))
        if kind == "id":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise UnknownFunctionError(f"unknown function {val!r}", pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(val, arg)
            if val in RESERVED:
                return Const(RESERVED[val])
            return Var(val)
        if (kind, val) == ("op", "("):
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"unexpected {what}", pos)


def parse(text: str) -> Expression:
    """Parse ``text`` into a normalised expression tree."""
    p = _Parser(text)
    e = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {val!r}", pos)
    return e


# --------------------------------------------------------------------------
# differentiation and substitution


def _derive(e: Expression, x: str) -> Expression:
    d = lambda u: u.differentiate(x)  # noqa: E731
    if isinstance(e, Const):
        return Const(0)
    if isinstance(e, Var):
        return Const(1 if e.name == x else 0)
    if isinstance(e, Add):
        return add(*(d(t) for t in e.terms))
    if isinstance(e, Neg):
        return neg(d(e.arg))
    if isinstance(e, Mul):
        fs = e.factors
        terms = []
        for i, f in enumerate(fs):
            df = d(f)
            if df == 0:
                continue
            terms.append(mul(*fs[:i], df, *fs[i + 1:]))
        return add(*terms)
    if isinstance(e, Div):
        u, v = e.num, e.den
        return div(add(mul(d(u), v), neg(mul(u, d(v)))), power(v, 2))
    if isinstance(e, Pow):
        u, k = e.base, e.exponent
        if x not in k.variables():
            return mul(k, power(u, add(k, -1)), d(u))
        return mul(e, add(mul(d(k), log(u)), div(mul(k, d(u)), u)))
    if isinstance(e, Func):
        u = e.arg
        du = d(u)
        if e.name == "exp":
            return mul(e, du)
        if e.name == "log":
            return div(du, u)
        if e.name == "sin":
            return mul(cos(u), du)
        if e.name == "cos":
            return neg(mul(sin(u), du))
        if e.name == "sqrt":
            return div(du, mul(2, e))
    raise TypeError(type(e))


def differentiate(e: Expression | str, var_name: str) -> Expression:
    return as_expr(e).differentiate(var_name)


def partial(e: Expression, names: Sequence[str], orders: Sequence[int]) -> Expression:
    """Mixed partial ``d^orders / d names`` of ``e``."""
    out = e
    for name, k in zip(names, orders):
        for _ in range(k):
            out = out.differentiate(name)
    return out


def _substitute(e: Expression, m: Mapping[str, Expression]) -> Expression:
    if not e.variables() & m.keys():
        return e
    s = lambda u: _substitute(u, m)  # noqa: E731
    if isinstance(e, Var):
        return m[e.name]
    if isinstance(e, Add):
        return add(*(s(t) for t in e.terms))
    if isinstance(e, Mul):
        return mul(*(s(f) for f in e.factors))
    if isinstance(e, Neg):
        return neg(s(e.arg))
    if isinstance(e, Div):
        return div(s(e.num), s(e.den))
    if isinstance(e, Pow):
        return power(s(e.base), s(e.exponent))
    if isinstance(e, Func):
        return func(e.name, s(e.arg))
    raise TypeError(type(e))


# --------------------------------------------------------------------------
# evaluation


def _real_log(v):
    if v <= 0:
        raise DomainError(f"log of non-positive value {v!r}")
    return math.log(v)


def _real_sqrt(v):
    if v < 0:
        raise DomainError(f"sqrt of negative value {v!r}")
    return math.sqrt(v)


def _complex_log(v):
    if v == 0:
        raise DomainError("log(0)")
    return cmath.log(v)


_REAL_FUNCS = {"exp": math.exp, "log": _real_log, "sin": math.sin, "cos": math.cos, "sqrt": _real_sqrt}
_COMPLEX_FUNCS = {"exp": cmath.exp, "log": _complex_log, "sin": cmath.sin, "cos": cmath.cos, "sqrt": cmath.sqrt}


def _int_power(b, k):
    if b == 0 and k < 0:
        raise DivisionByZeroError("zero raised to a negative power")
    return b**k


def _real_power(b, e):
    if float(e).is_integer():
        return _int_power(b, int(e))
    if b > 0:
        return b**e
    if b == 0 and e > 0:
        return 0.0
    raise DomainError(f"non-integer power {e!r} of non-positive base {b!r}")


def _complex_power(b, e):
    if isinstance(e, (int, float)) and float(e).is_integer():
        return _int_power(b, int(e))
    if isinstance(e, complex) and e.imag == 0 and e.real.is_integer():
        return _int_power(b, int(e.real))
    if b == 0:
        if complex(e).real > 0:
            return 0j
        raise DomainError("0 raised to a power with non-positive real part")
    return cmath.exp(e * cmath.log(b))


def _divide(a, b):
    if b == 0:
        raise DivisionByZeroError("division by zero")
    return a / b


def _compile(e: Expression, index: Mapping[str, int], cx: bool) -> Callable:
    c = lambda u: _compile(u, index, cx)  # noqa: E731
    if isinstance(e, Const):
        v = e.value
        if cx:
            v = complex(v)
        elif isinstance(v, complex):
            def bad(_vals, _v=v):
                raise DomainError(f"complex constant {_v!r} in real mode")
            return bad
        else:
            v = float(v) if isinstance(v, Fraction) else v
        return lambda vals, _v=v: _v
    if isinstance(e, Var):
        i = index[e.name]
        return lambda vals, _i=i: vals[_i]
    if isinstance(e, Add):
        fs = [c(t) for t in e.terms]
        if len(fs) == 2:
            f0, f1 = fs
            return lambda vals: f0(vals) + f1(vals)

        def _sum(vals, _fs=fs):
            acc = _fs[0](vals)
            for f in _fs[1:]:
                acc = acc + f(vals)
            return acc
        return _sum
    if isinstance(e, Mul):
        fs = [c(f) for f in e.factors]
        if len(fs) == 2:
            f0, f1 = fs
            return lambda vals: f0(vals) * f1(vals)

        def _prod(vals, _fs=fs):
            acc = _fs[0](vals)
            for f in _fs[1:]:
                acc = acc * f(vals)
            return acc
        return _prod
    if isinstance(e, Neg):
        f = c(e.arg)
        return lambda vals: -f(vals)
    if isinstance(e, Div):
        fn, fd = c(e.num), c(e.den)
        return lambda vals: _divide(fn(vals), fd(vals))
    if isinstance(e, Pow):
        fb = c(e.base)
        x = e.exponent
        if isinstance(x, Const) and isinstance(x.value, int):
            k = x.value
            if k >= 0:
                return lambda vals: fb(vals) ** k
            return lambda vals: _int_power(fb(vals), k)
        fe = c(x)
        pw = _complex_power if cx else _real_power
        return lambda vals: pw(fb(vals), fe(vals))
    if isinstance(e, Func):
        f = c(e.arg)
        g = (_COMPLEX_FUNCS if cx else _REAL_FUNCS)[e.name]
        return lambda vals: g(f(vals))
    raise TypeError(type(e))


def evaluate(e: Expression | str, ctx: Mapping[str, Number], complex_mode: bool = False) -> Number:
    """Evaluate ``e`` with the variable values in ``ctx``.

    In complex mode ``log``, ``sqrt`` and non-integer powers use principal
    branches.
    """
    e = as_expr(e)
    missing = e.variables() - ctx.keys()
    if missing:
        raise UnboundVariableError(f"unbound variable(s): {', '.join(sorted(missing))}")
    names = tuple(sorted(e.variables()))
    return e.compile(names, complex_mode)([ctx[n] for n in names])


# --------------------------------------------------------------------------
# polynomial normal form


def _pmul(p: dict, q: dict) -> dict:
    out: dict = {}
    for m1, c1 in p.items():
        for m2, c2 in q.items():
            m = _merge(m1, m2)
            out[m] = out.get(m, 0) + c1 * c2
    return {m: c for m, c in out.items() if c != 0}


def _merge(m1: tuple, m2: tuple) -> tuple:
    if not m1:
        return m2
    if not m2:
        return m1
    d = dict(m1)
    for k, e in m2:
        d[k] = d.get(k, 0) + e
    return tuple(sorted(d.items()))


_ATOMS: dict[str, Expression] = {}


def _atom(e: Expression) -> dict:
    key = e.to_text()
    _ATOMS.setdefault(key, e)
    return {((key, 1),): 1}


def _poly(e: Expression) -> dict:
    if isinstance(e, Const):
        return {(): e.value} if e.value != 0 else {}
    if isinstance(e, Var):
        return _atom(e)
    if isinstance(e, Add):
        out: dict = {}
        for t in e.terms:
            for m, c in _poly(t).items():
                out[m] = out.get(m, 0) + c
        return {m: c for m, c in out.items() if c != 0}
    if isinstance(e, Neg):
        return {m: -c for m, c in _poly(e.arg).items()}
    if isinstance(e, Mul):
        out = {(): 1}
        for f in e.factors:
            out = _pmul(out, _poly(f))
        return out
    if isinstance(e, Pow) and isinstance(e.exponent, Const) and isinstance(e.exponent.value, int) \
            and e.exponent.value > 0:
        base = _poly(e.base)
        out = {(): 1}
        for _ in range(e.exponent.value):
            out = _pmul(out, base)
        return out
    if isinstance(e, Div) and isinstance(e.den, Const) and e.den.value != 0:
        inv = _cdiv(1, e.den.value)
        return {m: c * inv for m, c in _poly(e.num).items()}
    if isinstance(e, Func):
        return _atom(func(e.name, e.arg.expand()))
    if isinstance(e, Div):
        return _atom(div(e.num.expand(), e.den.expand()))
    if isinstance(e, Pow):
        return _atom(power(e.base.expand(), e.exponent.expand()))
    raise TypeError(type(e))


def _from_poly(p: dict) -> Expression:
    def order(m):
        return (sum(k for _, k in m), m)

    terms = []
    for m in sorted(p, key=order):
        factors = [power(_ATOMS[name], k) for name, k in m]
        terms.append(mul(Const(p[m]), *factors))
    return add(*terms)


# --------------------------------------------------------------------------
# zero test


def is_zero_function(
    e: Expression | str,
    names: Iterable[str] | None = None,
    *,
    complex_mode: bool = False,
    box: Mapping[str, tuple[float, float]] | None = None,
    points: int = 50,
    threshold: float = 1e-10,
    seed: int = 0,
) -> bool:
    """Decide whether ``e`` is the zero function.

    A structural check on the expanded form comes first; otherwise ``e`` is
    evaluated at ``points`` pseudo-random points (inside ``box`` where given)
    and declared zero when every value is below ``threshold`` in modulus.
    Points where ``e`` is undefined are skipped.  Like any randomised test
    this can miss a function that vanishes on all sampled points but not
    identically.
    """
    e = as_expr(e)
    if e == 0:
        return True
    e = e.expand()
    if e == 0:
        return True
    if isinstance(e, Const):
        return abs(e.value) <= threshold
    names = tuple(sorted(set(names or ()) | e.variables()))
    fn = e.compile(names, complex_mode)
    rng = random.Random(seed)
    box = box or {}

    def draw(name, positive):
        if name in box:
            lo, hi = box[name]
            lo = max(lo, -1e3)
            hi = min(hi, 1e3)
            return rng.uniform(lo, hi)
        if positive:
            return rng.uniform(0.1, 1.5)
        return rng.uniform(-1.5, 1.5)

    ok = 0
    attempts = 0
    while ok < points and attempts < 4 * points:
        positive = attempts >= 2 * points
        attempts += 1
        vals = []
        for n in names:
            v = draw(n, positive)
            if complex_mode:
                v = complex(v, draw(n, False) * 0.5)
            vals.append(v)
        try:
            val = fn(vals)
        except EvaluationError:
            continue
        ok += 1
        if not abs(val) <= threshold:
            return False
    if ok < min(10, points):
        raise EvaluationError("zero test could not find enough points where the expression is defined")
    return True


# --------------------------------------------------------------------------
# sparse polynomials


class Polynomial:
    """Sparse polynomial in a fixed tuple of variables.

    ``terms`` maps exponent tuples to non-zero scalar coefficients.  Supports
    the ring operations and ``differentiate`` so it can stand in for an
    :class:`Expression` coefficient wherever only those are needed.
    """

    __slots__ = ("names", "terms")

    def __init__(self, names: Sequence[str], terms: Mapping[tuple[int, ...], Number] | None = None):
        self.names = tuple(names)
        self.terms = {k: c for k, c in (terms or {}).items() if c != 0}

    @classmethod
    def constant(cls, names: Sequence[str], c: Number) -> "Polynomial":
        return cls(names, {(0,) * len(names): c})

    @classmethod
    def from_expression(cls, e: Expression | str, names: Sequence[str]) -> "Polynomial":
        """Convert a polynomial expression; raises ``ValueError`` for anything else."""
        e = as_expr(e)
        names = tuple(names)
        pos = {n: i for i, n in enumerate(names)}
        terms = {}
        for mono, c in _poly(e).items():
            exps = [0] * len(names)
            for atom, k in mono:
                if atom not in pos or k < 0:
                    raise ValueError(f"{e.to_text()!r} is not a polynomial in {names}")
                exps[pos[atom]] += k
            terms[tuple(exps)] = c
        return cls(names, terms)

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.names != self.names:
                raise ValueError("polynomials over different variables")
            return other
        return Polynomial.constant(self.names, other)

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0) + c
        return Polynomial(self.names, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.names, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other) - self

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            return Polynomial(self.names, {k: c * other for k, c in self.terms.items()})
        other = self._coerce(other)
        out: dict = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                out[k] = out.get(k, 0) + c1 * c2
        return Polynomial(self.names, out)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self.names == other.names and self.terms == other.terms
        if isinstance(other, (int, float, complex, Fraction)):
            return self.terms == Polynomial.constant(self.names, other).terms
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.names, frozenset(self.terms.items())))

    def differentiate(self, name: str) -> "Polynomial":
        if name not in self.names:
            return Polynomial(self.names)
        i = self.names.index(name)
        out = {}
        for k, c in self.terms.items():
            if k[i]:
                kk = k[:i] + (k[i] - 1,) + k[i + 1:]
                out[kk] = c * k[i]
        return Polynomial(self.names, out)

    def evaluate(self, values: Sequence[Number]) -> Number:
        total = 0
        for k, c in self.terms.items():
            v = c
            for x, e in zip(values, k):
                if e:
                    v = v * x**e
            total = total + v
        return total

    def to_expression(self) -> Expression:
        terms = []
        for k in sorted(self.terms, key=lambda k: (sum(k), k)):
            terms.append(mul(Const(self.terms[k]), *(power(Var(n), e) for n, e in zip(self.names, k) if e)))
        return add(*terms)

    def __repr__(self) -> str:
        return f"Polynomial({self.to_expression().to_text()!r})"
