"""Independent Lie-series oracle for flows with identity initial condition.

With ``phi = id`` and ``t0 = 0`` the tau-free part of the flow pulls back
as ``exp(t X0)``, so

    Fc*(w_j) = sum_k t^k/k! X0^k(w_j),    G_j = sum_k t^k/k! X0^k(X1(w_j)).

Both series are built by repeated symbolic application of ``X0`` and
truncated at a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Sequence

import numpy as np

from .expr import Const, Expression, Polynomial, add, mul, power, var
from .grassmann import GrassmannElement
from .supergeometry import SuperDomain, SuperVectorField, apply_components, parity_split


def _expand(u: GrassmannElement) -> GrassmannElement:
    return GrassmannElement(u.n, {m: c.expand() if isinstance(c, Expression) else c for m, c in u.terms.items()})


def _to_polynomials(u: GrassmannElement, names) -> GrassmannElement:
    return GrassmannElement(u.n, {m: Polynomial.from_expression(c, names) for m, c in u.terms.items()})


def _is_polynomial_field(X: SuperVectorField) -> bool:
    try:
        for v in X.components.values():
            _to_polynomials(v, X.domain.even)
    except ValueError:
        return False
    return True


@dataclass
class LieSeries:
    field: SuperVectorField
    order: int
    f_terms: dict[str, list[GrassmannElement]]
    g_terms: dict[str, list[GrassmannElement]]

    def evaluate(self, t: float, point: Sequence[float]) -> tuple[dict, dict]:
        """Numeric ``(f, g)`` parts at time ``t`` and base point ``point``."""
        dom = self.field.domain
        names = dom.even
        cx = dom.complex_mode
        weights = [t**k / math.factorial(k) for k in range(self.order + 1)]

        def value(c):
            if isinstance(c, Polynomial):
                return c.evaluate(point)
            return c.compile(names, cx)(point)

        def ev(terms: list[GrassmannElement]) -> GrassmannElement:
            acc: dict[int, complex | float] = {}
            for w, u in zip(weights, terms):
                for m, c in u.terms.items():
                    acc[m] = acc.get(m, 0.0) + w * value(c)
            return GrassmannElement(dom.n_odd, acc)

        f = {name: ev(ts) for name, ts in self.f_terms.items()}
        g = {name: ev(ts) for name, ts in self.g_terms.items()}
        return f, g


def lie_series_oracle(X: SuperVectorField, order: int = 12) -> LieSeries:
    """Order-``order`` Lie series of the flow of ``X`` from the identity at ``t0 = 0``."""
    if order < 0:
        raise ValueError("order must be non-negative")
    X0, X1 = parity_split(X)
    dom = X.domain
    if _is_polynomial_field(X):
        # same series, computed on sparse polynomial coefficients
        def convert(u):
            return _to_polynomials(u, dom.even)
    else:
        def convert(u):
            return u
    comps0 = {k: convert(v) for k, v in X0.components.items()}
    f_terms, g_terms = {}, {}
    for name in dom.coords:
        cur = convert(dom.coordinate(name))
        fs = [cur]
        for _ in range(order):
            cur = _expand(apply_components(dom, comps0, cur))
            fs.append(cur)
        cur = convert(X1.component(name))
        gs = [cur]
        for _ in range(order):
            cur = _expand(apply_components(dom, comps0, cur))
            gs.append(cur)
        f_terms[name], g_terms[name] = fs, gs
    return LieSeries(X, order, f_terms, g_terms)


def random_polynomial(names: Sequence[str], rng: np.random.Generator, degree: int = 2,
                      scale: float = 1.0) -> Expression:
    """Polynomial of total degree ``<= degree`` with coefficients uniform in ``[-scale, scale]``."""
    terms = []
    for d in range(degree + 1):
        for combo in combinations_with_replacement(names, d):
            c = float(rng.uniform(-scale, scale))
            powers = {}
            for nm in combo:
                powers[nm] = powers.get(nm, 0) + 1
            terms.append(mul(Const(c), *(power(var(nm), k) for nm, k in powers.items())))
    return add(*terms)


def random_polynomial_field(domain: SuperDomain, rng: np.random.Generator | int, degree: int = 2,
                            scale: float = 1.0, density: float = 1.0) -> SuperVectorField:
    """Inhomogeneous field whose every coefficient ``a^j_J`` is a random polynomial.

    ``density`` is the probability that a given ``(w_j, J)`` slot is filled.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    comps = {}
    n = domain.n_odd
    for name in domain.coords:
        terms = {}
        for m in range(1 << n):
            if density < 1.0 and rng.uniform() >= density:
                continue
            terms[m] = random_polynomial(domain.even, rng, degree, scale)
        comps[name] = GrassmannElement(n, terms)
    return SuperVectorField(domain, comps)


def oracle_deviation(X: SuperVectorField, point: Sequence[float], times: Sequence[float], order: int = 12,
                     settings=None, series: LieSeries | None = None) -> float:
    """Max coefficient deviation between the integrator and the Lie series over ``times``."""
    from .flow import FlowProblem, ODESettings, integrate_flow

    series = series or lie_series_oracle(X, order)
    lo, hi = min(0.0, *times), max(0.0, *times)
    settings = (settings or ODESettings()).replace(t_min=lo, t_max=hi)
    res = integrate_flow(FlowProblem.identity(X), point, settings)
    worst = 0.0
    for t in times:
        f_o, g_o = series.evaluate(t, point)
        s = res.sample(t)
        for name in X.domain.coords:
            worst = max(worst, (s.f[name] - f_o[name]).max_abs(), (s.g[name] - g_o[name]).max_abs())
    return worst
