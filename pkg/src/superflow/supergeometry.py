"""Superdomains, super vector fields, brackets and pullbacks along morphisms.

A superfunction on a domain with odd coordinates ``xi_1..xi_n`` is a
:class:`GrassmannElement` on ``n`` generators whose coefficients are
expressions in the even coordinates.  Odd partial derivatives are left
derivatives, ``d/dxi_s (xi^I) = (-1)^{#{r in I: r < s}} xi^{I minus s}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product as iproduct
from typing import Any, Iterable, Mapping, Sequence

from .expr import Expression, as_expr, is_zero_function, partial, Const, EvaluationError
from .grassmann import GrassmannElement, DimensionError, positions


class DomainMismatchError(ValueError):
    pass


class ParityError(ValueError):
    pass


@dataclass(frozen=True)
class SuperDomain:
    """A chart ``U`` in ``R^{p|q}`` or ``C^{p|q}``.

    ``box`` optionally restricts the even coordinates: one ``(lo, hi)`` pair
    (either end may be ``None``) per even coordinate.
    """

    even: tuple[str, ...]
    odd: tuple[str, ...] = ()
    mode: str = "real"
    box: tuple[tuple[float | None, float | None], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "even", tuple(self.even))
        object.__setattr__(self, "odd", tuple(self.odd))
        names = self.even + self.odd
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate names must be distinct: {names}")
        if self.mode not in ("real", "complex"):
            raise ValueError(f"mode must be 'real' or 'complex', got {self.mode!r}")
        if len(self.odd) > 16:
            raise DimensionError("at most 16 odd coordinates are supported")
        if self.box is not None:
            box = tuple((lo, hi) for lo, hi in self.box)
            if len(box) != len(self.even):
                raise ValueError("box needs one (lo, hi) pair per even coordinate")
            object.__setattr__(self, "box", box)

    @property
    def coords(self) -> tuple[str, ...]:
        return self.even + self.odd

    @property
    def n_odd(self) -> int:
        return len(self.odd)

    @property
    def complex_mode(self) -> bool:
        return self.mode == "complex"

    def parity(self, name: str) -> int:
        if name in self.even:
            return 0
        if name in self.odd:
            return 1
        raise KeyError(name)

    def odd_position(self, name: str) -> int:
        return self.odd.index(name) + 1

    def box_dict(self) -> dict[str, tuple[float, float]]:
        if self.box is None:
            return {}
        out = {}
        for name, (lo, hi) in zip(self.even, self.box):
            out[name] = (-math.inf if lo is None else lo, math.inf if hi is None else hi)
        return out

    def box_excess(self, values: Sequence[Any]) -> float:
        """How far a body point lies outside the box (0 when inside)."""
        if self.box is None:
            return 0.0
        worst = 0.0
        for v, (lo, hi) in zip(values, self.box):
            v = v.real if isinstance(v, complex) else v
            if lo is not None and v < lo:
                worst = max(worst, lo - v)
            if hi is not None and v > hi:
                worst = max(worst, v - hi)
        return worst

    def coordinate(self, name: str) -> GrassmannElement:
        """The coordinate function ``name`` as a superfunction value."""
        if name in self.even:
            return GrassmannElement.scalar(self.n_odd, as_expr(name))
        return GrassmannElement.generator(self.n_odd, self.odd_position(name)).map_coefficients(as_expr)

    def zero_function(self) -> GrassmannElement:
        return GrassmannElement.zero(self.n_odd)


def superfunction(domain: SuperDomain, terms: Iterable[tuple[Sequence[str], Any]]) -> GrassmannElement:
    """Build ``sum coeff * xi_{names[0]} xi_{names[1]} ...`` (names in the given order)."""
    out = GrassmannElement.zero(domain.n_odd)
    for names, coeff in terms:
        for nm in names:
            if nm not in domain.odd:
                raise KeyError(f"unknown odd coordinate {nm!r}")
        order = [domain.odd_position(nm) for nm in names]
        if len(set(order)) != len(order):
            continue
        out = out + GrassmannElement.monomial(domain.n_odd, order, 1).map_coefficients(lambda c: as_expr(coeff) * c)
    return out


@dataclass(frozen=True)
class SuperFunction:
    domain: SuperDomain
    value: GrassmannElement

    def __post_init__(self):
        if self.value.n != self.domain.n_odd:
            raise DimensionError("superfunction generator count differs from the odd dimension")


def _as_value(f: SuperFunction | GrassmannElement) -> GrassmannElement:
    return f.value if isinstance(f, SuperFunction) else f


# ---------------------------------------------------------------------------
# vector fields


def _expr_element(u: GrassmannElement) -> GrassmannElement:
    return GrassmannElement(u.n, {m: as_expr(c) for m, c in u.terms.items()})


@dataclass(frozen=True)
class SuperVectorField:
    """``X = sum_j X^j d/dw_j`` with each ``X^j`` a superfunction value."""

    domain: SuperDomain
    components: Mapping[str, GrassmannElement] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for name, comp in self.components.items():
            if name not in self.domain.coords:
                raise KeyError(f"unknown coordinate {name!r}")
            if comp.n != self.domain.n_odd:
                raise DimensionError(f"component {name!r} has {comp.n} generators, expected {self.domain.n_odd}")
            comp = _expr_element(comp)
            for c in comp.terms.values():
                extra = c.variables() - set(self.domain.even)
                if extra:
                    raise ValueError(f"component {name!r} uses undeclared variables {sorted(extra)}")
            if not comp.is_zero():
                clean[name] = comp
        object.__setattr__(self, "components", clean)

    @classmethod
    def from_terms(cls, domain: SuperDomain, spec: Mapping[str, Iterable[tuple[Sequence[str], Any]]]):
        return cls(domain, {name: superfunction(domain, terms) for name, terms in spec.items()})

    def component(self, name: str) -> GrassmannElement:
        return self.components.get(name, GrassmannElement.zero(self.domain.n_odd))

    def is_zero(self) -> bool:
        return not self.components

    @property
    def parity(self) -> int | None:
        ps = set()
        for name, comp in self.components.items():
            wp = self.domain.parity(name)
            for m in comp.terms:
                ps.add((m.bit_count() + wp) & 1)
        if not ps:
            return 0
        return ps.pop() if len(ps) == 1 else None

    def map(self, fn) -> "SuperVectorField":
        return SuperVectorField(self.domain, {k: v.map_coefficients(fn) for k, v in self.components.items()})

    def expand(self) -> "SuperVectorField":
        return self.map(lambda c: c.expand())

    def __add__(self, other: "SuperVectorField") -> "SuperVectorField":
        _same_domain(self, other)
        names = list(self.components) + [k for k in other.components if k not in self.components]
        return SuperVectorField(self.domain, {k: self.component(k) + other.component(k) for k in names})

    def __neg__(self) -> "SuperVectorField":
        return self.scale(-1)

    def __sub__(self, other: "SuperVectorField") -> "SuperVectorField":
        return self + (-other)

    def scale(self, c: Any) -> "SuperVectorField":
        c = as_expr(c)
        return SuperVectorField(self.domain, {k: v.map_coefficients(lambda e: c * e) for k, v in self.components.items()})

    def __rmul__(self, c: Any) -> "SuperVectorField":
        return self.scale(c)

    def __call__(self, f: SuperFunction | GrassmannElement) -> GrassmannElement:
        return apply_field(self, f)

    def format(self) -> str:
        parts = []
        for name in self.domain.coords:
            comp = self.components.get(name)
            if comp is not None:
                parts.append(f"({comp.format(self.domain.odd)})*d/d{name}")
        return " + ".join(parts) if parts else "0"

    def __repr__(self) -> str:
        return f"SuperVectorField({self.format()})"


def _same_domain(a, b) -> None:
    if a.domain != b.domain:
        raise DomainMismatchError("objects live on different superdomains")


def _even_derivative(c: Any, name: str) -> Any:
    if hasattr(c, "differentiate"):
        return c.differentiate(name)
    return 0


def coordinate_derivative(domain: SuperDomain, name: str, f: GrassmannElement) -> GrassmannElement:
    """``d f / d name`` for an even or odd coordinate ``name``."""
    if name in domain.even:
        return GrassmannElement(f.n, {m: _even_derivative(c, name) for m, c in f.terms.items()})
    return f.odd_derivative(domain.odd_position(name))


def apply_components(domain: SuperDomain, components: Mapping[str, GrassmannElement],
                     f: GrassmannElement) -> GrassmannElement:
    """``sum_j components[w_j] * d f / d w_j``.

    Coefficients may be any commutative ring elements with a
    ``differentiate(name)`` method (expressions, :class:`Polynomial`).
    """
    out = GrassmannElement.zero(f.n)
    for name, comp in components.items():
        d = coordinate_derivative(domain, name, f)
        if not d.is_zero():
            out = out + comp * d
    return out


def apply_field(X: SuperVectorField, f: SuperFunction | GrassmannElement) -> GrassmannElement:
    """``X(f) = sum_j X^j * d f / d w_j`` with the component on the left."""
    if isinstance(f, SuperFunction):
        _same_domain(X, f)
    f = _as_value(f)
    if f.n != X.domain.n_odd:
        raise DomainMismatchError("superfunction does not live on the field's domain")
    return apply_components(X.domain, X.components, f)


def parity_split(X: SuperVectorField) -> tuple[SuperVectorField, SuperVectorField]:
    """Split ``X = X0 + X1`` by comparing ``|J|`` with ``|w_j|`` (mod 2)."""
    even, odd = {}, {}
    for name, comp in X.components.items():
        wp = X.domain.parity(name)
        even[name] = comp.parity_part(wp)
        odd[name] = comp.parity_part(1 - wp)
    return SuperVectorField(X.domain, even), SuperVectorField(X.domain, odd)


def _homogeneous_bracket(X: SuperVectorField, p: int, Y: SuperVectorField, q: int) -> SuperVectorField:
    sign = -1 if (p * q) & 1 else 1
    comps = {}
    for name in X.domain.coords:
        xy = apply_field(X, Y.component(name))
        yx = apply_field(Y, X.component(name))
        comps[name] = xy - yx if sign == 1 else xy + yx
    return SuperVectorField(X.domain, comps)


def super_bracket(X: SuperVectorField, Y: SuperVectorField, expand: bool = True) -> SuperVectorField:
    """Graded commutator, extended bilinearly over the parity parts."""
    _same_domain(X, Y)
    xs = parity_split(X)
    ys = parity_split(Y)
    total = SuperVectorField(X.domain)
    for p in (0, 1):
        if xs[p].is_zero():
            continue
        for q in (0, 1):
            if ys[q].is_zero():
                continue
            total = total + _homogeneous_bracket(xs[p], p, ys[q], q)
    return total.expand() if expand else total


def field_is_zero(X: SuperVectorField, **kw) -> bool:
    """Zero test of every component coefficient (structural, then randomised)."""
    box = X.domain.box_dict()
    for comp in X.components.values():
        for c in comp.terms.values():
            if not is_zero_function(c, X.domain.even, complex_mode=X.domain.complex_mode, box=box, **kw):
                return False
    return True


def fields_equal(X: SuperVectorField, Y: SuperVectorField, **kw) -> bool:
    _same_domain(X, Y)
    return field_is_zero(X - Y, **kw)


def elements_equal(u: GrassmannElement, v: GrassmannElement, names: Sequence[str] = (), **kw) -> bool:
    """Zero test of ``u - v`` coefficient by coefficient."""
    d = u - v
    return all(is_zero_function(c, names, **kw) for c in d.terms.values())


# ---------------------------------------------------------------------------
# morphisms and pullbacks


def _is_number(c: Any) -> bool:
    return not isinstance(c, Expression)


@dataclass(frozen=True)
class MorphismData:
    """A morphism ``source -> target`` given by the pullbacks of the target coordinates.

    Image coefficients are expressions in the source even coordinates
    (symbolic morphism) or plain numbers (a morphism evaluated at a base
    point; its source then has no even coordinates).
    """

    source: SuperDomain
    target: SuperDomain
    images: Mapping[str, GrassmannElement]

    def __post_init__(self):
        images = {}
        for name in self.target.coords:
            if name not in self.images:
                raise KeyError(f"missing pullback of target coordinate {name!r}")
            img = self.images[name]
            if img.n != self.source.n_odd:
                raise DimensionError(f"pullback of {name!r} has {img.n} generators, expected {self.source.n_odd}")
            p = self.target.parity(name)
            if img.parity_part(1 - p).terms:
                raise ParityError(f"pullback of {name!r} must have parity {p}")
            images[name] = img
        extra = set(self.images) - set(self.target.coords)
        if extra:
            raise KeyError(f"unknown target coordinates {sorted(extra)}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, domain: SuperDomain) -> "MorphismData":
        return cls(domain, domain, {name: domain.coordinate(name) for name in domain.coords})

    @property
    def numeric(self) -> bool:
        return all(_is_number(c) for img in self.images.values() for c in img.terms.values())

    def image(self, name: str) -> GrassmannElement:
        return self.images[name]

    def body_point(self) -> list:
        return [self.images[y].body for y in self.target.even]

    def at(self, point: Mapping[str, Any] | Sequence[Any]) -> "MorphismData":
        """Evaluate every coefficient at a source base point."""
        if isinstance(point, Mapping):
            values = [point[n] for n in self.source.even]
        else:
            values = list(point)
        if len(values) != len(self.source.even):
            raise ValueError("base point dimension does not match the source")
        cx = self.source.complex_mode or self.target.complex_mode
        names = self.source.even
        images = {}
        for name, img in self.images.items():
            terms = {}
            for m, c in img.terms.items():
                if isinstance(c, Expression):
                    c = c.compile(names, cx)(values)
                terms[m] = complex(c) if cx else c
            images[name] = GrassmannElement(img.n, terms)
        src = SuperDomain((), self.source.odd, self.source.mode)
        return MorphismData(src, self.target, images)

    def pullback(self) -> "Pullback":
        return Pullback(self)


class Pullback:
    """Cached pullback engine along one morphism ``psi``.

    ``scalar(a)`` develops ``psi*(a)`` as the finite Taylor sum
    ``sum_gamma (1/gamma!) (d_gamma a)(bodies) * prod_mu N_mu^gamma_mu``
    where ``N_mu`` is the nilpotent part of ``psi*(y_mu)``.
    """

    def __init__(self, psi: MorphismData, complex_mode: bool | None = None):
        self.psi = psi
        self.n = psi.source.n_odd
        self.numeric = psi.numeric
        self.complex_mode = (psi.target.complex_mode or psi.source.complex_mode) if complex_mode is None \
            else complex_mode
        tgt = psi.target
        self.names = tgt.even
        imgs = [psi.images[y] for y in tgt.even]
        self.bodies = [img.body for img in imgs]
        if self.numeric:
            self.bodies = [complex(b) if self.complex_mode else b for b in self.bodies]
            one = 1.0 + 0j if self.complex_mode else 1.0
        else:
            self.bodies = [as_expr(b) for b in self.bodies]
            one = Const(1)
        self.one = one
        nil = [img.nilpotent_part() for img in imgs]
        live = [i for i, u in enumerate(nil) if not u.is_zero()]
        q = self.n // 2
        # (orders, 1/gamma!, product of nilpotent powers)
        self.jets: list[tuple[tuple[int, ...], Any, GrassmannElement]] = []
        base = GrassmannElement.scalar(self.n, one)
        self.jets.append(((0,) * len(imgs), 1, base))
        if live and q:
            powers = {}
            for i in live:
                pw = [base]
                for _ in range(q):
                    nxt = pw[-1] * nil[i]
                    if nxt.is_zero():
                        break
                    pw.append(nxt)
                powers[i] = pw
            ranges = [range(len(powers[i])) for i in live]
            for ks in iproduct(*ranges):
                if sum(ks) == 0 or sum(ks) > q:
                    continue
                prod = base
                fact = 1
                for i, k in zip(live, ks):
                    prod = prod * powers[i][k]
                    fact *= math.factorial(k)
                if prod.is_zero():
                    continue
                orders = [0] * len(imgs)
                for i, k in zip(live, ks):
                    orders[i] = k
                w = 1.0 / fact if self.numeric else Fraction(1, fact)
                self.jets.append((tuple(orders), w, prod))
        self.odd_images = [psi.images[s] for s in tgt.odd]
        self._odd_cache: dict[int, GrassmannElement] = {0: base}
        self._scalar_cache: dict[Expression, GrassmannElement] = {}
        self._subst = None if self.numeric else dict(zip(self.names, self.bodies))

    def _value(self, e: Expression):
        if self.numeric:
            return e.compile(self.names, self.complex_mode)(self.bodies)
        return e.substitute(self._subst)

    def scalar(self, a: Any) -> GrassmannElement:
        a = as_expr(a)
        hit = self._scalar_cache.get(a)
        if hit is not None:
            return hit
        if isinstance(a, Const):
            v = a.value
            if self.numeric:
                v = complex(v) if self.complex_mode else float(v) if not isinstance(v, complex) else v
                out = GrassmannElement.scalar(self.n, v)
            else:
                out = GrassmannElement.scalar(self.n, a)
            self._scalar_cache[a] = out
            return out
        out = GrassmannElement.zero(self.n)
        for orders, w, prod in self.jets:
            d = partial(a, self.names, orders)
            if d == 0:
                continue
            v = self._value(d)
            if self.numeric:
                out = out + prod * (v * w)
            else:
                out = out + prod.map_coefficients(lambda c, _v=v * w: _v * c)
        self._scalar_cache[a] = out
        return out

    def odd_product(self, mask: int) -> GrassmannElement:
        hit = self._odd_cache.get(mask)
        if hit is None:
            pos = positions(mask)
            rest = mask & ~(1 << (pos[-1] - 1))
            hit = self.odd_product(rest) * self.odd_images[pos[-1] - 1]
            self._odd_cache[mask] = hit
        return hit

    def superfunction(self, f: SuperFunction | GrassmannElement) -> GrassmannElement:
        f = _as_value(f)
        if f.n != len(self.odd_images):
            raise DomainMismatchError("superfunction does not live on the morphism's target")
        out = GrassmannElement.zero(self.n)
        for mask, coeff in f.terms.items():
            s = self.scalar(coeff)
            if s.is_zero():
                continue
            out = out + (s if mask == 0 else s * self.odd_product(mask))
        return out


def pullback_scalar(psi: MorphismData, a: Any) -> GrassmannElement:
    return Pullback(psi).scalar(a)


def pullback_superfunction(psi: MorphismData, f: SuperFunction | GrassmannElement) -> GrassmannElement:
    return Pullback(psi).superfunction(f)


def compose(psi: MorphismData, chi: MorphismData) -> MorphismData:
    """``psi o chi``; requires ``chi.target == psi.source``."""
    if chi.target != psi.source:
        raise DomainMismatchError("cannot compose: chi's target is not psi's source")
    eng = Pullback(chi)
    images = {name: eng.superfunction(img) for name, img in psi.images.items()}
    return MorphismData(chi.source, psi.target, images)


def morphisms_equal(u: MorphismData, v: MorphismData, **kw) -> bool:
    if u.source != v.source or u.target != v.target:
        return False
    box = u.source.box_dict()
    for name in u.target.coords:
        d = u.images[name] - v.images[name]
        for c in d.terms.values():
            if not is_zero_function(as_expr(c), u.source.even, complex_mode=u.source.complex_mode, box=box, **kw):
                return False
    return True


__all__ = [
    "SuperDomain", "SuperFunction", "SuperVectorField", "MorphismData", "Pullback",
    "apply_field", "parity_split", "super_bracket", "pullback_scalar", "pullback_superfunction",
    "compose", "fields_equal", "field_is_zero", "morphisms_equal", "elements_equal", "superfunction",
    "coordinate_derivative", "apply_components", "DomainMismatchError", "ParityError", "EvaluationError",
]
