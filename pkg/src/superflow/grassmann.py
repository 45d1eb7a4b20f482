"""Grassmann algebra on finitely many odd generators.

Monomials are stored as integer bit masks: bit ``i`` stands for the generator
``xi_{i+1}`` and a mask always denotes the product of its generators in
ascending order.  Coefficients may be any commutative scalar type that
supports ``+``, ``-``, ``*`` and comparison with ``0`` (ints, Fractions,
floats, complex numbers, or :class:`superflow.expr.Expression`).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Callable, Iterable, Iterator

MAX_GENERATORS = 16


class DimensionError(ValueError):
    """Operands live in Grassmann algebras with different generator counts."""


@lru_cache(maxsize=65536)
def reorder_sign(left: int, right: int) -> int:
    """Sign picked up when ``xi^left * xi^right`` is sorted into ``xi^(left|right)``.

    ``left`` and ``right`` must be disjoint.  The sign is ``(-1)**k`` with ``k``
    the number of pairs ``(i in left, j in right)`` with ``i > j``.
    """
    inversions = 0
    rest = right
    while rest:
        low = rest & -rest
        inversions += (left & ~((low << 1) - 1)).bit_count()
        rest ^= low
    return -1 if inversions & 1 else 1


def _is_zero(c: Any) -> bool:
    return c == 0


def positions(mask: int) -> tuple[int, ...]:
    """1-based generator positions contained in ``mask``."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i + 1)
        mask >>= 1
        i += 1
    return tuple(out)


@dataclass(frozen=True)
class GrassmannIndex:
    """A multi-index ``I``, i.e. a subset of generator positions."""

    mask: int

    @classmethod
    def of(cls, *pos: int) -> "GrassmannIndex":
        mask = 0
        for p in pos:
            if p < 1:
                raise ValueError("generator positions are 1-based")
            mask |= 1 << (p - 1)
        return cls(mask)

    @property
    def subset(self) -> tuple[int, ...]:
        return positions(self.mask)

    @property
    def degree(self) -> int:
        return self.mask.bit_count()

    @property
    def parity(self) -> int:
        return self.mask.bit_count() & 1


def _as_mask(index: "GrassmannIndex | int | Iterable[int]") -> int:
    if isinstance(index, GrassmannIndex):
        return index.mask
    if isinstance(index, int):
        return index
    return GrassmannIndex.of(*index).mask


class GrassmannElement:
    """An element of the Grassmann algebra on ``n`` generators.

    Terms with an exactly-zero coefficient are never stored, so two elements
    are equal iff their term maps are equal.
    """

    __slots__ = ("n", "terms")

    def __init__(self, n: int, terms: dict[int, Any] | None = None):
        if not 0 <= n <= MAX_GENERATORS:
            raise DimensionError(f"generator count must lie in [0, {MAX_GENERATORS}], got {n}")
        self.n = n
        clean = {}
        if terms:
            limit = 1 << n
            for mask, c in terms.items():
                if not 0 <= mask < limit:
                    raise DimensionError(f"monomial mask {mask:#b} exceeds {n} generators")
                if not _is_zero(c):
                    clean[mask] = c
        self.terms = clean

    # -- constructors -----------------------------------------------------
    @classmethod
    def _raw(cls, n: int, terms: dict[int, Any]) -> "GrassmannElement":
        obj = cls.__new__(cls)
        obj.n = n
        obj.terms = terms
        return obj

    @classmethod
    def zero(cls, n: int) -> "GrassmannElement":
        return cls(n)

    @classmethod
    def scalar(cls, n: int, c: Any) -> "GrassmannElement":
        return cls(n, {0: c})

    @classmethod
    def generator(cls, n: int, position: int) -> "GrassmannElement":
        """The generator ``xi_position`` (1-based)."""
        if not 1 <= position <= n:
            raise DimensionError(f"generator {position} out of range for n={n}")
        return cls(n, {1 << (position - 1): 1})

    @classmethod
    def monomial(cls, n: int, order: Iterable[int], coeff: Any = 1) -> "GrassmannElement":
        """``coeff * xi_{order[0]} * xi_{order[1]} * ...`` in the given (possibly unsorted) order."""
        result = cls.scalar(n, coeff)
        for p in order:
            result = result * cls.generator(n, p)
        return result

    # -- inspection -------------------------------------------------------
    def coefficient(self, index: "GrassmannIndex | int | Iterable[int]") -> Any:
        mask = _as_mask(index)
        if mask >= 1 << self.n:
            raise DimensionError(f"index {positions(mask)} out of range for n={self.n}")
        return self.terms.get(mask, 0)

    @property
    def body(self) -> Any:
        return self.terms.get(0, 0)

    def nilpotent_part(self) -> "GrassmannElement":
        return GrassmannElement._raw(self.n, {m: c for m, c in self.terms.items() if m})

    def parity_part(self, p: int) -> "GrassmannElement":
        return GrassmannElement._raw(
            self.n, {m: c for m, c in self.terms.items() if m.bit_count() & 1 == p}
        )

    @property
    def parity(self) -> int | None:
        """0 or 1 for homogeneous elements, ``None`` for mixed ones (0 for zero)."""
        ps = {m.bit_count() & 1 for m in self.terms}
        if not ps:
            return 0
        return ps.pop() if len(ps) == 1 else None

    def is_zero(self) -> bool:
        return not self.terms

    def items(self) -> Iterator[tuple[int, Any]]:
        return iter(sorted(self.terms.items()))

    def max_abs(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    # -- structural maps --------------------------------------------------
    def map_coefficients(self, fn: Callable[[Any], Any]) -> "GrassmannElement":
        return GrassmannElement(self.n, {m: fn(c) for m, c in self.terms.items()})

    def adjoin(self, k: int) -> "GrassmannElement":
        """View in the algebra with ``k`` extra generators appended after the old ones."""
        if k < 0:
            raise ValueError("k must be non-negative")
        return GrassmannElement(self.n + k, dict(self.terms))

    def restrict(self, n: int) -> "GrassmannElement":
        """Drop every term that involves a generator beyond position ``n``."""
        limit = 1 << n
        return GrassmannElement(n, {m: c for m, c in self.terms.items() if m < limit})

    def odd_derivative(self, position: int) -> "GrassmannElement":
        """Left derivative with respect to ``xi_position`` (1-based)."""
        bit = 1 << (position - 1)
        below = bit - 1
        out = {}
        for m, c in self.terms.items():
            if m & bit:
                out[m ^ bit] = -c if (m & below).bit_count() & 1 else c
        return GrassmannElement._raw(self.n, out)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other: Any) -> "GrassmannElement":
        if isinstance(other, GrassmannElement):
            if other.n != self.n:
                raise DimensionError(f"generator counts differ: {self.n} vs {other.n}")
            return other
        return GrassmannElement.scalar(self.n, other)

    def __add__(self, other: Any) -> "GrassmannElement":
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            if m in out:
                s = out[m] + c
                if _is_zero(s):
                    del out[m]
                else:
                    out[m] = s
            else:
                out[m] = c
        return GrassmannElement._raw(self.n, out)

    __radd__ = __add__

    def __neg__(self) -> "GrassmannElement":
        return GrassmannElement._raw(self.n, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other: Any) -> "GrassmannElement":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "GrassmannElement":
        return self._coerce(other) - self

    def __mul__(self, other: Any) -> "GrassmannElement":
        if not isinstance(other, GrassmannElement):
            if _is_zero(other):
                return GrassmannElement.zero(self.n)
            return GrassmannElement(self.n, {m: c * other for m, c in self.terms.items()})
        if other.n != self.n:
            raise DimensionError(f"generator counts differ: {self.n} vs {other.n}")
        out: dict[int, Any] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                if m1 & m2:
                    continue
                c = c1 * c2
                if reorder_sign(m1, m2) < 0:
                    c = -c
                m = m1 | m2
                if m in out:
                    out[m] = out[m] + c
                else:
                    out[m] = c
        return GrassmannElement(self.n, out)

    def __rmul__(self, other: Any) -> "GrassmannElement":
        # scalars are central
        if _is_zero(other):
            return GrassmannElement.zero(self.n)
        return GrassmannElement(self.n, {m: other * c for m, c in self.terms.items()})

    def __pow__(self, k: int) -> "GrassmannElement":
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are defined")
        result = GrassmannElement.scalar(self.n, 1)
        for _ in range(k):
            result = result * self
        return result

    def __eq__(self, other: object) -> bool:
        if isinstance(other, GrassmannElement):
            return self.n == other.n and self.terms == other.terms
        try:
            return self.terms == GrassmannElement.scalar(self.n, other).terms
        except TypeError:
            return NotImplemented

    def __hash__(self) -> int:
        return hash((self.n, frozenset(self.terms.items())))

    # -- printing ---------------------------------------------------------
    def format(self, names: Iterable[str] | None = None) -> str:
        names = list(names) if names is not None else [f"xi{i + 1}" for i in range(self.n)]
        if not self.terms:
            return "0"
        parts = []
        for m, c in self.items():
            mono = "*".join(names[p - 1] for p in positions(m))
            if not mono:
                parts.append(f"{c}")
            elif c == 1:
                parts.append(mono)
            else:
                text = f"{c}"
                if " " in text or text.startswith("-"):
                    text = f"({text})"
                parts.append(f"{text}*{mono}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"GrassmannElement(n={self.n}, {self.format()})"


def multiply(u: GrassmannElement, v: GrassmannElement) -> GrassmannElement:
    return u * v


def coefficient(u: GrassmannElement, index: "GrassmannIndex | int | Iterable[int]") -> Any:
    """``(u | xi^K)``: the coefficient of the sorted monomial ``K``."""
    return u.coefficient(index)


def parity_part(u: GrassmannElement, p: int) -> GrassmannElement:
    return u.parity_part(p)


def adjoin_generators(u: GrassmannElement, k: int) -> GrassmannElement:
    return u.adjoin(k)


def masks_of_parity(n: int, p: int) -> list[int]:
    """All monomial masks on ``n`` generators with degree parity ``p``, ascending."""
    return [m for m in range(1 << n) if m.bit_count() & 1 == p]
