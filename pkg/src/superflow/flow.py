"""Flows of super vector fields through the coefficient hierarchy.

For a field ``X = X0 + X1`` on a chart ``W`` and an initial morphism
``phi: S -> W`` the flow is written

    F*(w_j) = sum_I f^j_I(t) xi^I + tau * sum_I g^j_I(t) xi^I

The ``f`` coefficients solve the coupled linear-in-the-top-level system
``d/dt f^j_K = (Fc*(X0(w_j)) | xi^K)`` (``Fc`` is the tau-free part of
``F``), and the ``g`` coefficients are algebraic: ``G_j = Fc*(X1(w_j))``.
Each base point of ``S`` is one independent fiber.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .grassmann import GrassmannElement, masks_of_parity
from .ode import DenseSolution, IntegrationOutcome, StepFailure, integrate
from .supergeometry import (
    MorphismData,
    Pullback,
    SuperDomain,
    SuperVectorField,
    parity_split,
)


class FlowError(ArithmeticError):
    """Numerical failure: bad initial data or a sample outside the computed interval."""


class OutOfDomainError(FlowError):
    pass


class SingularityError(FlowError):
    """A holomorphic path ran into a blow-up of the flow."""


@dataclass
class ODESettings:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = math.inf
    max_steps: int = 100_000
    margin: float = 0.0
    t_min: float = -10.0
    t_max: float = 10.0
    blowup: float = 1e12
    min_step_factor: float = 1e-13

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")

    def replace(self, **kw) -> "ODESettings":
        d = dict(self.__dict__)
        d.update(kw)
        return ODESettings(**d)


@dataclass(frozen=True)
class FlowProblem:
    field: SuperVectorField
    initial: MorphismData
    t0: complex | float = 0.0

    def __post_init__(self):
        if self.initial.target != self.field.domain:
            raise ValueError("the initial morphism must map into the field's domain")

    @property
    def target(self) -> SuperDomain:
        return self.field.domain

    @property
    def source(self) -> SuperDomain:
        return self.initial.source

    @property
    def complex_mode(self) -> bool:
        return self.target.complex_mode

    @classmethod
    def identity(cls, X: SuperVectorField, t0=0.0) -> "FlowProblem":
        return cls(X, MorphismData.identity(X.domain), t0)


@dataclass
class FlowState:
    """The ``f`` coefficients at one time, as one Grassmann element per target coordinate."""

    t: Any
    f: dict[str, GrassmannElement]
    base_point: tuple = ()


def _numeric_morphism(source: SuperDomain, target: SuperDomain, images: dict) -> MorphismData:
    # skips validation; images come from a layout and are parity-consistent
    m = object.__new__(MorphismData)
    object.__setattr__(m, "source", source)
    object.__setattr__(m, "target", target)
    object.__setattr__(m, "images", images)
    return m


def _fiber_source(source: SuperDomain) -> SuperDomain:
    return SuperDomain((), source.odd, source.mode)


def _as_fcheck(state, target: SuperDomain) -> MorphismData:
    if isinstance(state, MorphismData):
        return state
    n = next(iter(state.f.values())).n if state.f else 0
    src = SuperDomain((), tuple(f"xi{i + 1}" for i in range(n)), target.mode)
    return _numeric_morphism(src, target, dict(state.f))


def hierarchy_rhs(state: FlowState | MorphismData, X0: SuperVectorField) -> dict[str, GrassmannElement]:
    """``Fc*(X0(w_j))`` per target coordinate; its ``xi^K`` coefficients are ``d/dt f^j_K``."""
    fc = _as_fcheck(state, X0.domain)
    eng = Pullback(fc)
    return {name: eng.superfunction(X0.component(name)) for name in X0.domain.coords}


def odd_part(state: FlowState | MorphismData, X1: SuperVectorField) -> dict[str, GrassmannElement]:
    """``G_j = Fc*(X1(w_j))``: the coefficients ``g^j_I`` of ``tau xi^I``."""
    fc = _as_fcheck(state, X1.domain)
    eng = Pullback(fc)
    return {name: eng.superfunction(X1.component(name)) for name in X1.domain.coords}


class Layout:
    """Flat ordering of the ``f^j_I`` with ``|I| = |w_j|`` (mod 2)."""

    def __init__(self, target: SuperDomain, source: SuperDomain):
        self.target = target
        self.source = _fiber_source(source)
        self.n = source.n_odd
        self.entries: list[tuple[str, int]] = []
        for name in target.coords:
            for m in masks_of_parity(self.n, target.parity(name)):
                self.entries.append((name, m))
        self.index = {e: i for i, e in enumerate(self.entries)}
        self.body_index = [self.index[(y, 0)] for y in target.even]
        self.dtype = complex if target.complex_mode else float

    @property
    def dim(self) -> int:
        return len(self.entries)

    def pack(self, images: Mapping[str, GrassmannElement]) -> np.ndarray:
        y = np.zeros(self.dim, dtype=self.dtype)
        for name, img in images.items():
            for m, c in img.terms.items():
                i = self.index.get((name, m))
                if i is None:
                    raise ValueError(f"coefficient of {name!r} at monomial {m:#b} has the wrong parity")
                y[i] = c
        return y

    def unpack(self, y: np.ndarray) -> dict[str, GrassmannElement]:
        terms: dict[str, dict[int, Any]] = {name: {} for name in self.target.coords}
        for (name, m), v in zip(self.entries, y.tolist()):
            if v != 0:
                terms[name][m] = v
        return {name: GrassmannElement._raw(self.n, t) for name, t in terms.items()}

    def morphism(self, y: np.ndarray) -> MorphismData:
        return _numeric_morphism(self.source, self.target, self.unpack(y))


class FlowSystem:
    """The coupled coefficient ODE of one problem."""

    def __init__(self, problem: FlowProblem):
        self.problem = problem
        self.X0, self.X1 = parity_split(problem.field)
        self.layout = Layout(problem.target, problem.source)

    def rhs(self, t, y: np.ndarray) -> np.ndarray:
        fc = self.layout.morphism(y)
        return self.layout.pack(hierarchy_rhs(fc, self.X0))

    def odd(self, y: np.ndarray) -> dict[str, GrassmannElement]:
        return odd_part(self.layout.morphism(y), self.X1)

    def initial_state(self, base_point: Sequence[Any] = ()) -> np.ndarray:
        phi = self.problem.initial
        if not phi.numeric or phi.source.even:
            phi = phi.at(base_point)
        return self.layout.pack(phi.images)

    def body(self, y: np.ndarray) -> list:
        return [y[i] for i in self.layout.body_index]

    def check_state(self, settings: ODESettings):
        target = self.problem.target

        def check(t, y):
            if not np.all(np.isfinite(y)):
                return "blowup"
            if y.size and np.max(np.abs(y)) > settings.blowup:
                return "blowup"
            if not target.complex_mode and target.box_excess(self.body(y)) > settings.margin:
                return "chart_exit"
            return None

        return check


@dataclass
class FlowSample:
    """``F*(w_j)`` at one time: ``f``-part, ``g``-part and ``d/dt`` of the ``f``-part."""

    t: Any
    f: dict[str, GrassmannElement]
    g: dict[str, GrassmannElement]
    f_dot: dict[str, GrassmannElement]
    source_odd: tuple[str, ...]
    target: SuperDomain

    def image(self, name: str) -> GrassmannElement:
        """``F*(w_j)`` over the generators ``(xi_1..xi_n, tau)``."""
        n = len(self.source_odd)
        tau = GrassmannElement.generator(n + 1, n + 1)
        return self.f[name].adjoin(1) + tau * self.g[name].adjoin(1)

    def morphism(self) -> MorphismData:
        src = SuperDomain((), self.source_odd + ("tau",), self.target.mode)
        return _numeric_morphism(src, self.target, {name: self.image(name) for name in self.target.coords})

    def fcheck(self) -> MorphismData:
        src = SuperDomain((), self.source_odd, self.target.mode)
        return _numeric_morphism(src, self.target, dict(self.f))


@dataclass
class FlowResult:
    """One fiber of the flow: dense trajectories forward and backward from ``t0``."""

    problem: FlowProblem
    base_point: tuple
    system: FlowSystem
    forward: IntegrationOutcome
    backward: IntegrationOutcome
    settings: ODESettings

    @property
    def t0(self):
        return self.problem.t0

    @property
    def interval(self) -> tuple[float, float]:
        return (self.backward.t_last, self.forward.t_last)

    @property
    def reasons(self) -> tuple[str, str]:
        lo = self.backward.reason
        hi = self.forward.reason
        return ("reached_t_min" if lo == "reached" else lo, "reached_t_max" if hi == "reached" else hi)

    @property
    def layout(self) -> Layout:
        return self.system.layout

    def _solution(self, t) -> DenseSolution:
        lo, hi = self.interval
        tol = 1e-12 * max(1.0, abs(t))
        if not lo - tol <= t <= hi + tol:
            raise OutOfDomainError(f"t = {t} outside the computed interval [{lo}, {hi}]")
        return self.forward.solution if t >= self.t0 else self.backward.solution

    def state(self, t) -> np.ndarray:
        if t == self.t0:
            return self.forward.solution.y0.copy()
        return self._solution(t)(t)

    def state_derivative(self, t) -> np.ndarray:
        """Time derivative of the dense interpolant (not the RHS)."""
        sol = self._solution(t)
        if not sol.steps:
            return self.system.rhs(t, sol.y0)
        return sol.derivative(t)

    def f_part(self, t) -> dict[str, GrassmannElement]:
        return self.layout.unpack(self.state(t))

    def g_part(self, t) -> dict[str, GrassmannElement]:
        return self.system.odd(self.state(t))

    def f_dot(self, t) -> dict[str, GrassmannElement]:
        return self.layout.unpack(self.system.rhs(t, self.state(t)))

    def sample(self, t) -> FlowSample:
        y = self.state(t)
        return FlowSample(
            t,
            self.layout.unpack(y),
            self.system.odd(y),
            self.layout.unpack(self.system.rhs(t, y)),
            self.problem.source.odd,
            self.problem.target,
        )

    def contains(self, t) -> bool:
        lo, hi = self.interval
        return lo <= t <= hi


def integrate_flow(problem: FlowProblem, x: Sequence[Any] | Mapping[str, Any] = (),
                   settings: ODESettings | None = None) -> FlowResult:
    """Integrate one fiber forward to ``t_max`` and backward to ``t_min`` (or until a stop)."""
    if problem.complex_mode:
        raise ValueError("complex problems are integrated along paths, see integrate_along_path")
    settings = settings or ODESettings()
    if isinstance(x, Mapping):
        x = [x[n] for n in problem.source.even]
    x = tuple(x)
    system = FlowSystem(problem)
    y0 = system.initial_state(x)
    if problem.target.box_excess(system.body(y0)) > settings.margin:
        raise FlowError(f"initial point {system.body(y0)} lies outside the chart")
    check = system.check_state(settings)
    if check(problem.t0, y0) is not None:
        raise FlowError("initial state is not admissible")
    try:
        f0 = system.rhs(problem.t0, y0)
    except ArithmeticError as exc:
        raise FlowError(f"right-hand side undefined at the initial point: {exc}") from exc
    if not np.all(np.isfinite(f0)):
        raise FlowError("non-finite right-hand side at the initial point")

    def run(t_end):
        return integrate(system.rhs, problem.t0, y0, t_end, rtol=settings.rtol, atol=settings.atol,
                         max_step=settings.max_step, max_steps=settings.max_steps,
                         min_step_factor=settings.min_step_factor, accept_check=check)

    fwd = run(max(settings.t_max, problem.t0))
    bwd = run(min(settings.t_min, problem.t0))
    return FlowResult(problem, x, system, fwd, bwd, settings)


def integrate_grid(problem: FlowProblem, grid: Iterable[Sequence[Any]], settings: ODESettings | None = None,
                   jobs: int = 1) -> list[FlowResult]:
    """Independent fibers over a list of base points, returned in grid order."""
    grid = [tuple(p) for p in grid]
    if jobs <= 1 or len(grid) <= 1:
        return [integrate_flow(problem, p, settings) for p in grid]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(lambda p: integrate_flow(problem, p, settings), grid))


# ---------------------------------------------------------------------------
# verification


def _max_diff(a: Mapping[str, GrassmannElement], b: Mapping[str, GrassmannElement]) -> float:
    worst = 0.0
    for name in set(a) | set(b):
        ua = a.get(name)
        ub = b.get(name)
        if ua is None:
            d = ub
        elif ub is None:
            d = ua
        else:
            d = ua - ub
        worst = max(worst, d.max_abs())
    return worst


@dataclass
class FlowCheckReport:
    max_f_residual: float
    max_g_residual: float
    initial_residual: float
    tol: float
    per_sample: list[tuple[float, float, float]] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(self.max_f_residual, self.max_g_residual, self.initial_residual)

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tol


def verify_flow_equations(result: FlowResult, times: Iterable[float] = (), tol: float = 1e-6,
                          samples: Iterable[FlowSample] | None = None) -> FlowCheckReport:
    """Check the flow equations at sample times.

    The derivative of the dense interpolant of each ``f`` coefficient is
    compared with ``(Fc*(X0(w_j)) | xi^K)`` and each ``g`` coefficient with
    ``(Fc*(X1(w_j)) | xi^I)``.  The initial condition at ``t0`` is checked
    against the initial morphism.  Pre-built ``samples`` may be passed
    instead of times (their ``f``/``g`` values are taken as given).
    """
    system = result.system
    if samples is None:
        samples = [result.sample(t) for t in times]
    rows = []
    fmax = gmax = 0.0
    for s in samples:
        fc = s.fcheck()
        rhs = hierarchy_rhs(fc, system.X0)
        interp = result.layout.unpack(result.state_derivative(s.t))
        fr = _max_diff({k: v.parity_part(result.problem.target.parity(k)) for k, v in rhs.items()}, interp)
        gr = _max_diff(odd_part(fc, system.X1), s.g)
        rows.append((s.t, fr, gr))
        fmax, gmax = max(fmax, fr), max(gmax, gr)
    y_init = system.initial_state(result.base_point)
    init = float(np.max(np.abs(result.state(result.t0) - y_init))) if y_init.size else 0.0
    return FlowCheckReport(fmax, gmax, init, tol, rows)


def restart_deviation(result: FlowResult, t1: float, t2: float, settings: ODESettings | None = None) -> float:
    """Integrate to ``t1``, restart from the sampled morphism and compare with the direct value at ``t2``."""
    settings = settings or result.settings
    p = result.problem
    fc = _numeric_morphism(_fiber_source(p.source), p.target, result.f_part(t1))
    restarted = FlowProblem(p.field, fc, t1)
    lo, hi = sorted((t1, t2))
    r2 = integrate_flow(restarted, (), settings.replace(t_min=min(lo, t1), t_max=max(hi, t1)))
    return float(np.max(np.abs(r2.state(t2) - result.state(t2)))) if result.layout.dim else 0.0


# ---------------------------------------------------------------------------
# holomorphic paths


@dataclass
class PathSegment:
    start: complex
    end: complex
    outcome: IntegrationOutcome

    def state(self, s: float) -> np.ndarray:
        return self.outcome.solution(s)


@dataclass
class PathResult:
    problem: FlowProblem
    base_point: tuple
    system: FlowSystem
    path: list[complex]
    segments: list[PathSegment]
    y_start: np.ndarray

    @property
    def y_end(self) -> np.ndarray:
        return self.segments[-1].outcome.y_last if self.segments else self.y_start

    def f_end(self) -> dict[str, GrassmannElement]:
        return self.system.layout.unpack(self.y_end)

    def g_end(self) -> dict[str, GrassmannElement]:
        return self.system.odd(self.y_end)

    def state_at(self, segment: int, s: float) -> np.ndarray:
        return self.segments[segment].state(s)

    def z_at(self, segment: int, s: float) -> complex:
        seg = self.segments[segment]
        return seg.start + s * (seg.end - seg.start)


def _check_complex(problem: FlowProblem):
    if not problem.complex_mode:
        raise ValueError("path integration needs a complex-mode problem")


def _path_from(system: FlowSystem, y0: np.ndarray, path: Sequence[complex], settings: ODESettings):
    check = system.check_state(settings)
    segments = []
    y = y0
    for za, zb in zip(path[:-1], path[1:]):
        dz = complex(zb) - complex(za)
        if dz == 0:
            continue

        def fun(s, v, _dz=dz):
            return _dz * system.rhs(None, v)

        out = integrate(fun, 0.0, y, 1.0, rtol=settings.rtol, atol=settings.atol,
                        max_step=settings.max_step, max_steps=settings.max_steps,
                        min_step_factor=settings.min_step_factor, accept_check=check)
        if out.reason != "reached":
            z_stop = complex(za) + out.t_last * dz
            raise SingularityError(f"path integration stopped near z = {z_stop:.6g} ({out.reason})")
        segments.append(PathSegment(complex(za), complex(zb), out))
        y = out.y_last
    return segments


def integrate_along_path(problem: FlowProblem, x: Sequence[Any] = (), path: Sequence[complex] = (),
                         settings: ODESettings | None = None) -> PathResult:
    """Integrate the hierarchy along a polyline ``z0 = path[0] -> ... -> path[-1]``.

    On each segment ``z = za + s (zb - za)`` with real ``s`` in ``[0, 1]``
    and ``dF/ds = (zb - za) * RHS(F)``.
    """
    _check_complex(problem)
    settings = settings or ODESettings()
    path = [complex(z) for z in path]
    if not path:
        raise ValueError("empty path")
    if abs(path[0] - complex(problem.t0)) > 1e-12:
        raise ValueError("the path must start at z0")
    system = FlowSystem(problem)
    y0 = system.initial_state(tuple(x))
    try:
        f0 = system.rhs(None, y0)
    except ArithmeticError as exc:
        raise FlowError(f"right-hand side undefined at the initial point: {exc}") from exc
    if not np.all(np.isfinite(f0)):
        raise FlowError("non-finite right-hand side at the initial point")
    segments = _path_from(system, y0, path, settings)
    return PathResult(problem, tuple(x), system, path, segments, y0)


@dataclass
class MonodromyReport:
    loop: list[complex]
    start: dict[str, GrassmannElement]
    end: dict[str, GrassmannElement]
    delta: dict[str, GrassmannElement]
    delta_g: dict[str, GrassmannElement]

    @property
    def max_abs(self) -> float:
        return max((d.max_abs() for d in self.delta.values()), default=0.0)


def monodromy(problem: FlowProblem, x: Sequence[Any] = (), loop: Sequence[complex] = (),
              settings: ODESettings | None = None) -> MonodromyReport:
    """Change of every ``f^j_I`` after one trip around a closed polyline.

    If the loop does not start at ``z0``, the solution is first carried from
    ``z0`` to the loop's base point along a straight segment.
    """
    _check_complex(problem)
    settings = settings or ODESettings()
    loop = [complex(z) for z in loop]
    if len(loop) < 3:
        raise ValueError("a loop needs at least three points")
    if loop[0] != loop[-1]:
        loop = loop + [loop[0]]
    z0 = complex(problem.t0)
    approach = [z0] if loop[0] == z0 else [z0, loop[0]]
    base = integrate_along_path(problem, x, approach, settings)
    y_start = base.y_end
    segs = _path_from(base.system, y_start, loop, settings)
    y_end = segs[-1].outcome.y_last if segs else y_start
    lay = base.system.layout
    start, end = lay.unpack(y_start), lay.unpack(y_end)
    g0, g1 = base.system.odd(y_start), base.system.odd(y_end)
    delta = {k: end[k] - start[k] for k in start}
    delta_g = {k: g1[k] - g0[k] for k in g0}
    return MonodromyReport(loop, start, end, delta, delta_g)

