"""Adaptive Dormand-Prince 5(4) integrator with continuous (dense) output.

Works on real or complex numpy state vectors.  Each accepted step stores the
coefficients of its interpolation polynomial, so the solution and its time
derivative can be sampled anywhere inside the covered interval without
re-integrating.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# error coefficients (5th minus embedded 4th order)
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40
# dense output
D1, D3, D4 = -12715105075 / 11282082432, 87487479700 / 32700410799, -10690763975 / 1880347072
D5, D6, D7 = 701980252875 / 199316789632, -1453857185 / 822651844, 69997945 / 29380423


class StepFailure(ArithmeticError):
    """The right-hand side could not be evaluated (non-finite or undefined)."""


@dataclass
class DenseStep:
    t: float
    h: float
    rc: np.ndarray  # shape (5, dim)

    def value(self, s: float) -> np.ndarray:
        theta = (s - self.t) / self.h
        th1 = 1.0 - theta
        r = self.rc
        return r[0] + theta * (r[1] + th1 * (r[2] + theta * (r[3] + th1 * r[4])))

    def derivative(self, s: float) -> np.ndarray:
        theta = (s - self.t) / self.h
        th1 = 1.0 - theta
        r = self.rc
        a = r[2] + theta * (r[3] + th1 * r[4])
        b = r[1] + th1 * a
        da = r[3] + (1.0 - 2.0 * theta) * r[4]
        return (b + theta * (-a + th1 * da)) / self.h


@dataclass
class DenseSolution:
    """Piecewise interpolant over accepted steps, all in one direction from ``t0``."""

    t0: float
    y0: np.ndarray
    direction: int = 1
    steps: list[DenseStep] = field(default_factory=list)
    _keys: list[float] = field(default_factory=list)

    @property
    def t_end(self) -> float:
        if not self.steps:
            return self.t0
        s = self.steps[-1]
        return s.t + s.h

    def append(self, step: DenseStep) -> None:
        self.steps.append(step)
        self._keys.append(self.direction * step.t)

    def covers(self, t: float, slack: float = 0.0) -> bool:
        lo, hi = sorted((self.t0, self.t_end))
        return lo - slack <= t <= hi + slack

    def _locate(self, t: float) -> DenseStep:
        i = bisect.bisect_right(self._keys, self.direction * t) - 1
        return self.steps[min(max(i, 0), len(self.steps) - 1)]

    def __call__(self, t: float) -> np.ndarray:
        if not self.steps:
            return self.y0.copy()
        return self._locate(t).value(t)

    def derivative(self, t: float) -> np.ndarray:
        if not self.steps:
            raise ValueError("no accepted steps to differentiate")
        return self._locate(t).derivative(t)


@dataclass
class IntegrationOutcome:
    solution: DenseSolution
    t_last: float
    y_last: np.ndarray
    reason: str
    n_steps: int
    n_rejected: int
    n_evals: int


def _norm(v: np.ndarray, sc: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.abs(v / sc) ** 2))) if v.size else 0.0


def _safe_call(fun, t, y):
    try:
        k = np.asarray(fun(t, y))
    except (ArithmeticError, ValueError) as exc:
        raise StepFailure(str(exc)) from exc
    if not np.all(np.isfinite(k)):
        raise StepFailure("non-finite right-hand side")
    return k


def initial_step(fun, t0, y0, f0, direction, rtol, atol, max_step) -> float:
    sc = atol + np.abs(y0) * rtol
    d0 = _norm(y0, sc)
    d1 = _norm(f0, sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    try:
        f1 = _safe_call(fun, t0 + direction * h0, y0 + direction * h0 * f0)
        d2 = _norm(f1 - f0, sc) / h0
    except StepFailure:
        return h0 * 1e-3
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, max_step)


def integrate(
    fun: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    *,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    max_step: float = np.inf,
    max_steps: int = 100_000,
    first_step: float | None = None,
    min_step_factor: float = 1e-13,
    accept_check: Callable[[float, np.ndarray], str | None] | None = None,
) -> IntegrationOutcome:
    """Integrate ``y' = fun(t, y)`` from ``t0`` towards ``t_end``.

    Stops at ``t_end`` (reason ``"reached"``), when the step size falls below
    ``min_step_factor * max(1, |t|)`` (``"step_underflow"``), after
    ``max_steps`` accepted steps (``"max_steps"``), or when ``accept_check``
    returns a reason string for a freshly accepted state.  A step whose state
    trips ``accept_check`` is discarded and retried with half the step, so
    ``t_last`` is a state that passed the check and lies within about
    ``min_step_factor * max(1, |t|)`` of the first failing time; the reason
    reported is then the check's.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    direction = 1 if t_end >= t0 else -1
    sol = DenseSolution(t0, y.copy(), direction)
    t = t0
    n_evals = 1
    f = _safe_call(fun, t, y)
    if t_end == t0:
        return IntegrationOutcome(sol, t, y, "reached", 0, 0, n_evals)
    span = abs(t_end - t0)
    max_step = min(max_step, span)
    h = abs(first_step) if first_step else initial_step(fun, t, y, f, direction, rtol, atol, max_step)
    n_evals += 1
    n_steps = n_rej = 0
    reason = "reached"
    pending = None
    last_rejected = False
    while True:
        remaining = abs(t_end - t)
        if remaining <= 1e-15 * max(1.0, abs(t)):
            break
        if n_steps >= max_steps:
            reason = "max_steps"
            break
        h = min(h, max_step, remaining)
        if h < min_step_factor * max(1.0, abs(t)):
            reason = pending or "step_underflow"
            break
        hs = direction * h
        try:
            k1 = f
            k2 = _safe_call(fun, t + C2 * hs, y + hs * (A21 * k1))
            k3 = _safe_call(fun, t + C3 * hs, y + hs * (A31 * k1 + A32 * k2))
            k4 = _safe_call(fun, t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3))
            k5 = _safe_call(fun, t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
            k6 = _safe_call(fun, t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
            y1 = y + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
            k7 = _safe_call(fun, t + hs, y1)
            n_evals += 6
        except StepFailure:
            n_evals += 6
            n_rej += 1
            h *= 0.25
            last_rejected = True
            continue
        err_vec = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y1))
        err = _norm(err_vec, sc)
        if err <= 1.0:
            t_new = t_end if abs(h - remaining) <= 1e-15 * max(1.0, abs(t)) else t + hs
            if accept_check is not None:
                why = accept_check(t_new, y1)
                if why is not None:
                    # home in on the boundary with shrinking steps
                    pending = why
                    n_rej += 1
                    h *= 0.5
                    last_rejected = True
                    continue
            rc = np.empty((5,) + y.shape, dtype=y.dtype)
            rc[0] = y
            rc[1] = y1 - y
            rc[2] = hs * k1 - rc[1]
            rc[3] = rc[1] - hs * k7 - rc[2]
            rc[4] = hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
            sol.append(DenseStep(t, hs, rc))
            t, y, f = t_new, y1, k7
            n_steps += 1
            fac = 10.0 if err == 0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
            if last_rejected:
                fac = min(fac, 1.0)
            h *= fac
            last_rejected = False
        else:
            n_rej += 1
            h *= max(0.2, 0.9 * err ** -0.2)
            last_rejected = True
    return IntegrationOutcome(sol, t, y, reason, n_steps, n_rej, n_evals)
