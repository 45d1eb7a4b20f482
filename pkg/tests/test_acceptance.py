"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) to print only the lines.
"""

import cmath
import math
import time
from itertools import product

import numpy as np
from superflow.action import (
    SupergroupParams,
    associativity_holds,
    bracket_table,
    check_action,
    find_action_params,
    is_right_invariant,
    residual_lower_bound,
    right_invariant_fields,
    strong_flow_residual,
    unit_laws_hold,
    verify_local_action,
)
from superflow.flow import (
    FlowProblem,
    ODESettings,
    integrate_along_path,
    integrate_flow,
    monodromy,
    restart_deviation,
)
from superflow.grassmann import GrassmannElement, reorder_sign
from superflow.oracle import oracle_deviation, random_polynomial_field
from superflow.problem import load_corpus
from superflow.supergeometry import SuperDomain, SuperVectorField

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number}: {title}  [{detail}]"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------
# 1. Grassmann laws


def _basis(n):
    return [GrassmannElement(n, {m: 1}) for m in range(1 << n)]


def grassmann_law_suite(max_n: int = 5) -> tuple[bool, str]:
    failures = 0
    for n in range(max_n + 1):
        basis = _basis(n)
        products = {(i, j): basis[i] * basis[j] for i in range(1 << n) for j in range(1 << n)}
        for i, j, k in product(range(1 << n), repeat=3):
            if products[(i, j)] * basis[k] != basis[i] * products[(j, k)]:
                failures += 1
        for i, j in product(range(1 << n), repeat=2):
            sign = -1 if (bin(i).count("1") * bin(j).count("1")) & 1 else 1
            if products[(i, j)] != products[(j, i)] * sign:
                failures += 1
        # nilpotency on the element with every nilpotent basis monomial present
        u = GrassmannElement(n, {m: 1 for m in range(1, 1 << n)})
        if not (u ** (n + 1)).is_zero():
            failures += 1
        for I, J, K in product(range(1 << n), repeat=3):
            if I & J or I & K or J & K:
                continue
            if reorder_sign(I, J) * reorder_sign(I | J, K) != reorder_sign(J, K) * reorder_sign(I, J | K):
                failures += 1
    return failures == 0, f"{failures} failures"


def test_criterion_1_grassmann_laws():
    t0 = time.perf_counter()
    ok, detail = grassmann_law_suite(5)
    dt = time.perf_counter() - t0
    record(1, "Grassmann law suite n<=5", ok and dt < 10, f"{detail}, {dt:.2f}s")


# ---------------------------------------------------------------------------
# 2. Lie series oracle


def test_criterion_2_oracle_equivalence():
    times = [float(v) for v in np.linspace(-0.3, 0.3, 7)]
    domains = [SuperDomain(("x",), ("a", "b")), SuperDomain(("x", "y"), ("a", "b"))]
    t0 = time.perf_counter()
    worst = 0.0
    for D in domains:
        for seed in range(10):
            X = random_polynomial_field(D, seed)
            worst = max(worst, oracle_deviation(X, tuple(0.0 for _ in D.even), times, order=12))
    dt = time.perf_counter() - t0
    record(2, "oracle equivalence, 20 random fields", worst <= 1e-6 and dt < 60,
           f"max deviation {worst:.2e}, {dt:.1f}s")


# ---------------------------------------------------------------------------
# 3. supersymmetric translation


def test_criterion_3_susy():
    p = load_corpus("susy")
    settings = ODESettings(t_min=-1.0, t_max=1.0)
    worst = 0.0
    for x in (-0.7, 0.0, 0.4):
        res = integrate_flow(p.flow_problem(), (x,), settings)
        for t in np.linspace(-1.0, 1.0, 9):
            s = res.sample(float(t))
            # generators (xi, tau): x + t + tau*xi = x + t - xi*tau
            fx = GrassmannElement(2, {0: x + t, 0b11: -1.0})
            fxi = GrassmannElement(2, {0b01: 1.0, 0b10: 1.0})
            worst = max(worst, (s.image("x") - fx).max_abs(), (s.image("xi") - fxi).max_abs())
    crit = find_action_params(p.field)
    rng = np.random.default_rng(3)
    pairs = [tuple(map(float, pr)) for pr in rng.uniform(-0.4, 0.4, size=(10, 2))]
    res = integrate_flow(p.flow_problem(), (0.3,), settings)
    local = verify_local_action(res, (crit.a, crit.b), pairs)
    ok = worst <= 1e-9 and crit.is_action and (crit.a, crit.b) == (1, 0) and local.max_difference <= 1e-8
    record(3, "supersymmetric translation: flow, parameters, local action", ok,
           f"flow err {worst:.1e}, (a,b)=({crit.a},{crit.b}), local diff {local.max_difference:.1e}")


# ---------------------------------------------------------------------------
# 4. non-integrable field


def test_criterion_4_nonintegrable():
    p = load_corpus("nonintegrable")
    crit = find_action_params(p.field)
    times = [float(v) for v in np.linspace(-0.5, 0.5, 11)]
    settings = ODESettings(t_min=-0.6, t_max=0.6)
    base = [0.0, 0.7, -0.4]
    identity = 0.0
    measured = math.inf
    reduced_points = []
    admissible = [(1, 0), (0, 1), (0, 0), (-1, 0), (0, -1), (2.5, 0), (0, -3.0)]
    if crit.candidate:
        admissible.append(tuple(0 if v is None else v for v in crit.candidate))
    for x in base:
        res = integrate_flow(p.flow_problem(), (x,), settings)
        for ab in admissible:
            if ab[0] * ab[1] != 0:
                continue
            rep = strong_flow_residual(res, p.field, ab, times)
            identity = max(identity, rep.identity_residual)
            measured = min(measured, min(r[2] for r in rep.per_sample))
        reduced_points += [(res.f_part(t)["x"].body,) for t in times]
    bound = residual_lower_bound(p.field, reduced_points)
    ok = (not crit.is_action) and identity <= 1e-8 and bound >= 0.1 and measured >= bound - 1e-8
    record(4, "non-integrable field", ok,
           f"status={crit.status}, identity residual {identity:.1e}, lower bound |F*R| >= {bound:.3f}, "
           f"measured min {measured:.3f}")


# ---------------------------------------------------------------------------
# 5. supergroup structure


def test_criterion_5_supergroup():
    details = []
    ok = True
    for a, b in ((0, 0), (1, 0), (0, 1)):
        params = SupergroupParams(a, b)
        D0, D1 = right_invariant_fields(params, verify=False)
        inv = is_right_invariant(D0, params) and is_right_invariant(D1, params)
        table = bracket_table(params)
        assoc = associativity_holds(params)
        unit = unit_laws_hold(params)
        good = inv and all(table.values()) and assoc and unit
        ok = ok and good
        details.append(f"({a},{b}):{'ok' if good else 'bad'}")
    record(5, "right-invariant fields, brackets, group laws", ok, " ".join(details))


# ---------------------------------------------------------------------------
# 6. homological field


def test_criterion_6_homological():
    p = load_corpus("homological")
    settings = ODESettings(t_min=-1.0, t_max=1.0)
    worst = 0.0
    for x in (0.0, 1.5, -0.8):
        res = integrate_flow(p.flow_problem(), (x,), settings)
        f0 = res.f_part(0.0)
        for t in np.linspace(-1.0, 1.0, 9):
            s = res.sample(float(t))
            for k in ("x", "xi"):
                worst = max(worst, (s.f[k] - f0[k]).max_abs())
            # F* = f + tau X1(f): x -> x + tau*xi = x - xi*tau, xi -> xi
            worst = max(worst, (s.image("x") - GrassmannElement(2, {0: x, 0b11: -1.0})).max_abs())
            worst = max(worst, (s.image("xi") - GrassmannElement(2, {0b01: 1.0})).max_abs())
    crit = find_action_params(p.field)
    checks = check_action(p.field, [(0.0,), (1.5,)], [(0.2, -0.1), (0.35, 0.3), (-0.4, 0.1)])
    passing = all(c.criterion.is_action and c.strong.condition_holds and c.local.ok for c in checks)
    ok = worst <= 1e-10 and crit.is_action and crit.b == 0 and passing
    record(6, "homological field", ok, f"f drift {worst:.1e}, (a,b)=({crit.a},{crit.b}), checks pass={passing}")


# ---------------------------------------------------------------------------
# 7. holomorphic flows


HOL = SuperDomain(("w",), ("e1", "e2"), "complex")


def _hol_problem(with_odd: bool) -> FlowProblem:
    comp = [((), "w^2")] + ([(("e1", "e2"), "w^3")] if with_odd else [])
    return FlowProblem.identity(SuperVectorField.from_terms(HOL, {"w": comp}), 0j)


def _square_loop(center: complex, r: float) -> list[complex]:
    return [center + r, center + 1j * r, center - r, center - 1j * r]


def test_criterion_7_holomorphic():
    w = 0.5 + 0.2j
    timings = []
    err_h = err_k = 0.0
    for direction in (1.0, 1j, -0.6 + 0.8j):
        z_end = 0.8 * direction / w
        for with_odd in (False, True):
            t0 = time.perf_counter()
            res = integrate_along_path(_hol_problem(with_odd), (w,), [0j, z_end])
            timings.append(time.perf_counter() - t0)
            for s in np.linspace(0.0, 1.0, 11):
                z = res.z_at(0, float(s))
                f = res.system.layout.unpack(res.state_at(0, float(s)))["w"]
                err_h = max(err_h, abs(f.coefficient(0) - 1 / (1 / w - z)))
                if with_odd:
                    k = -w**2 * cmath.log(1 - z * w) / (1 - z * w) ** 2
                    err_k = max(err_k, abs(f.coefficient(0b11) - k))
    c = 1 / w
    t0 = time.perf_counter()
    loop = _square_loop(c, 0.5)
    m = monodromy(_hol_problem(True), (w,), loop)
    timings.append(time.perf_counter() - t0)
    zb = loop[0]
    expect = -2j * math.pi * w**2 / (1 - zb * w) ** 2
    err_m = abs(m.delta["w"].coefficient(0b11) - expect)
    body_m = abs(m.delta["w"].coefficient(0))
    t0 = time.perf_counter()
    far = monodromy(_hol_problem(True), (w,), _square_loop(0.3 - 0.1j, 0.2))
    timings.append(time.perf_counter() - t0)
    ok = (err_h <= 1e-8 and err_k <= 1e-7 and err_m <= 1e-6 and body_m <= 1e-6 and far.max_abs <= 1e-9
          and max(timings) < 5)
    record(7, "holomorphic flows and monodromy", ok,
           f"h err {err_h:.1e}, k err {err_k:.1e}, monodromy err {err_m:.1e}, "
           f"non-enclosing {far.max_abs:.1e}, slowest run {max(timings):.2f}s")


# ---------------------------------------------------------------------------
# 8. classical Riccati reduction


def test_criterion_8_riccati():
    p = load_corpus("riccati")
    y0 = 2.0
    # tighter rtol than the default for the 1e-8 trajectory bound
    res = integrate_flow(p.flow_problem(), (y0,), ODESettings(rtol=1e-11, atol=1e-13, t_min=0.0, t_max=1.0))
    err = max(abs(res.f_part(float(t))["y"].body - 1 / (1 / y0 - t)) for t in np.linspace(0, 0.45, 46))
    res_default = integrate_flow(p.flow_problem(), (y0,), ODESettings(t_min=0.0, t_max=1.0))
    hi = res_default.interval[1]
    ok = err <= 1e-8 and abs(hi - 0.5) <= 1e-3
    record(8, "Riccati reduction and interval endpoint", ok,
           f"trajectory err {err:.1e}, endpoint {hi:.6f} ({res_default.reasons[1]})")


# ---------------------------------------------------------------------------
# 9. determinism / restart composition


def test_criterion_9_restart():
    settings = ODESettings(t_min=-0.5, t_max=0.5)
    cases = [("susy", load_corpus("susy").field, (0.3,))]
    cases.append(("random R^1|2 seed 11", random_polynomial_field(SuperDomain(("x",), ("a", "b")), 11), (0.1,)))
    cases.append(("random R^2|2 seed 12",
                  random_polynomial_field(SuperDomain(("x", "y"), ("a", "b")), 12), (0.1, -0.2)))
    worst = 0.0
    for _, X, x in cases:
        res = integrate_flow(FlowProblem.identity(X), x, settings)
        for t1, t2 in ((0.1, 0.3), (0.25, -0.2), (-0.3, 0.05), (0.0, 0.4)):
            worst = max(worst, restart_deviation(res, t1, t2))
        again = integrate_flow(FlowProblem.identity(X), x, settings)
        worst = max(worst, float(np.max(np.abs(again.state(0.37) - res.state(0.37)))))
    record(9, "restart composition and determinism", worst <= 1e-8, f"max deviation {worst:.1e}")


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
