"""Command line front end.

Exit codes: 0 success, 2 parse/validation error, 3 numerical failure,
4 check failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Sequence

import numpy as np

from . import __version__
from .action import check_action, find_action_params
from .expr import ExprError
from .flow import FlowError, ODESettings, integrate_along_path, integrate_flow, monodromy
from .grassmann import positions
from .oracle import lie_series_oracle, oracle_deviation, random_polynomial_field
from .problem import Problem, ProblemError, corpus_names, load, load_corpus
from .supergeometry import SuperDomain, super_bracket

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4

CSV_HEADER = ["x", "t", "coordinate", "monomial", "part", "value", "value_imag", "t_lo", "t_hi"]


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def parse_scalar(text: str) -> float | complex:
    text = text.strip().replace(" ", "")
    try:
        if "j" in text:
            return complex(text)
        return float(text)
    except ValueError as exc:
        raise UsageError(f"not a number: {text!r}") from exc


def parse_grid(spec: str) -> list[tuple]:
    """``"0.1,0.2;0.3,0.4"``: points separated by ``;``, coordinates by ``,``."""
    pts = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if chunk == "":
            pts.append(())
            continue
        pts.append(tuple(parse_scalar(v) for v in chunk.split(",")))
    return pts


def parse_times(spec: str) -> list[float]:
    """Comma list, or ``start:stop:count`` for an evenly spaced grid."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise UsageError("time ranges are start:stop:count")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        return [float(v) for v in np.linspace(a, b, n)]
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad time list {spec!r}") from exc


def parse_polyline(spec: str) -> list[complex]:
    """Points separated by ``;``; each is ``re,im`` or a Python complex literal like ``1-2j``."""
    out = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "," in chunk:
            re_, im = chunk.split(",")
            out.append(complex(float(re_), float(im)))
        else:
            out.append(complex(parse_scalar(chunk)))
    if not out:
        raise UsageError("empty polyline")
    return out


def _jsonable(v: Any) -> Any:
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _element_json(domain_odd: Sequence[str], u) -> dict:
    out = {}
    for m, c in u.items():
        key = "*".join(domain_odd[p - 1] for p in positions(m)) or "1"
        out[key] = _jsonable(c)
    return out


def _mono_name(odd: Sequence[str], m: int) -> str:
    return "*".join(odd[p - 1] for p in positions(m)) or "1"


def _settings(problem: Problem, args) -> ODESettings:
    s = problem.settings
    if getattr(args, "tol", None) is not None and args.command == "integrate":
        s = s.replace(rtol=args.tol)
    return s


def _emit(args, report: dict, rows: list[list] | None = None) -> None:
    fmt = getattr(args, "format", "json")
    if fmt == "csv" and rows is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        w.writerows(rows)
        text = buf.getvalue()
    else:
        text = json.dumps(report, indent=2, sort_keys=False, default=_jsonable) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_problem(args) -> Problem:
    if args.problem is None:
        raise UsageError("--problem is required")
    if args.problem.startswith("corpus:"):
        return load_corpus(args.problem.split(":", 1)[1])
    return load(args.problem)


def _base_report(args, problem: Problem | None, settings: ODESettings | None) -> dict:
    rep: dict[str, Any] = {"command": args.command, "argv": getattr(args, "argv", None)}
    if problem is not None:
        rep["problem"] = problem.name
    if settings is not None:
        rep["settings"] = {k: _jsonable(v) for k, v in settings.__dict__.items()}
    return rep


def _run_fibers(fn, grid: Sequence[tuple], jobs: int) -> list:
    """``fn(x)`` per grid point, in grid order; exceptions are returned, not raised."""

    def safe(x):
        try:
            return fn(x)
        except FlowError as exc:
            return exc

    if jobs <= 1 or len(grid) <= 1:
        return [safe(x) for x in grid]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(safe, grid))


def _fmt_point(x: Sequence[Any]) -> str:
    return ";".join(repr(v) if not isinstance(v, complex) else f"{v.real!r}{v.imag:+}j" for v in x)


# ---------------------------------------------------------------------------
# commands


def cmd_integrate(args) -> int:
    problem = _load_problem(args)
    settings = _settings(problem, args)
    grid = parse_grid(args.grid) if args.grid else problem.default_grid()
    rep = _base_report(args, problem, settings)
    rows: list[list] = []
    fibers = []
    status = EXIT_OK
    t_start = time.perf_counter()
    odd = problem.source.odd
    fp = problem.flow_problem()
    if problem.domain.complex_mode:
        path = parse_polyline(args.path) if args.path else problem.path
        if not path:
            raise UsageError("complex problems need --path")
        runs = _run_fibers(lambda x: integrate_along_path(fp, x, path, settings), grid, args.jobs)
        for x, res in zip(grid, runs):
            if isinstance(res, FlowError):
                fibers.append({"x": list(x), "error": str(res)})
                status = EXIT_NUMERIC
                continue
            samples = []
            ys = [res.y_start] + [seg.outcome.y_last for seg in res.segments]
            zs = [res.path[0]] + [seg.end for seg in res.segments]
            for z, y in zip(zs, ys):
                f = res.system.layout.unpack(y)
                g = res.system.odd(y)
                samples.append({"z": z, "f": {k: _element_json(odd, v) for k, v in f.items()},
                                "g": {k: _element_json(odd, v) for k, v in g.items()}})
                for part, data in (("f", f), ("g", g)):
                    for name in problem.domain.coords:
                        for m, c in data[name].items():
                            c = complex(c)
                            rows.append([_fmt_point(x), f"{z.real!r}{z.imag:+}j", name, _mono_name(odd, m), part,
                                         repr(c.real), repr(c.imag), "", ""])
            fibers.append({"x": list(x), "path": path, "samples": samples})
    else:
        times = parse_times(args.times) if args.times else (problem.times or [problem.t0])
        runs = _run_fibers(lambda x: integrate_flow(fp, x, settings), grid, args.jobs)
        for x, res in zip(grid, runs):
            if isinstance(res, FlowError):
                fibers.append({"x": list(x), "error": str(res)})
                status = EXIT_NUMERIC
                continue
            lo, hi = res.interval
            samples = []
            for t in times:
                if not res.contains(t):
                    samples.append({"t": t, "error": "outside the computed interval"})
                    status = EXIT_NUMERIC
                    continue
                s = res.sample(t)
                samples.append({"t": t, "f": {k: _element_json(odd, v) for k, v in s.f.items()},
                                "g": {k: _element_json(odd, v) for k, v in s.g.items()}})
                for part, data in (("f", s.f), ("g", s.g)):
                    for name in problem.domain.coords:
                        for m, c in data[name].items():
                            rows.append([_fmt_point(x), repr(t), name, _mono_name(odd, m), part, repr(float(c)),
                                         "0.0", repr(lo), repr(hi)])
            fibers.append({"x": list(x), "interval": [lo, hi], "reasons": list(res.reasons), "samples": samples})
    rep["fibers"] = fibers
    rep["timing"] = {"seconds": time.perf_counter() - t_start}
    _emit(args, rep, rows)
    return status


def cmd_check_action(args) -> int:
    problem = _load_problem(args)
    if problem.domain.complex_mode:
        raise UsageError("check-action works on real problems")
    if not problem.identity_initial or problem.t0 != 0:
        raise UsageError("check-action needs the identity initial condition at t0 = 0")
    rng = np.random.default_rng(args.seed)
    n_pairs = args.pairs
    pairs = [(float(a), float(b)) for a, b in rng.uniform(-0.4, 0.4, size=(n_pairs, 2))]
    grid = parse_grid(args.grid) if args.grid else problem.default_grid()
    tol = args.tol if args.tol is not None else 1e-8
    t_start = time.perf_counter()
    checks = check_action(problem.field, grid, pairs, tol, problem.settings)
    crit = checks[0].criterion if checks else find_action_params(problem.field)
    rep = _base_report(args, problem, problem.settings)
    rep["criterion"] = crit.to_dict()
    rep["pairs"] = pairs
    rep["fibers"] = []
    consistent = True
    for x, c in zip(grid, checks):
        rep["fibers"].append({
            "x": list(x),
            "params": list(c.strong.params),
            "identity_residual": c.strong.identity_residual,
            "residual_norm": c.strong.residual_norm,
            "condition_holds": c.strong.condition_holds,
            "local_action_difference": c.local.max_difference,
            "local_action_holds": c.local.ok,
            "consistent": c.consistent,
        })
        consistent = consistent and c.consistent
    rep["consistent"] = consistent
    rep["timing"] = {"seconds": time.perf_counter() - t_start}
    _emit(args, rep)
    return EXIT_OK if consistent else EXIT_CHECK


def cmd_bracket(args) -> int:
    problem = _load_problem(args)
    names = args.fields or ["X1", "X1"]
    if len(names) != 2:
        raise UsageError("--fields takes exactly two names")
    X, Y = problem.named_field(names[0]), problem.named_field(names[1])
    B = super_bracket(X, Y)
    rep = _base_report(args, problem, None)
    rep["fields"] = names
    rep["bracket"] = {name: {_mono_name(B.domain.odd, m): str(c) for m, c in B.component(name).items()}
                      for name in B.domain.coords if name in B.components}
    rep["text"] = B.format()
    _emit(args, rep)
    return EXIT_OK


def cmd_monodromy(args) -> int:
    problem = _load_problem(args)
    if not problem.domain.complex_mode:
        raise UsageError("monodromy needs a complex-mode problem")
    loop = parse_polyline(args.loop) if args.loop else problem.loop
    if not loop:
        raise UsageError("monodromy needs --loop")
    grid = parse_grid(args.grid) if args.grid else problem.default_grid()
    settings = _settings(problem, args)
    rep = _base_report(args, problem, settings)
    fibers = []
    status = EXIT_OK
    odd = problem.source.odd
    fp = problem.flow_problem()
    runs = _run_fibers(lambda x: monodromy(fp, x, loop, settings), grid, args.jobs)
    for x, m in zip(grid, runs):
        if isinstance(m, FlowError):
            fibers.append({"x": list(x), "error": str(m)})
            status = EXIT_NUMERIC
            continue
        fibers.append({
            "x": list(x),
            "loop": m.loop,
            "delta_f": {k: _element_json(odd, v) for k, v in m.delta.items()},
            "delta_g": {k: _element_json(odd, v) for k, v in m.delta_g.items()},
            "max_abs": m.max_abs,
        })
    rep["fibers"] = fibers
    _emit(args, rep)
    return status


def cmd_oracle(args) -> int:
    order = args.order
    times = parse_times(args.times) if args.times else [float(v) for v in np.linspace(-0.3, 0.3, 7)]
    tol = args.tol if args.tol is not None else 1e-6
    cases = []
    if args.random:
        rng = np.random.default_rng(args.seed)
        domains = [SuperDomain(("x",), ("a", "b")), SuperDomain(("x", "y"), ("a", "b"))]
        for k in range(args.random):
            D = domains[k % 2]
            cases.append((f"random[{k}] on R^{len(D.even)}|{len(D.odd)}", random_polynomial_field(D, rng),
                          tuple(0.0 for _ in D.even), ODESettings()))
        problem = None
    else:
        problem = _load_problem(args)
        if not problem.identity_initial or problem.t0 != 0 or problem.domain.complex_mode:
            raise UsageError("the oracle needs a real problem with identity initial condition at t0 = 0")
        grid = parse_grid(args.grid) if args.grid else problem.default_grid()
        cases = [(f"{problem.name} at {x}", problem.field, x, problem.settings) for x in grid]
    rep = _base_report(args, problem, None)
    rep["order"] = order
    rep["times"] = times
    rows = []
    worst = 0.0
    for label, X, x, settings in cases:
        series = lie_series_oracle(X, order)
        dev = oracle_deviation(X, x, times, order, settings, series)
        rows.append({"case": label, "x": list(x), "deviation": dev})
        worst = max(worst, dev)
    rep["cases"] = rows
    rep["max_deviation"] = worst
    rep["tol"] = tol
    rep["ok"] = worst <= tol
    _emit(args, rep)
    return EXIT_OK if worst <= tol else EXIT_CHECK


def _selftest_checks() -> list[tuple[str, bool, str]]:
    out = []
    susy = load_corpus("susy")
    crit = find_action_params(susy.field)
    out.append(("susy criterion (1, 0)", crit.is_action and (crit.a, crit.b) == (1, 0), str(crit.to_dict())))
    c = check_action(susy.field, [(0.3,)], [(0.2, -0.1), (0.35, 0.3)])[0]
    out.append(("susy three-way agreement", c.consistent and c.local.ok,
                f"local={c.local.max_difference:.2e}"))
    nonintegrable = load_corpus("nonintegrable")
    c = check_action(nonintegrable.field, [(0.0,)], [(0.2, -0.1), (0.35, 0.3)])[0]
    out.append(("nonintegrable no_action", not c.criterion.is_action and c.consistent,
                f"|F*(R)|={c.strong.residual_norm:.3f}"))
    hom = load_corpus("homological")
    crit = find_action_params(hom.field)
    out.append(("homological (0, 0)", crit.is_action and crit.b == 0, str(crit.notes)))
    ric = load_corpus("riccati")
    res = integrate_flow(ric.flow_problem(), (2.0,), ric.settings)
    out.append(("riccati endpoint", abs(res.interval[1] - 0.5) <= 1e-3, f"t_hi={res.interval[1]:.9f}"))
    hol = load_corpus("holomorphic")
    w = hol.grid[0][0]
    m = monodromy(hol.flow_problem(), (w,), hol.loop)
    zb = hol.loop[0]
    expect = -2j * math.pi * w**2 / (1 - zb * w) ** 2
    got = m.delta["w"].coefficient(0b11)
    out.append(("holomorphic monodromy", abs(got - expect) <= 1e-6, f"|err|={abs(got - expect):.2e}"))
    return out


def cmd_selftest(args) -> int:
    rows = _selftest_checks()
    ok = all(r[1] for r in rows)
    if args.format == "json" or args.out:
        rep = _base_report(args, None, None)
        rep["checks"] = [{"name": n, "ok": k, "detail": d} for n, k, d in rows]
        rep["corpus"] = corpus_names()
        rep["ok"] = ok
        _emit(args, rep)
    else:
        for name, k, detail in rows:
            print(f"{'PASS' if k else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superflow", description="Flows of super vector fields and supergroup actions.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=("json",)):
        sp.add_argument("--problem", help="problem file (JSON) or corpus:<name>")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("csv", "json"), default=fmt[0])
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--jobs", type=int, default=1, help="fibers integrated in parallel")

    sp = sub.add_parser("integrate", help="integrate the flow on a grid of base points")
    common(sp, ("csv",))
    sp.add_argument("--grid", help="base points, e.g. '0.1;0.5' or '0,1;2,3'")
    sp.add_argument("--times", help="sample times: comma list or start:stop:count")
    sp.add_argument("--path", help="complex polyline from z0, e.g. '0,0;0.8,-0.3'")
    sp.set_defaults(func=cmd_integrate)

    sp = sub.add_parser("check-action", help="decide whether the flow is a local supergroup action")
    common(sp)
    sp.add_argument("--grid")
    sp.add_argument("--pairs", type=int, default=10, help="number of seeded (t1, t2) pairs")
    sp.set_defaults(func=cmd_check_action)

    sp = sub.add_parser("bracket", help="super Lie bracket of two fields")
    common(sp)
    sp.add_argument("--fields", nargs=2, metavar="NAME", help="field names (X, X0, X1 or from 'fields')")
    sp.set_defaults(func=cmd_bracket)

    sp = sub.add_parser("monodromy", help="coefficient change around a closed loop")
    common(sp)
    sp.add_argument("--grid")
    sp.add_argument("--loop", help="closed complex polyline, e.g. '2,0;1,1;0,0;1,-1'")
    sp.set_defaults(func=cmd_monodromy)

    sp = sub.add_parser("oracle", help="compare the integrator with the Lie series")
    common(sp)
    sp.add_argument("--grid")
    sp.add_argument("--order", type=int, default=12)
    sp.add_argument("--times")
    sp.add_argument("--random", type=int, default=0, help="use N seeded random polynomial fields instead")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("selftest", help="run the built-in corpus checks")
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    args.argv = argv
    try:
        return args.func(args)
    except (ProblemError, UsageError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FlowError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
