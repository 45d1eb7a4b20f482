"""Problem files: a JSON document describing a chart, a field and an initial morphism.

Example::

    {
      "name": "example",
      "domain": {"even": ["x"], "odd": ["xi"], "mode": "real", "box": [[-5, 5]]},
      "field": {"x":  [{"monomial": [], "coefficient": "1"},
                       {"monomial": ["xi"], "coefficient": "1"}],
                "xi": [{"monomial": [], "coefficient": "1"}]},
      "t0": 0,
      "grid": [[0.0], [0.5]],
      "times": [0.0, 0.25, 0.5]
    }

``source`` and ``initial`` are optional (default: identity on ``domain``).
Complex scalars are written as ``[re, im]``.  ``fields`` may hold further
named fields on the same domain (used by the ``bracket`` command).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .expr import ExprError, parse
from .flow import FlowProblem, ODESettings
from .grassmann import GrassmannElement, positions
from .supergeometry import MorphismData, ParityError, SuperDomain, SuperVectorField, superfunction


class ProblemError(ValueError):
    """The problem file is malformed or inconsistent."""


_SETTINGS_KEYS = {"rtol", "atol", "max_step", "max_steps", "margin", "t_min", "t_max", "blowup", "min_step_factor"}


def scalar_from_json(v: Any) -> float | complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ProblemError(f"complex scalars are [re, im] pairs, got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ProblemError(f"expected a number, got {v!r}")
    return v


def scalar_to_json(v: Any) -> Any:
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _domain_from_json(d: dict) -> SuperDomain:
    try:
        box = d.get("box")
        if box is not None:
            box = [(None if lo is None else float(lo), None if hi is None else float(hi)) for lo, hi in box]
        return SuperDomain(tuple(d.get("even", ())), tuple(d.get("odd", ())), d.get("mode", "real"), box)
    except (TypeError, ValueError, KeyError) as exc:
        raise ProblemError(f"bad domain declaration: {exc}") from exc


def _domain_to_json(D: SuperDomain) -> dict:
    out = {"even": list(D.even), "odd": list(D.odd), "mode": D.mode}
    if D.box is not None:
        out["box"] = [list(b) for b in D.box]
    return out


def _terms_from_json(domain: SuperDomain, spec: list, what: str) -> GrassmannElement:
    if not isinstance(spec, list):
        raise ProblemError(f"{what}: expected a list of terms")
    terms = []
    for item in spec:
        try:
            names = list(item.get("monomial", []))
            coeff = parse(str(item["coefficient"]))
        except ExprError as exc:
            raise ProblemError(f"{what}: {exc}") from exc
        except (KeyError, AttributeError, TypeError) as exc:
            raise ProblemError(f"{what}: each term needs 'monomial' and 'coefficient'") from exc
        extra = coeff.variables() - set(domain.even)
        if extra:
            raise ProblemError(f"{what}: undeclared variables {sorted(extra)}")
        for nm in names:
            if nm not in domain.odd:
                raise ProblemError(f"{what}: unknown odd coordinate {nm!r}")
        terms.append((names, coeff))
    return superfunction(domain, terms)


def _terms_to_json(domain: SuperDomain, u: GrassmannElement) -> list:
    out = []
    for m, c in u.items():
        out.append({"monomial": [domain.odd[p - 1] for p in positions(m)], "coefficient": str(c)})
    return out


def _field_from_json(domain: SuperDomain, spec: dict, what: str) -> SuperVectorField:
    if not isinstance(spec, dict):
        raise ProblemError(f"{what}: expected an object keyed by coordinate")
    comps = {}
    for name, terms in spec.items():
        if name not in domain.coords:
            raise ProblemError(f"{what}: unknown coordinate {name!r}")
        comps[name] = _terms_from_json(domain, terms, f"{what}.{name}")
    return SuperVectorField(domain, comps)


def _field_to_json(X: SuperVectorField) -> dict:
    return {name: _terms_to_json(X.domain, X.component(name)) for name in X.domain.coords
            if name in X.components}


@dataclass
class Problem:
    name: str
    domain: SuperDomain
    field: SuperVectorField
    source: SuperDomain
    initial: MorphismData
    t0: float | complex = 0.0
    settings: ODESettings = field(default_factory=ODESettings)
    grid: list[tuple] = field(default_factory=list)
    times: list[float] = field(default_factory=list)
    path: list[complex] = field(default_factory=list)
    loop: list[complex] = field(default_factory=list)
    fields: dict[str, SuperVectorField] = field(default_factory=dict)
    identity_initial: bool = True
    settings_overrides: dict = field(default_factory=dict)

    def flow_problem(self) -> FlowProblem:
        return FlowProblem(self.field, self.initial, self.t0)

    def named_field(self, name: str) -> SuperVectorField:
        from .supergeometry import parity_split

        if name in self.fields:
            return self.fields[name]
        X0, X1 = parity_split(self.field)
        builtin = {"X": self.field, "X0": X0, "X1": X1}
        if name in builtin:
            return builtin[name]
        raise ProblemError(f"unknown field {name!r}; available: {sorted(set(builtin) | set(self.fields))}")

    def default_grid(self) -> list[tuple]:
        if self.grid:
            return self.grid
        return [tuple(0.0 for _ in self.source.even)]

    def to_json(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "domain": _domain_to_json(self.domain),
                               "field": _field_to_json(self.field)}
        if not self.identity_initial:
            out["source"] = _domain_to_json(self.source)
            out["initial"] = {k: _terms_to_json(self.source, v) for k, v in self.initial.images.items()}
        out["t0"] = scalar_to_json(self.t0)
        if self.settings_overrides:
            out["settings"] = dict(self.settings_overrides)
        if self.grid:
            out["grid"] = [[scalar_to_json(v) for v in p] for p in self.grid]
        if self.times:
            out["times"] = list(self.times)
        if self.path:
            out["path"] = [scalar_to_json(z) for z in self.path]
        if self.loop:
            out["loop"] = [scalar_to_json(z) for z in self.loop]
        if self.fields:
            out["fields"] = {k: _field_to_json(v) for k, v in self.fields.items()}
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps() + "\n")


def problem_from_json(data: dict) -> Problem:
    if not isinstance(data, dict):
        raise ProblemError("a problem file must be a JSON object")
    if "domain" not in data or "field" not in data:
        raise ProblemError("a problem needs 'domain' and 'field'")
    domain = _domain_from_json(data["domain"])
    try:
        X = _field_from_json(domain, data["field"], "field")
        identity = "initial" not in data
        if identity:
            source = domain
            initial = MorphismData.identity(domain)
        else:
            source = _domain_from_json(data.get("source", data["domain"]))
            spec = data["initial"]
            images = {}
            for name in domain.coords:
                if name not in spec:
                    raise ProblemError(f"initial: missing coordinate {name!r}")
                images[name] = _terms_from_json(source, spec[name], f"initial.{name}")
            initial = MorphismData(source, domain, images)
    except (ParityError, KeyError) as exc:
        raise ProblemError(str(exc)) from exc
    t0 = scalar_from_json(data.get("z0", data.get("t0", 0.0)))
    if domain.complex_mode:
        t0 = complex(t0)
    elif isinstance(t0, complex):
        raise ProblemError("a complex t0 needs mode 'complex'")
    overrides = dict(data.get("settings", {}))
    unknown = set(overrides) - _SETTINGS_KEYS
    if unknown:
        raise ProblemError(f"unknown settings {sorted(unknown)}")
    try:
        settings = ODESettings(**{k: (math.inf if v is None else v) for k, v in overrides.items()})
    except (TypeError, ValueError) as exc:
        raise ProblemError(f"bad settings: {exc}") from exc
    grid = [tuple(scalar_from_json(v) for v in p) for p in data.get("grid", [])]
    for p in grid:
        if len(p) != len(source.even):
            raise ProblemError(f"grid point {p} has the wrong dimension")
    fields = {k: _field_from_json(domain, v, f"fields.{k}") for k, v in data.get("fields", {}).items()}
    return Problem(
        name=str(data.get("name", "problem")),
        domain=domain,
        field=X,
        source=source,
        initial=initial,
        t0=t0,
        settings=settings,
        grid=grid,
        times=[float(t) for t in data.get("times", [])],
        path=[complex(scalar_from_json(z)) for z in data.get("path", [])],
        loop=[complex(scalar_from_json(z)) for z in data.get("loop", [])],
        fields=fields,
        identity_initial=identity,
        settings_overrides=overrides,
    )


def loads(text: str) -> Problem:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"invalid JSON: {exc}") from exc
    return problem_from_json(data)


def load(path: str | Path) -> Problem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def corpus_dir() -> Path:
    return Path(__file__).parent / "corpus"


def load_corpus(name: str) -> Problem:
    return load(corpus_dir() / f"{name}.json")


def corpus_names() -> list[str]:
    return sorted(p.stem for p in corpus_dir().glob("*.json"))
