import cmath
import math

import pytest

from superflow.flow import FlowProblem, ODESettings, integrate_along_path, integrate_flow, monodromy
from superflow.supergeometry import SuperDomain, SuperVectorField

C12 = SuperDomain(("w",), ("e1", "e2"), "complex")


def problem(spec):
    return FlowProblem.identity(SuperVectorField.from_terms(C12, {"w": spec}), 0j)


MOBIUS = [((), "w^2")]
WITH_ODD = [((), "w^2"), (("e1", "e2"), "w^3")]


def square(center, r):
    return [center + r, center + 1j * r, center - r, center - 1j * r]


@pytest.mark.parametrize("w", [0.5 + 0.2j, -0.3 + 0.6j, 1.1 - 0.4j])
def test_polyline_endpoint_matches_closed_form(w):
    z_end = 0.7 * (1 + 0.5j) / w / abs(1 + 0.5j)
    res = integrate_along_path(problem(WITH_ODD), (w,), [0j, z_end * 0.5 + 0.1j / w * 0.3, z_end])
    f = res.f_end()["w"]
    assert abs(f.coefficient(0) - 1 / (1 / w - z_end)) <= 1e-8
    k = -w**2 * cmath.log(1 - z_end * w) / (1 - z_end * w) ** 2
    assert abs(f.coefficient(0b11) - k) <= 1e-7


def test_homotopic_paths_agree():
    w = 0.5 + 0.2j
    end = 0.6 / w
    p1 = integrate_along_path(problem(WITH_ODD), (w,), [0j, end])
    p2 = integrate_along_path(problem(WITH_ODD), (w,), [0j, 0.3 / w + 0.2j, end])
    p3 = integrate_along_path(problem(WITH_ODD), (w,), [0j, 0.1 - 0.3j, 0.4 / w - 0.1j, end])
    for other in (p2, p3):
        assert (p1.f_end()["w"] - other.f_end()["w"]).max_abs() <= 1e-7


def test_translation_field_has_no_monodromy():
    m = monodromy(problem([((), "1")]), (0.3 + 0.1j,), square(1 + 1j, 0.7))
    assert m.max_abs <= 1e-12


def test_mobius_flow_is_single_valued_around_pole():
    w = 0.5 + 0.2j
    m = monodromy(problem(MOBIUS), (w,), square(1 / w, 0.5))
    assert m.max_abs <= 1e-6


def test_odd_coefficient_jumps_by_residue():
    w = 0.5 + 0.2j
    loop = square(1 / w, 0.5)
    m = monodromy(problem(WITH_ODD), (w,), loop)
    expect = -2j * math.pi * w**2 / (1 - loop[0] * w) ** 2
    assert abs(m.delta["w"].coefficient(0b11) - expect) <= 1e-6
    assert abs(m.delta["w"].coefficient(0)) <= 1e-6
    # traversing the loop the other way flips the sign
    back = monodromy(problem(WITH_ODD), (w,), loop[::-1][-1:] + loop[::-1][:-1])
    assert abs(back.delta["w"].coefficient(0b11) + expect) <= 1e-6


def test_non_enclosing_loop_has_no_monodromy():
    w = 0.5 + 0.2j
    m = monodromy(problem(WITH_ODD), (w,), square(0.2 - 0.2j, 0.3))
    assert m.max_abs <= 1e-9


def test_real_problem_rejected():
    X = SuperVectorField.from_terms(SuperDomain(("x",), ()), {"x": [((), "x")]})
    with pytest.raises(ValueError):
        integrate_along_path(FlowProblem.identity(X), (1.0,), [0, 1])
    with pytest.raises(ValueError):
        monodromy(problem(MOBIUS), (0.5,), [1, 2])
