import csv
import io
import json
import math
import subprocess
import sys

import pytest

from superflow.cli import CSV_HEADER, main, parse_grid, parse_polyline, parse_times


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def drop_timing(report):
    report = dict(report)
    report.pop("timing", None)
    return report


def test_argument_helpers():
    assert parse_grid("0.1,0.2;0.3,0.4") == [(0.1, 0.2), (0.3, 0.4)]
    assert parse_grid("1+2j") == [(1 + 2j,)]
    assert parse_times("0:1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_times("0.1, 0.2") == [0.1, 0.2]
    assert parse_polyline("0,0; 1,-1; 2-0.5j") == [0, 1 - 1j, 2 - 0.5j]


def test_integrate_susy_table(capsys):
    code, out, _ = run(capsys, "integrate", "--problem", "corpus:susy", "--grid", "0.5", "--times", "0.25,1")
    assert code == 0
    assert out.splitlines()[0] == ",".join(CSV_HEADER)
    table = rows(out)
    for t in (0.25, 1.0):
        sel = {(r["coordinate"], r["monomial"], r["part"]): float(r["value"]) for r in table if float(r["t"]) == t}
        assert abs(sel[("x", "1", "f")] - (0.5 + t)) <= 1e-9
        assert abs(sel[("x", "xi", "g")] - 1) <= 1e-12
        assert abs(sel[("xi", "1", "g")] - 1) <= 1e-12


def test_integrate_riccati_endpoint(capsys):
    code, out, _ = run(capsys, "integrate", "--problem", "corpus:riccati", "--grid", "2", "--times", "0.1")
    assert code == 0
    (row,) = rows(out)
    assert abs(float(row["t_hi"]) - 0.5) <= 1e-3


def test_sample_past_blowup_is_a_numeric_failure(capsys):
    code, out, _ = run(capsys, "integrate", "--problem", "corpus:riccati", "--grid", "2", "--times", "0.6",
                       "--format", "json")
    assert code == 3
    assert "outside" in json.loads(out)["fibers"][0]["samples"][0]["error"]


def test_zero_field_runs_to_t_max(capsys):
    code, out, _ = run(capsys, "integrate", "--problem", "corpus:zero", "--format", "json")
    assert code == 0
    fiber = json.loads(out)["fibers"][0]
    assert fiber["interval"] == [-3, 3] and fiber["reasons"] == ["reached_t_min", "reached_t_max"]


def test_integrate_json_is_deterministic(tmp_path, capsys):
    target = tmp_path / "r.json"
    reports = []
    for _ in range(2):
        assert main(["integrate", "--problem", "corpus:nonintegrable", "--format", "json", "--jobs", "2",
                     "--out", str(target)]) == 0
        reports.append(json.loads(target.read_text()))
    ra, rb = reports
    assert drop_timing(ra) == drop_timing(rb)
    assert [f["x"] for f in ra["fibers"]] == [[0.0], [0.7]]


def test_complex_integrate(capsys):
    code, out, _ = run(capsys, "integrate", "--problem", "corpus:holomorphic")
    assert code == 0
    last = [r for r in rows(out) if r["monomial"] == "1" and r["coordinate"] == "w"][-1]
    z, w = 1.2 - 0.5j, 0.5 + 0.2j
    assert abs(complex(float(last["value"]), float(last["value_imag"])) - 1 / (1 / w - z)) <= 1e-8


def test_check_action_susy(capsys):
    code, out, _ = run(capsys, "check-action", "--problem", "corpus:susy")
    rep = json.loads(out)
    assert code == 0 and rep["criterion"]["status"] == "action"
    assert (rep["criterion"]["a"], rep["criterion"]["b"]) == (1, 0)
    assert all(f["condition_holds"] and f["local_action_holds"] for f in rep["fibers"])


def test_check_action_nonintegrable(capsys):
    code, out, _ = run(capsys, "check-action", "--problem", "corpus:nonintegrable")
    rep = json.loads(out)
    assert code == 0 and rep["criterion"]["status"] == "no_action" and rep["consistent"]
    assert all(f["identity_residual"] <= 1e-8 and f["residual_norm"] > 0.1 for f in rep["fibers"])


def test_check_action_even(capsys):
    code, out, _ = run(capsys, "check-action", "--problem", "corpus:even")
    rep = json.loads(out)
    assert code == 0 and (rep["criterion"]["a"], rep["criterion"]["b"]) == (0, 0)


def test_check_action_seed_is_reproducible(capsys):
    _, out1, _ = run(capsys, "check-action", "--problem", "corpus:susy", "--seed", "5")
    _, out2, _ = run(capsys, "check-action", "--problem", "corpus:susy", "--seed", "5")
    _, out3, _ = run(capsys, "check-action", "--problem", "corpus:susy", "--seed", "6")
    r1, r2, r3 = (drop_timing(json.loads(o)) for o in (out1, out2, out3))
    assert r1 == r2 and r1["pairs"] != r3["pairs"]


def test_bracket(capsys):
    code, out, _ = run(capsys, "bracket", "--problem", "corpus:susy", "--fields", "X1", "X1")
    assert code == 0 and json.loads(out)["text"] == "(2)*d/dx"
    code, out, _ = run(capsys, "bracket", "--problem", "corpus:even", "--fields", "X", "X")
    assert code == 0 and json.loads(out)["bracket"] == {}
    code, _, err = run(capsys, "bracket", "--problem", "corpus:even", "--fields", "X", "Nope")
    assert code == 2 and "unknown field" in err


def test_monodromy(capsys):
    code, out, _ = run(capsys, "monodromy", "--problem", "corpus:holomorphic")
    rep = json.loads(out)
    assert code == 0
    re_, im = rep["fibers"][0]["delta_f"]["w"]["e1*e2"]
    w = 0.5 + 0.2j
    zb = complex(*rep["fibers"][0]["loop"][0])
    expect = -2j * math.pi * w**2 / (1 - zb * w) ** 2
    assert abs(complex(re_, im) - expect) <= 1e-6


def test_monodromy_of_translation_field(tmp_path, capsys):
    problem = {"domain": {"even": ["w"], "odd": [], "mode": "complex"},
               "field": {"w": [{"monomial": [], "coefficient": "1"}]}, "grid": [[[0.2, 0.1]]]}
    path = tmp_path / "d.json"
    path.write_text(json.dumps(problem))
    code, out, _ = run(capsys, "monodromy", "--problem", str(path), "--loop", "1,0;0,1;-1,0;0,-1")
    assert code == 0 and json.loads(out)["fibers"][0]["max_abs"] <= 1e-12


def test_oracle_commands(capsys):
    code, out, _ = run(capsys, "oracle", "--problem", "corpus:susy", "--tol", "1e-12")
    assert code == 0 and json.loads(out)["max_deviation"] <= 1e-12
    code, out, _ = run(capsys, "oracle", "--random", "2", "--seed", "3")
    assert code == 0 and json.loads(out)["max_deviation"] <= 1e-6
    code, _, _ = run(capsys, "oracle", "--random", "1", "--tol", "1e-30")
    assert code == 4


def test_oracle_linear_field(tmp_path, capsys):
    problem = {"domain": {"even": ["x"], "odd": ["xi"]}, "field": {"x": [{"monomial": [], "coefficient": "x"}]},
               "grid": [[0.8]]}
    path = tmp_path / "lin.json"
    path.write_text(json.dumps(problem))
    code, out, _ = run(capsys, "oracle", "--problem", str(path), "--times=-0.5:0.5:5", "--tol", "1e-9")
    assert code == 0


@pytest.mark.parametrize("argv", [
    ["integrate"],
    ["integrate", "--problem", "/does/not/exist.json"],
    ["integrate", "--problem", "corpus:susy", "--grid", "a,b"],
    ["integrate", "--problem", "corpus:susy", "--times", "0:1"],
    ["monodromy", "--problem", "corpus:susy"],
    ["check-action", "--problem", "corpus:holomorphic"],
    ["frobnicate"],
])
def test_input_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_bad_problem_file_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"domain": {"even": ["x"], "odd": []}, "field": {"x": [{"monomial": [], "coefficient": "2*("}]}}')
    assert main(["integrate", "--problem", str(path)]) == 2


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0 and out.count("PASS") == 6


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "superflow.cli", "bracket", "--problem", "corpus:nonintegrable",
                           "--fields", "X1", "X1"], capture_output=True, text=True)
    assert proc.returncode == 0 and "d/dx" in proc.stdout
