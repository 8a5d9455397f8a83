import csv
import json

import pytest

from tetralfa.cli import build_smoother, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_analyze_four_color(capsys):
    code, out, _ = run(capsys, "analyze", "--smoother", "four-color", "--nu", "1,1")
    assert code == 0
    rep = json.loads(out)
    assert rep["factor"] == pytest.approx(0.195, abs=0.02)
    assert rep["manifest"]["command"] == "analyze"
    assert rep["manifest"]["geometry"] == "catalog:regular"


def test_analyze_zero_damping_smoothing(capsys):
    code, out, _ = run(capsys, "analyze", "--mode", "smoothing", "--smoother", "jacobi",
                       "--omega", "0", "--resolution", "8")
    assert code == 0 and json.loads(out)["factor"] == 1.0


def test_analyze_wedge_line_smoother_picks_short_edge(capsys):
    code, out, _ = run(capsys, "analyze", "--geometry", "catalog:wedge",
                       "--smoother", "zebra-line", "--resolution", "16")
    rep = json.loads(out)
    assert code == 0 and rep["smoother"]["axis"] == 0
    assert rep["factor"] == pytest.approx(0.122, abs=0.02)


@pytest.mark.parametrize("argv", [
    ["analyze", "--smoother", "four-color", "--omega", "1,1,1"],
    ["analyze", "--smoother", "zebra-line", "--axis", "4"],
    ["analyze", "--smoother", "jacobi", "--axis", "1"],
    ["analyze", "--smoother", "jacobi", "--omega", "2.5"],
    ["analyze", "--smoother", "alternating-line", "--axis", "1"],
    ["analyze", "--geometry", "catalog:octahedron"],
    ["analyze", "--resolution", "7"],
    ["analyze", "--nu", "0,0"],
    ["analyze", "--threads", "0"],
    ["optimize", "--max-omega", "2.5"],
    ["table", "--name", "table9"],
    ["solve", "--n", "10"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err


def test_geometry_file(tmp_path, capsys):
    p = tmp_path / "tet.json"
    p.write_text(json.dumps({"vertices": [[0, 0, 0], [1, 0, 0], [1, 1, 0], [1, 1, 1]]}))
    out_path = tmp_path / "r.json"
    code, out, _ = run(capsys, "analyze", "--geometry", str(p), "--smoother", "gs-lex",
                       "--resolution", "8", "--out", str(out_path))
    assert code == 0 and out == ""
    rep = json.loads(out_path.read_text(encoding="utf-8"))
    assert 0 < rep["factor"] < 1 and rep["manifest"]["outputs"] == [str(out_path)]


def test_threads_do_not_change_output(capsys):
    base = ["analyze", "--geometry", "catalog:spade", "--resolution", "16"]
    _, a, _ = run(capsys, *base, "--threads", "1")
    _, b, _ = run(capsys, *base, "--threads", "3")
    assert abs(json.loads(a)["factor"] - json.loads(b)["factor"]) <= 1e-12


def test_optimize_jacobi(capsys):
    code, out, _ = run(capsys, "optimize", "--smoother", "jacobi", "--nu", "1,0",
                       "--method", "grid", "--resolution", "16", "--search-resolution", "8")
    rep = json.loads(out)
    assert code == 0 and rep["omega"][0] == pytest.approx(0.8, abs=0.051)
    assert rep["report"]["smoother"]["omega"] == rep["omega"]


def test_solve_zero_cycles(tmp_path, capsys):
    log = tmp_path / "run.csv"
    code, out, _ = run(capsys, "solve", "--n", "9", "--cycles", "0", "--log", str(log),
                       "--no-predict")
    assert code == 0
    summary = json.loads(out)
    assert summary["measured_rho"] is None and summary["cycles"] == 0
    lines = log.read_text().splitlines()
    assert lines[0].startswith("# manifest ") and lines[1:] == ["cycle,error_l2,rate"]


def test_solve_reports_gap(capsys):
    code, out, _ = run(capsys, "solve", "--n", "33", "--cycles", "30", "--nu", "2,1",
                       "--resolution", "16", "--backend", "numpy")
    s = json.loads(out)
    assert code == 0 and s["gap"] < 0.03 and s["config"]["backend"] == "numpy"
    assert s["manifest"]["seed"] == 42


def test_solve_divergence_exit_3(capsys):
    code, out, err = run(capsys, "solve", "--n", "9", "--levels", "2", "--cycle", "V",
                         "--smoother", "jacobi", "--omega", "2", "--nu", "6,6",
                         "--cycles", "30", "--no-predict")
    assert code == 3 and "error" in json.loads(out) and err


def _table(capsys, *extra):
    code, out, _ = run(capsys, "table", "--resolution", "8", *extra)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# manifest ")
    return list(csv.reader(lines[1:]))


def test_table_layouts(capsys):
    t1 = _table(capsys, "--name", "table1")
    assert t1[0][:4] == ["nu1", "nu2", "jacobi_mu", "jacobi_rho"] and len(t1) == 5
    t2 = _table(capsys, "--name", "table2", "--with-solver", "--n", "9", "--cycles", "3")
    assert "four_color_rho_h" in t2[0] and len(t2) == 3
    deg = _table(capsys, "--name", "degenerate")
    assert deg[0][1:] == ["regular", "optimized", "needle", "wedge", "spindle", "spade",
                          "sliver", "cap"]
    assert [r[0] for r in deg[1:]] == ["mu", "rho"]
    assert _table(capsys, "--name", "table1") == t1


def test_build_smoother_defaults():
    assert build_smoother("jacobi").omega == (0.8,)
    alt = build_smoother("alternating-plane", axis=(1, 3))
    assert [p.axis for p in alt.parts] == [0, 2]
    assert build_smoother("four-color", omega=(1.2,), order=(3, 2, 1, 0)).order == (3, 2, 1, 0)
