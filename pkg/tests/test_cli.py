import json
import os

import numpy as np
import pytest

from polaronlab import checks, cli
from polaronlab import diagnostics as diag

SMALL = ["--set", "grid.n=4", "--set", "grid.kmax=2"]


@pytest.fixture(autouse=True)
def cache_dir(tmp_path, monkeypatch):
    root = tmp_path / "cache"
    monkeypatch.setenv(cli.CACHE_ENV, str(root))
    return root


def outputs(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_solve_decoupled(tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.run(["solve", "--out", str(out), "--set", "model.g=0", *SMALL])
    assert code == cli.EXIT_OK
    line = capsys.readouterr().out.strip()
    assert line.startswith("solve: E = ")
    E = float(line.split("E = ")[1].split()[0])
    assert abs(E) <= 1e-9
    csv = next(out.glob("solve-*.csv"))
    side = json.loads(next(out.glob("solve-*.json")).read_text())
    assert side["command"] == "solve" and side["converged"] is True
    assert csv.name[6:14] == side["cache_key"][:8]


def test_cache_hit_is_byte_identical(tmp_path, capsys):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    args = ["solve", *SMALL, "--set", "model.p=0.3"]
    assert cli.run([*args, "--out", str(a)]) == 0
    assert cli.run([*args, "--out", str(b)]) == 0
    assert "(cached," in capsys.readouterr().out.splitlines()[-1]
    assert cli.run([*args, "--out", str(c), "--no-cache"]) == 0
    assert outputs(a) == outputs(b) == outputs(c)


def test_clear_cache(tmp_path, cache_dir, capsys):
    cli.run(["solve", *SMALL, "--out", str(tmp_path / "o")])
    assert any(p.is_dir() for p in cache_dir.iterdir())
    assert cli.run(["--clear-cache"]) == 0
    assert "cleared 1" in capsys.readouterr().out
    assert not any(p.is_dir() for p in cache_dir.iterdir())


def test_json_format(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["scan-p", *SMALL, "--set", "scan.p_values=0 0.2 0.4", "--format", "json", "--out", str(out)]) == 0
    assert not list(out.glob("*.csv"))
    side = json.loads(next(out.glob("scan-p-*.json")).read_text())
    assert len(side["rows"]) == 3 and side["meta"]["gross_convexity_passed"] is True


def test_counterterm_table(tmp_path):
    out = tmp_path / "o"
    args = ["counterterm", "--set", "counterterm.l_values=200 400 800 1600", "--set", "counterterm.l2_values=1 2",
            "--out", str(out)]
    assert cli.run(args) == 0
    lines = next(out.glob("counterterm-*.csv")).read_text().splitlines()
    assert lines[0] == "L,sigma1,sigma1_err,sigma2,sigma2_err"
    assert len(lines) == 7
    side = json.loads(next(out.glob("counterterm-*.json")).read_text())
    assert side["meta"]["e1"] == pytest.approx(-8 * np.pi / 3 * 0.04, rel=0.02)


@pytest.mark.parametrize(
    "args,code",
    [
        (["solve", "--set", "model.gee=1"], cli.EXIT_CONFIG),
        (["solve", "--set", "model.g=-1"], cli.EXIT_CONFIG),
        (["solve", "--set", "grid.n=60", "--set", "fock.max_states=1000"], cli.EXIT_RESOURCE),
        (["solve", *SMALL, "--set", "solver.max_iter=3", "--set", "solver.tol=1e-14"], cli.EXIT_NONCONVERGED),
        (["gap", *SMALL, "--set", "model.kappa=0"], cli.EXIT_CONFIG),
        ([], cli.EXIT_CONFIG),
    ],
)
def test_exit_codes(tmp_path, args, code, capsys):
    assert cli.run([*args, "--out", str(tmp_path / "o")] if args else args) == code
    if code == cli.EXIT_CONFIG and args:
        assert capsys.readouterr().err.strip()


def test_config_file(tmp_path):
    ini = tmp_path / "run.ini"
    ini.write_text("[model]\ng = 0\np = 0.4\n[grid]\nn = 4\n")
    out = tmp_path / "o"
    assert cli.run(["solve", "--config", str(ini), "--out", str(out)]) == 0
    row = next(out.glob("solve-*.csv")).read_text().splitlines()[1].split(",")
    assert float(row[1]) == pytest.approx(0.08, abs=1e-9)


def test_failed_write_leaves_nothing(tmp_path, monkeypatch):
    out = tmp_path / "o"
    out.mkdir()

    def boom(src, dst):
        raise OSError("disk gone")

    monkeypatch.setattr(cli.os, "replace", boom)
    with pytest.raises(OSError):
        cli.run(["solve", *SMALL, "--out", str(out)])
    assert list(out.iterdir()) == []


def test_check_exit_code_follows_suite(tmp_path, monkeypatch):
    def fake(results):
        return lambda level, only=None, report=print: results

    ok = checks.CheckResult("a", True, "fine", 0.1, 1.0)
    bad = checks.CheckResult("b", False, "broken", 0.1, 1.0)
    monkeypatch.setattr(checks, "run_suite", fake([ok]))
    assert cli.run(["check", "--out", str(tmp_path / "o")]) == cli.EXIT_OK
    monkeypatch.setattr(checks, "run_suite", fake([ok, bad]))
    assert cli.run(["check", "--out", str(tmp_path / "o")]) == cli.EXIT_PROPERTY


def test_plotdata_round_trip(tmp_path):
    rows = [diag.ScanRow(P, np.pi * P - 1 / 3, 1e-11, 0.9, 0.1, np.e * P) for P in (0.0, 0.1, 0.2)]
    t = diag.ScanTable(rows)
    path = cli.emit_plotdata(t, tmp_path / "scan.dat")
    text = path.read_text().splitlines()
    assert text[0].startswith("# P[momentum]  E[energy]")
    assert len(text) == 4
    names, data = cli.read_plotdata(path)
    assert names == list(t.COLUMNS)
    ref = np.array(t.as_records(), dtype=float)
    np.testing.assert_allclose(data, ref, rtol=1e-12, atol=0)


def test_plotdata_empty_table(tmp_path):
    with pytest.raises(ValueError):
        cli.emit_plotdata(diag.ScanTable([]), tmp_path / "empty.dat")
    assert not (tmp_path / "empty.dat").exists()


def test_plotdata_reports_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        cli.emit_plotdata((("x",), [[1.0]]), tmp_path / "missing" / "x.dat")


def test_plot_flag(tmp_path):
    out = tmp_path / "o"
    assert cli.run(["ir-scan", *SMALL, "--set", "ir.kappa_values=0.2 0.1 0.05", "--plot", "--out", str(out)]) == 0
    names, data = cli.read_plotdata(next(out.glob("ir-scan-*.dat")))
    assert names == ["kappa", "E", "N_mean", "Z", "residual"] and data.shape == (3, 5)


def test_show_defaults(capsys):
    assert cli.run(["--show-defaults"]) == 0
    assert "[model]" in capsys.readouterr().out


def test_no_stray_temp_files(tmp_path):
    out = tmp_path / "o"
    cli.run(["gap", *SMALL, "--set", "grid.n=5", "--out", str(out)])
    assert all(not p.name.startswith(".") for p in out.iterdir())
    assert os.listdir(out)
