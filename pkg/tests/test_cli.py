import csv
import io
import shutil
import subprocess
import sys

import pytest

from fracadi.cli import main


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_solve_flags(capsys):
    assert main(["solve", "--problem", "p1d", "--alpha", "1.9", "--n", "20"]) == 0
    [row] = _rows(capsys.readouterr().out)
    assert float(row["error"]) == pytest.approx(2.5502e-4, rel=0.02)
    assert row["scheme"] == "CN"


def test_solve_config_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("problem = p2d\nalpha = 1.5\nbeta = 1.4\nscheme = pr-adi\nn = 10\n")
    assert main(["solve", "--config", str(cfg), "--scheme", "d-adi", "--format", "markdown"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("| h, tau | D-ADI alpha=1.5 beta=1.4 | rate |")


def test_convergence_to_file(tmp_path, capsys):
    out = tmp_path / "table.csv"
    code = main(["convergence", "--problem", "p1d", "--alpha", "1.5", "--n", "10", "--levels", "3",
                 "--output", str(out)])
    assert code == 0
    assert capsys.readouterr().out == ""
    rows = _rows(out.read_text())
    assert [r["level"] for r in rows] == ["1", "2", "3"]
    assert abs(float(rows[2]["rate"]) - 2.0) < 0.1


def test_multi_section_config_appends(tmp_path):
    out = tmp_path / "both.csv"
    cfg = tmp_path / "runs.ini"
    cfg.write_text(f"[a]\nproblem = p1d\nalpha = 1.1\noutput = {out}\n"
                   f"[b]\nproblem = p1d\nalpha = 1.9\noutput = {out}\n")
    assert main(["solve", "--config", str(cfg)]) == 0
    rows = [r for r in out.read_text().splitlines() if r and not r.startswith("level")]
    assert len(rows) == 2


def test_convergence_failure_exit_code(capsys):
    code = main(["convergence", "--problem", "p1d", "--n", "40", "--nt-ratio", "3", "--levels", "2"])
    assert code == 1
    assert "level 1 failed" in capsys.readouterr().err


def test_compare_splitting(capsys):
    code = main(["compare-splitting", "--problem", "riesz2d", "--alpha", "1.9", "--scheme", "d-adi-ii",
                 "--n", "20", "--ratios", "5/2,1"])
    assert code == 0
    rows = _rows(capsys.readouterr().out)
    assert {r["scheme"] for r in rows} == {"D-ADI", "D-ADI-II", "FS-II"}
    assert {r["tau_over_h"] for r in rows} == {"2.5", "1"}


def test_stability_report(tmp_path):
    out = tmp_path / "report.txt"
    assert main(["stability-report", "--mu", "1.5", "--sizes", "4,8", "--output", str(out)]) == 0
    text = out.read_text()
    assert text.count("passed = true") == 2
    assert "FAIL" not in text


@pytest.mark.parametrize("argv", [
    ["solve", "--problem", "p1d", "--scheme", "d-adi"],
    ["solve", "--problem", "p1d", "--alpha", "2.5"],
    ["solve", "--config", "/nonexistent/run.ini"],
    ["compare-splitting", "--problem", "p2d", "--scheme", "d-adi"],
])
def test_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert "fracadi: error:" in capsys.readouterr().err


def test_unknown_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("problem = p1d\nwidth = 3\n")
    assert main(["solve", "--config", str(cfg)]) == 2
    assert "width" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fracadi", "solve", "--problem", "p1d", "--n", "10"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.startswith("level,h,tau,error,rate")


@pytest.mark.skipif(shutil.which("fracadi") is None, reason="console script not installed")
def test_console_script():
    proc = subprocess.run(["fracadi", "--help"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    for cmd in ("solve", "convergence", "compare-splitting", "stability-report"):
        assert cmd in proc.stdout
