import json
import subprocess
import sys
from pathlib import Path

import pytest

from fittedbvp.cli import main
from fittedbvp.harness import ConvergenceReport

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def run(*args):
    return main([str(a) for a in args])


def test_solve_writes_nodal_csv(tmp_path, capsys):
    out = tmp_path / "v.csv"
    code = run("solve", "--problem", PROBLEMS / "linear_exp.json", "--N", 32, "--out", out)
    assert code == 0
    assert out.read_text().startswith("x,V,dV\n")
    summary = capsys.readouterr().out
    assert "converged=true" in summary and "max_nodal_error=" in summary


def test_solve_to_stdout(capsys):
    assert run("solve", "--problem", PROBLEMS / "golden_pow.json", "--N", 8) == 0
    captured = capsys.readouterr()
    assert captured.out.startswith("x,V,dV") and len(captured.out.splitlines()) == 10
    assert "mesh=layer" in captured.err


def test_missing_file_exit_2(capsys):
    assert run("solve", "--problem", "does/not/exist.json", "--N", 8) == 2
    assert "does/not/exist.json" in capsys.readouterr().err


def test_layer_mesh_on_exp_problem_exit_2(capsys):
    assert run("solve", "--problem", PROBLEMS / "linear_exp.json", "--N", 8, "--mesh", "layer") == 2


def test_bad_options_exit_2():
    assert run("solve", "--problem", PROBLEMS / "linear_exp.json", "--N", 8, "--damping", 2) == 2
    assert run("solve", "--problem", PROBLEMS / "linear_exp.json", "--N", 1) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        run("solve", "--N", 8)
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        run("sweep", "--problem", "x.json", "--eps", "a,b", "--N", "8")
    assert info.value.code == 2


def test_non_convergence_exit_1(capsys):
    code = run("solve", "--problem", PROBLEMS / "cubic_exp.json", "--N", 32, "--max-iter", 1)
    assert code == 1
    assert "converged=false" in capsys.readouterr().err


def test_sweep_csv(tmp_path):
    out = tmp_path / "s.csv"
    code = run("sweep", "--problem", PROBLEMS / "golden_pow.json", "--eps", "1e-2,1e-4", "--N", "16,32",
               "--out", out, "--jobs", 2)
    assert code == 0
    report = ConvergenceReport.read(out)
    assert len(report.rows) == 4 and report.rows[1].eoc is not None


def test_sweep_classical_and_dense(capsys):
    code = run("sweep", "--problem", PROBLEMS / "linear_exp.json", "--eps", "0.1", "--N", "16,32",
               "--scheme", "classical", "--dense-error")
    assert code == 0
    assert capsys.readouterr().out.splitlines()[1].split(",")[2] == "classical"


def test_as_printed_signs_flag(capsys):
    assert run("solve", "--problem", PROBLEMS / "linear_exp_shifted.json", "--N", 64, "--as-printed-signs") == 0
    err = capsys.readouterr().err
    value = float(err.split("max_nodal_error=")[1].split()[0])
    assert value > 0.1


def test_as_printed_signs_rejected_for_power():
    assert run("solve", "--problem", PROBLEMS / "golden_pow.json", "--N", 8, "--as-printed-signs") == 2


def test_verify_exit_codes(tmp_path, capsys):
    assert run("verify", "--problem", PROBLEMS / "cubic_exp.json") == 0
    assert "hold" in capsys.readouterr().out
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"type": "power", "epsilon": 0.1, "f": "sin(u)", "A": 0, "B": 0, "alpha": 0.5}))
    assert run("verify", "--problem", bad, "--u-range", "0,3.14159") == 1
    assert "violation" in capsys.readouterr().out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fittedbvp", "verify", "--problem", str(PROBLEMS / "golden_pow.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


@pytest.mark.parametrize("name", sorted(p.name for p in PROBLEMS.glob("*.json")))
def test_sample_problems_solve(name):
    assert run("solve", "--problem", PROBLEMS / name, "--N", 32, "--oracle", "none") == 0
