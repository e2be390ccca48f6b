import numpy as np
import pytest

from swimprom import cli
from swimprom.actuation import L1
from swimprom.config import RunConfig, parse_config
from swimprom.integrator import SolverError


def _summary(path):
    out = {}
    for line in path.read_text().splitlines():
        k, v = (s.strip() for s in line.split("=", 1))
        try:
            out[k] = float(v)
        except ValueError:
            out[k] = v
    return out


def _write(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(text)
    return str(p)


def test_simulate_zero_amplitude(tmp_path):
    cfg = _write(tmp_path, "[actuation]\namplitude = 0.0\n")
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path)]) == 0
    s = _summary(tmp_path / "summary.txt")
    assert abs(s["swim_distance"]) < 1e-12


def test_summary_header_echo(tmp_path, capsys):
    assert cli.main(["simulate", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "summary.txt").read_text().splitlines()
    assert lines[:3] == ["dt = 0.02", "horizon = 2.0", "fluid_density = 1000.0"]
    s = _summary(tmp_path / "summary.txt")
    assert s["model"] == "rom" and s["build_time"] > 0 and s["solve_time"] > 0
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert data.shape == (101, 3 + 6)
    assert "swim_distance" in capsys.readouterr().out


def test_fom_on_toy_mesh(tmp_path):
    cfg = _write(tmp_path, "[mesh]\ncells = [1, 2, 1]\n")
    assert cli.main(["simulate", "--config", cfg, "--fom", "--xi", "0.1,0,0", "--out", str(tmp_path)]) == 0
    s = _summary(tmp_path / "summary.txt")
    assert s["model"] == "fom" and s["build_time"] > 0 and s["solve_time"] > 0
    assert np.isfinite(s["swim_distance"])


def test_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["simulate", "--xi", "0.1,-0.1,0.05", "--out", str(d)]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


@pytest.mark.parametrize("argv_tail, text", [
    ([], "[mesh]\nunknown = 1\n"),
    (["--xi", "0.1,0.2"], ""),
    (["--xi", "a,b,c"], ""),
    (["--xi", "0.9,0,0"], ""),
])
def test_usage_errors(tmp_path, argv_tail, text, capsys):
    cfg = _write(tmp_path, text)
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path)] + argv_tail) == 1
    assert "error" in capsys.readouterr().err


def test_bad_subcommand():
    assert cli.main(["fly"]) == 1


def test_check_passes(tmp_path):
    assert cli.main(["check", "--out", str(tmp_path)]) == 0
    report = (tmp_path / "check_report.txt").read_text()
    assert "nonzeros=27" in report and "FAIL" not in report


def test_check_detects_corrupted_l1(tmp_path):
    bad = L1.copy()
    bad[3, 1, 0] = 0.0
    assert cli.cmd_check(RunConfig().validate(), str(tmp_path), L1=bad) == 3
    lines = (tmp_path / "check_report.txt").read_text().splitlines()
    assert lines[0].startswith("FAIL") and "L1 structure" in lines[0]


def test_compare_small_mesh(tmp_path):
    assert cli.main(["compare", "--out", str(tmp_path)]) == 0
    s = _summary(tmp_path / "compare.txt")
    assert abs(s["relative_error"]) <= 0.20
    assert abs(s["tail_frequency_rom"] - 1.0) < 0.05 and abs(s["tail_frequency_fom"] - 1.0) < 0.05
    data = np.loadtxt(tmp_path / "compare.csv", delimiter=",", skiprows=1)
    assert data.shape == (101, 5)


def test_compare_linear_regime(tmp_path):
    # at tiny amplitude both models are linear; the gap that remains is basis truncation,
    # which shrinks as vibration modes are added
    errs = []
    for n in (1, 2):
        out = tmp_path / str(n)
        cfg = _write(tmp_path, f"[actuation]\namplitude = 0.002\n[rob]\nn_modes = {n}\n")
        assert cli.main(["compare", "--config", cfg, "--out", str(out)]) == 0
        errs.append(_summary(out / "compare.txt")["relative_error"])
    assert abs(errs[0]) < 0.10
    assert abs(errs[1]) < abs(errs[0])


def test_compare_reports_fom_divergence(tmp_path, monkeypatch, capsys):
    def boom(case, xi):
        raise SolverError(7, 1.0)
    monkeypatch.setattr(cli, "run_fom", boom)
    assert cli.main(["compare", "--out", str(tmp_path)]) == 2
    assert "FOM diverged at step 7" in capsys.readouterr().out


def test_optimize_zero_parameters(tmp_path, capsys):
    cfg = _write(tmp_path, '[shape]\npreset = ""\n')
    assert cli.main(["optimize", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "optimization_log.csv").read_text().splitlines()
    assert len(rows) == 2
    assert "improvement factor = 1" in capsys.readouterr().out


def test_optimize_small_mesh(tmp_path, capsys):
    assert cli.main(["optimize", "--out", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    factor = float(text.split("improvement factor =")[1])
    assert factor >= 1.5
    log = np.genfromtxt(tmp_path / "optimization_log.csv", delimiter=",", names=True)
    built = log[log["rebuilt"] == 1]
    assert np.all(np.diff(built["cost"]) <= 0)
    b = np.array(parse_config("").shape.bounds or [(-0.5, 0.5), (-0.5, 0.5), (-0.3, 0.3)])
    for j, name in enumerate(("xi_height_taper", "xi_width_taper", "xi_tail_fin")):
        assert np.all(log[name] > b[j, 0]) and np.all(log[name] < b[j, 1])
    from swimprom.mesh import read_mesh
    m = read_mesh(str(tmp_path / "optimal_mesh.txt"))
    assert np.all(m.volumes > 0)
