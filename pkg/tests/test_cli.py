"""Command-line front end: flag parsing, file output, exit codes."""

import json

import pytest

from buckstokes.cli import main


def run_cli(args):
    return main(list(args))


def test_mesh_writes_file_and_prints_summary(tmp_path, capsys):
    code = run_cli(["mesh", "--domain", "disc", "--h", "0.25", "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "mesh.json").read_text())
    assert set(doc) == {"vertices", "triangles", "boundary", "config", "version"}
    out = capsys.readouterr().out
    assert "vertices=" in out and "wrote 1 file(s)" in out


def test_spectrum_outputs_are_byte_identical_across_runs(tmp_path):
    args = ["spectrum", "--domain", "disc", "--h", "0.25", "--k", "1", "--seed", "5"]
    dir_a, dir_b = tmp_path / "a", tmp_path / "b"
    assert run_cli(args + ["--out", str(dir_a)]) == 0
    assert run_cli(args + ["--out", str(dir_b)]) == 0
    names = sorted(p.name for p in dir_a.iterdir())
    assert names == sorted(p.name for p in dir_b.iterdir())
    for name in names:
        assert (dir_a / name).read_bytes() == (dir_b / name).read_bytes()


def test_spectrum_prints_summary_table(tmp_path, capsys):
    code = run_cli(["spectrum", "--domain", "disc", "--h", "0.25", "--k", "1", "--out", str(tmp_path)])
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["domain", "lambda1_D", "lambda2_D", "lambda1_B", "lambda1_S", "weinstein_gap"]
    assert lines[1].startswith("disc-1")


def test_config_file_with_flag_override(tmp_path, capsys):
    config_file = tmp_path / "run.json"
    config_file.write_text(json.dumps({
        "domain": {"kind": "rectangle", "a": 1.0, "b": 1.0},
        "target_h": 0.25,
        "k": 1,
        "seed": 9,
    }))
    code = run_cli(["spectrum", "--config", str(config_file), "--k", "2", "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "spectrum_summary.json").read_text())
    assert doc["config"]["k"] == 2  # flag wins
    assert doc["config"]["seed"] == 9  # file survives where no flag is given
    assert doc["config"]["domain"]["kind"] == "rectangle"
    assert doc["weinstein_gap"] > 0.05


def test_evolve_writes_trace_and_summary(tmp_path):
    code = run_cli(["evolve", "--domain", "disc", "--h", "0.25", "--nu", "0.5", "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "evolve_summary.json").read_text())
    assert doc["config"]["nu"] == 0.5
    assert doc["rate_relative_error"] <= 0.02
    header = (tmp_path / "evolve_trace.csv").read_text().splitlines()[0]
    assert header == "t,E,divergence_residual"


def test_invalid_domain_choice_exits_2(tmp_path):
    with pytest.raises(SystemExit) as info:
        run_cli(["spectrum", "--domain", "hexagon", "--out", str(tmp_path)])
    assert info.value.code == 2


@pytest.mark.parametrize(
    "args",
    [
        ["spectrum", "--domain", "ellipse", "--params", "1.0"],
        ["spectrum", "--domain", "disc", "--params", "1,x"],
        ["convergence", "--domain", "disc", "--levels", "2"],
        ["mesh", "--domain", "disc", "--h", "9"],
        ["spectrum", "--config", "/nonexistent/run.json"],
    ],
)
def test_usage_errors_exit_2(args, tmp_path, capsys):
    assert run_cli(args + ["--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.strip()


def test_solver_breakdown_exits_1(tmp_path, capsys):
    code = run_cli(["spectrum", "--domain", "disc", "--h", "0.25", "--k", "1",
                    "--tol", "1e-300", "--out", str(tmp_path)])
    assert code == 1
    assert "numerical failure" in capsys.readouterr().err
