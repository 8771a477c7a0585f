import csv
import json

import numpy as np
import pytest

from plaplab.cli import EXIT_INPUT, EXIT_NONCONVERGED, EXIT_OK, RunConfig, main, run
from plaplab.grid import GridFunction


def last_error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


@pytest.fixture
def field_file(tmp_path):
    path = tmp_path / "field.txt"
    path.write_text("p=1.8\ndim=2\ncoeff.kind=constant\ncoeff.params=value:1\n")
    return path


def test_unknown_command(capsys):
    assert run(RunConfig("frobnicate")) == 2
    assert "unknown command" in last_error(capsys)["error"]


def test_argparse_rejects_unknown_subcommand():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_scenario_file(tmp_path, capsys):
    assert main(["scenario", "--file", str(tmp_path / "none.ini")]) == EXIT_INPUT
    err = last_error(capsys)
    assert err["status"] == EXIT_INPUT and "cannot read scenario file" in err["error"]


def test_invalid_field_file(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("p=3\n")
    assert main(["solve", "--field", str(bad)]) == EXIT_INPUT
    assert "outside" in last_error(capsys)["error"]


def test_nonconvergence_status_still_writes(tmp_path, capsys):
    ini = tmp_path / "s.ini"
    ini.write_text("[scenario]\nname = slow\ntheta = 1.5\nresolution = 129\nalpha0 = 1\n"
                   "[field]\np = 1.8\n[solver]\nmethod = gradient\nmax_iters = 2\n")
    out = tmp_path / "slow"
    assert main(["scenario", "--file", str(ini), "--out", str(out)]) == EXIT_NONCONVERGED
    assert (out / "summary.txt").exists()
    assert "not-converged" in (out / "summary.txt").read_text()


def test_solve_and_norms(tmp_path, field_file, capsys):
    out = tmp_path / "solve"
    code = main(["solve", "--field", str(field_file), "--source", "extremal:theta=1.5",
                 "--boundary", "power:beta=auto", "--res", "65", "--out", str(out)])
    assert code == EXIT_OK
    u = GridFunction.load(out / "solution.csv")
    assert u.resolution == 65
    capsys.readouterr()
    assert main(["norms", "--input", str(out / "solution.csv"), "--weak-q", "2.0"]) == EXIT_OK
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["quantity", "parameters", "value", "resolution", "cap"]
    assert len(rows) == 2 and rows[1][0] == "weak_lebesgue"
    assert float(rows[1][2]) > 0


def test_norms_to_file_and_requires_quantity(tmp_path, capsys):
    g = GridFunction.from_radial(2, 129, np.log)
    g.to_binary(tmp_path / "g.bin")
    out = tmp_path / "n" / "norms.csv"
    assert main(["norms", "--input", str(tmp_path / "g.bin"), "--bmo", "--strong-q", "1,2", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4
    assert main(["norms", "--input", str(tmp_path / "g.bin")]) == EXIT_INPUT
    assert main(["norms", "--input", str(tmp_path / "missing.csv"), "--bmo"]) == EXIT_INPUT


def test_scenario_env_output(tmp_path, monkeypatch):
    monkeypatch.setenv("PLAPLAB_OUTPUT", str(tmp_path / "root"))
    ini = tmp_path / "s.ini"
    ini.write_text("[scenario]\nname = envdemo\ntheta = 1.5\nresolution = 129\nalpha0 = 1\n"
                   "[field]\np = 2\nformal = true\n")
    assert main(["scenario", "--file", str(ini)]) == EXIT_OK
    assert (tmp_path / "root" / "envdemo" / "summary.txt").exists()


def test_sweep_index(tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--p", "2", "--theta", "1.25,1.5", "--res", "129", "--alpha0", "1",
                 "--workers", "2", "--out", str(out)])
    assert code == EXIT_OK
    with open(out / "index.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["p", "theta", "predicted_alpha", "fitted_alpha", "residual", "verdict"]
    assert [float(r["theta"]) for r in rows] == [1.25, 1.5]
    for r in rows:
        assert abs(float(r["fitted_alpha"]) - float(r["predicted_alpha"])) <= 0.05


def test_alpha0_command(tmp_path, field_file):
    out = tmp_path / "a0"
    assert main(["alpha0", "--field", str(field_file), "--samples", "1", "--out", str(out)]) == EXIT_OK
    lines = (out / "alpha0.csv").read_text().splitlines()
    assert lines[0] == "sample,fitted_alpha" and lines[-1].startswith("surrogate,")
