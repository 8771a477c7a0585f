import ast
import csv

import pytest

from plaplab.analysis import compute_verdicts, run_scenario
from plaplab.scenarios import (
    BUILTIN_SCENARIOS,
    builtin_scenario,
    load_scenario,
    parse_scenario,
    theta_scenario,
)

SCENARIO_TEXT = """
[scenario]
name = demo
theta = 1.5
resolution = 129
alpha0 = 1.0

[field]
p = 2.0
dim = 2
formal = true
coeff.kind = checkerboard
coeff.params = low:1,high:2,cell:0.125
lambda_lo = 1
lambda_hi = 2

[source]
kind = extremal

[boundary]
kind = power
beta = auto     ; critical exponent

[solver]
epsilon_schedule = 0.1, 0.01

[diagnostics]
lam = 0.5
centers = 0 0; 0.25 0
fit_window = all
"""


@pytest.fixture(scope="module")
def small_report():
    return run_scenario(theta_scenario(2.0, 1.5, resolution=129, alpha0=1.0))


@pytest.mark.parametrize("name", BUILTIN_SCENARIOS)
def test_builtins_construct(name):
    s = builtin_scenario(name, resolution=129)
    assert s.name == name and s.resolution == 129
    if name == "bmo-log":
        assert s.theta is None and s.load == "nodal"
    else:
        assert s.critical_alpha == pytest.approx(0.75)


def test_unknown_builtin():
    with pytest.raises(KeyError):
        builtin_scenario("nope")


def test_parse_scenario():
    s = parse_scenario(SCENARIO_TEXT)
    assert s.name == "demo" and s.theta == 1.5 and s.alpha0 == 1.0
    assert s.field.coefficient.kind == "checkerboard"
    assert s.boundary.beta == pytest.approx(2 / 3)
    assert s.solver.epsilon_schedule == (0.1, 0.01)
    assert s.centers == [(0.0, 0.0), (0.25, 0.0)]
    assert s.fit_window is None


def test_parse_scenario_errors(tmp_path):
    with pytest.raises(ValueError, match="field"):
        parse_scenario("[scenario]\nname = x\n")
    with pytest.raises(ValueError, match="theta"):
        parse_scenario("[field]\np = 1.5\n[source]\nkind = extremal\n")
    with pytest.raises(FileNotFoundError):
        load_scenario(tmp_path / "missing.ini")


def test_small_scenario_matches_prediction(small_report):
    r = small_report
    assert r.converged
    assert r.data["predicted_alpha"] == pytest.approx(2 / 3)
    assert r.verdicts["verdict"] == "exponent-match"
    assert r.data["fitted_alpha_origin"] == pytest.approx(2 / 3, abs=0.05)


def test_verdicts_recomputable_from_report(small_report):
    assert compute_verdicts(small_report.data) == small_report.verdicts


def test_report_directory(tmp_path, small_report):
    out = small_report.write(tmp_path / "r")
    names = sorted(p.name for p in out.iterdir())
    assert names == sorted(["summary.txt", "norms.csv", "decay_index.csv", "solution.csv"]
                           + [f"decay_{i}.csv" for i in range(len(small_report.decay))])
    summary = dict(line.split("=", 1) for line in (out / "summary.txt").read_text().splitlines())
    data = {k[5:]: ast.literal_eval(v) for k, v in summary.items() if k.startswith("data.")}
    assert compute_verdicts(data)["verdict"] == summary["verdict.verdict"]
    with open(out / "norms.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert {"weak_lebesgue(f)", "lebesgue(u)", "bmo(u)", "sup(u)"} <= {r["quantity"] for r in rows}


def test_outputs_reproducible(tmp_path, small_report):
    again = run_scenario(theta_scenario(2.0, 1.5, resolution=129, alpha0=1.0))
    a, b = small_report.write(tmp_path / "a"), again.write(tmp_path / "b")
    for name in ("norms.csv", "decay_index.csv", "decay_0.csv", "solution.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    strip = lambda p: [x for x in (p / "summary.txt").read_text().splitlines() if not x.startswith("written=")]  # noqa: E731
    assert strip(a) == strip(b)


def test_binary_solution(tmp_path, small_report):
    out = small_report.write(tmp_path / "bin", binary_solution=True)
    assert (out / "solution.bin").exists() and not (out / "solution.csv").exists()
