"""Command-line entry point: ``plaplab {scenario,sweep,norms,solve,alpha0}``.

Exit status: 0 success, 2 usage error, 3 bad input (unreadable or invalid
files/parameters), 4 solver non-convergence (reports are still written),
1 anything unexpected. Failures print one JSON line on stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import (
    BoundarySpec,
    SourceRule,
    critical_exponent,
    estimate_alpha0,
    extremal_source,
    fmt,
    run_scenario,
)
from .field import field_from_config
from .grid import GridFunction
from .norms import NormRecord, bmo_seminorm, lebesgue_norm, weak_lebesgue_norm, write_norm_csv
from .scenarios import BUILTIN_SCENARIOS, builtin_scenario, load_scenario, theta_scenario
from .solver import SolveConfig, solve

log = logging.getLogger("plaplab")

OUTPUT_ENV = "PLAPLAB_OUTPUT"
EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_INPUT, EXIT_NONCONVERGED = 0, 1, 2, 3, 4
SWEEP_COLUMNS = ["p", "theta", "predicted_alpha", "fitted_alpha", "residual", "verdict"]


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    output: Path | None = None
    seed: int = 0
    resolution: int | None = None
    workers: int = 1
    options: dict = field(default_factory=dict)


def _output_dir(cfg: RunConfig, default_name: str) -> Path:
    root = cfg.output or Path(os.environ.get(OUTPUT_ENV, "plaplab-out")) / default_name
    root.mkdir(parents=True, exist_ok=True)
    return root


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _read_field(path) -> "FieldSpec":  # noqa: F821
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read field file {path}: {exc.strerror}") from None
    return field_from_config(text)


def _parse_kv(spec: str) -> tuple[str, dict[str, str]]:
    kind, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"malformed parameter {item!r} in {spec!r}")
        params[key.strip()] = value.strip()
    return kind.strip(), params


# -- commands ----------------------------------------------------------------

def _cmd_scenario(cfg: RunConfig) -> int:
    opts = cfg.options
    if opts.get("file"):
        scenario = load_scenario(opts["file"])
    else:
        scenario = builtin_scenario(opts.get("builtin") or "sharp-theta")
    if cfg.resolution:
        scenario = replace(scenario, resolution=cfg.resolution)
    scenario = replace(scenario, seed=cfg.seed)
    if opts.get("alpha0") not in (None, "measure"):
        scenario = replace(scenario, alpha0=float(opts["alpha0"]))
    report = run_scenario(scenario)
    out = report.write(_output_dir(cfg, scenario.name), binary_solution=opts.get("binary", False))
    print(f"{scenario.name}: {report.verdicts['verdict']} -> {out}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def _sweep_one(args) -> tuple[list[str], bool]:
    p, theta, res, seed, alpha0, out = args
    scenario = theta_scenario(p, theta, resolution=res, seed=seed,
                              alpha0=alpha0 if alpha0 == "measure" else float(alpha0))
    report = run_scenario(scenario)
    report.write(out / scenario.name)
    worst = min(report.decay, key=lambda r: r.fitted_alpha)
    row = [fmt(p), fmt(theta), fmt(report.data["predicted_alpha"]), fmt(report.data["fitted_alpha"]),
           fmt(worst.fit_residual), report.verdicts["verdict"]]
    return row, report.converged


def _cmd_sweep(cfg: RunConfig) -> int:
    opts = cfg.options
    out = _output_dir(cfg, "sweep")
    res = cfg.resolution or 257
    jobs = [(p, t, res, cfg.seed, opts.get("alpha0", "measure"), out)
            for p in opts["p"] for t in opts["theta"]]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    with open(out / "index.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row, _ in results:
            w.writerow(row)
    print(f"sweep: {len(results)} scenarios -> {out / 'index.csv'}")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_NONCONVERGED


def _cmd_norms(cfg: RunConfig) -> int:
    opts = cfg.options
    try:
        u = GridFunction.load(opts["input"])
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read grid {opts['input']}: {exc}") from None
    records = []
    for q in opts.get("weak_q") or []:
        records.append(NormRecord("weak_lebesgue", f"q={q!r}",
                                  weak_lebesgue_norm(u, q, opts.get("min_count", 1)), u.resolution, u.cap))
    for q in opts.get("strong_q") or []:
        records.append(NormRecord("lebesgue", f"q={q!r}", lebesgue_norm(u, q), u.resolution, u.cap))
    if opts.get("bmo"):
        records.append(NormRecord("bmo", "dyadic-default", bmo_seminorm(u), u.resolution, u.cap))
    if not records:
        raise InputError("norms: request at least one of --weak-q, --strong-q, --bmo")
    if cfg.output:
        cfg.output.parent.mkdir(parents=True, exist_ok=True)
        write_norm_csv(records, cfg.output)
    else:
        write_norm_csv(records, sys.stdout)
    return EXIT_OK


def _source_from_spec(spec: str, p: float, dim: int) -> SourceRule:
    kind, params = _parse_kv(spec)
    if kind == "extremal":
        return extremal_source(p, float(params["theta"]), dim)[0]
    if kind in ("power", "log", "zero"):
        return SourceRule(kind, float(params.get("exponent", 0.0)), float(params.get("coeff", 1.0)))
    raise InputError(f"unknown source kind {kind!r}")


def _boundary_from_spec(spec: str, p: float, source_spec: str) -> BoundarySpec:
    kind, params = _parse_kv(spec)
    beta = params.get("beta", "1")
    if beta == "auto":
        _, sp = _parse_kv(source_spec)
        beta = critical_exponent(p, float(sp["theta"]))
    return BoundarySpec(kind, float(params.get("value", 1.0 if kind == "power" else 0.0)), float(beta),
                        int(params.get("seed", 0)))


def _cmd_solve(cfg: RunConfig) -> int:
    opts = cfg.options
    fs = _read_field(opts["field"])
    res = cfg.resolution or 129
    source = _source_from_spec(opts.get("source", "zero"), fs.p, fs.dim)
    boundary = _boundary_from_spec(opts.get("boundary", "constant:value=0"), fs.p, opts.get("source", ""))
    f = source.on_grid(fs.dim, res, load=opts.get("load", "nodal"))
    config = SolveConfig(method=opts.get("method", "newton"))
    report = solve(f, fs, boundary.rule(source, fs.p, fs.dim, f.h), config)
    out = _output_dir(cfg, "solve")
    (out / "summary.txt").write_text(report.to_text())
    report.solution.to_csv(out / "solution.csv")
    print(f"solve: converged={report.converged} -> {out}")
    return EXIT_OK if report.converged else EXIT_NONCONVERGED


def _cmd_alpha0(cfg: RunConfig) -> int:
    opts = cfg.options
    fs = _read_field(opts["field"])
    value, fits, flags = estimate_alpha0(fs, opts.get("samples", 3), None, cfg.resolution or 129,
                                         cfg.seed, details=True)
    out = _output_dir(cfg, "alpha0")
    with open(out / "alpha0.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample", "fitted_alpha"])
        for i, a in enumerate(fits):
            w.writerow([i, fmt(a)])
        w.writerow(["surrogate", fmt(value)])
    print(f"alpha0 surrogate={value:.4f} -> {out}")
    return EXIT_NONCONVERGED if flags else EXIT_OK


COMMANDS = {
    "scenario": _cmd_scenario,
    "sweep": _cmd_sweep,
    "norms": _cmd_norms,
    "solve": _cmd_solve,
    "alpha0": _cmd_alpha0,
}


def _error(status: int, message: str) -> int:
    print(json.dumps({"status": status, "error": message}), file=sys.stderr)
    return status


def run(cfg: RunConfig) -> int:
    """Execute one command and map failures to exit statuses."""
    if cfg.command not in COMMANDS:
        return _error(EXIT_USAGE, f"unknown command {cfg.command!r}")
    np.seterr(over="ignore")
    try:
        return COMMANDS[cfg.command](cfg)
    except (InputError, FileNotFoundError, KeyError, ValueError) as exc:
        return _error(EXIT_INPUT, str(exc).strip("'\""))
    except Exception as exc:  # noqa: BLE001
        log.exception("unexpected failure")
        return _error(EXIT_FAILURE, f"{type(exc).__name__}: {exc}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plaplab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_ENV}/<name>)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--res", type=int, help="grid resolution m (odd)")

    p = sub.add_parser("scenario", help="run one scenario")
    common(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--builtin", choices=BUILTIN_SCENARIOS)
    g.add_argument("--file", type=Path)
    p.add_argument("--alpha0", help="'measure' or a fixed surrogate value")
    p.add_argument("--binary", action="store_true", help="write the solution grid in binary")

    p = sub.add_parser("sweep", help="theta/p sweep of extremal-source scenarios")
    common(p)
    p.add_argument("--p", type=_csv_floats, required=True)
    p.add_argument("--theta", type=_csv_floats, required=True)
    p.add_argument("--alpha0", default="measure")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("norms", help="norms of a grid function file")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--weak-q", type=_csv_floats)
    p.add_argument("--strong-q", type=_csv_floats)
    p.add_argument("--bmo", action="store_true")
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--out", type=Path, help="CSV path (default stdout)")

    p = sub.add_parser("solve", help="solve one problem on the grid")
    common(p)
    p.add_argument("--field", type=Path, required=True, help="key=value field file")
    p.add_argument("--source", default="zero", help="zero | power:exponent=E,coeff=C | extremal:theta=T")
    p.add_argument("--boundary", default="constant:value=0",
                   help="constant:value=V | power:beta=B|auto | oracle:value=V")
    p.add_argument("--load", choices=("nodal", "cell"), default="nodal")
    p.add_argument("--method", choices=("newton", "gradient"), default="newton")

    p = sub.add_parser("alpha0", help="measure the homogeneous Hoelder exponent surrogate")
    common(p)
    p.add_argument("--field", type=Path, required=True)
    p.add_argument("--samples", type=int, default=3)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    keys = {"command", "out", "seed", "res", "workers", "verbose"}
    options = {k: v for k, v in vars(args).items() if k not in keys}
    cfg = RunConfig(
        command=args.command,
        output=getattr(args, "out", None),
        seed=getattr(args, "seed", 0),
        resolution=getattr(args, "res", None),
        workers=getattr(args, "workers", 1),
        options=options,
    )
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
