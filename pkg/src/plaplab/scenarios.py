"""Built-in scenarios and the plain-text scenario file format.

Scenario files are INI-style (``configparser``) with sections mirroring the
:class:`~plaplab.analysis.Scenario` fields::

    [scenario]
    name = sharp-theta
    theta = 1.5
    resolution = 257

    [field]
    p = 1.8
    dim = 2
    coeff.kind = constant
    coeff.params = value:1

    [source]
    kind = extremal          ; or power / log / zero

    [boundary]
    kind = power
    beta = auto              ; auto = critical exponent

    [solver]
    epsilon_schedule = 0.1, 0.01, 0.001, 0.0001

    [diagnostics]
    lam = 0.5
    centers = 0 0; 0.25 0
"""
from __future__ import annotations

import configparser
from pathlib import Path

from .analysis import (
    BoundarySpec,
    Scenario,
    SourceRule,
    critical_exponent,
    extremal_source,
)
from .field import CoefficientField, FieldSpec, field_from_config
from .solver import SolveConfig

__all__ = ["BUILTIN_SCENARIOS", "builtin_scenario", "theta_scenario", "load_scenario", "parse_scenario"]

BUILTIN_SCENARIOS = ("bmo-log", "sharp-theta", "rough-media", "smooth-media")

DEFAULT_P = 1.8
DEFAULT_THETA = 1.5


def theta_scenario(p: float, theta: float, dim: int = 2, resolution: int = 257,
                   coefficient: CoefficientField | None = None, lambda_lo: float = 1.0,
                   lambda_hi: float = 1.0, name: str | None = None, **kw) -> Scenario:
    """Extremal-source scenario: ``f = -Delta_p r^beta``, boundary trace ``r^beta``."""
    field = FieldSpec(p, dim, coefficient or CoefficientField(), lambda_lo, lambda_hi,
                      formal=not p < dim)
    source, beta = extremal_source(p, theta, dim)
    return Scenario(
        name=name or f"theta-p{p:g}-t{theta:g}",
        field=field,
        source=source,
        theta=theta,
        boundary=BoundarySpec("power", 1.0, beta),
        resolution=resolution,
        **kw,
    )


def builtin_scenario(name: str, resolution: int = 257, **kw) -> Scenario:
    p, theta = DEFAULT_P, DEFAULT_THETA
    if name == "bmo-log":
        return Scenario(
            name=name,
            field=FieldSpec(p, 2),
            source=SourceRule("power", exponent=p, coeff=1.0),
            theta=None,
            boundary=BoundarySpec("oracle", 0.0),
            resolution=resolution,
            load="nodal",
            **kw,
        )
    if name == "sharp-theta":
        return theta_scenario(p, theta, resolution=resolution, name=name, **kw)
    if name == "rough-media":
        coeff = CoefficientField("checkerboard", {"low": 1.0, "high": 2.0, "cell": 0.125})
        return theta_scenario(p, theta, resolution=resolution, coefficient=coeff,
                              lambda_lo=1.0, lambda_hi=2.0, name=name, **kw)
    if name == "smooth-media":
        coeff = CoefficientField("smooth-callable", {"profile": "radial-quadratic", "base": 1.0, "amp": 0.5})
        return theta_scenario(p, theta, resolution=resolution, coefficient=coeff,
                              lambda_lo=1.0, lambda_hi=1.5, name=name, **kw)
    raise KeyError(f"unknown built-in scenario {name!r}; choose from {', '.join(BUILTIN_SCENARIOS)}")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def parse_scenario(text: str) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    cp.read_string(text)
    if not cp.has_section("field"):
        raise ValueError("scenario file needs a [field] section")
    sc = cp["scenario"] if cp.has_section("scenario") else {}
    field = field_from_config(dict(cp["field"]))

    theta_raw = sc.get("theta", "none").strip().lower()
    theta = None if theta_raw in ("", "none") else float(theta_raw)

    src = cp["source"] if cp.has_section("source") else {}
    kind = src.get("kind", "extremal" if theta else "zero")
    if kind == "extremal":
        if theta is None:
            raise ValueError("extremal source needs scenario.theta")
        source, _ = extremal_source(field.p, theta, field.dim)
    else:
        source = SourceRule(kind, float(src.get("exponent", 0.0)), float(src.get("coeff", 1.0)))

    bd = cp["boundary"] if cp.has_section("boundary") else {}
    beta_raw = bd.get("beta", "auto")
    if beta_raw == "auto":
        beta = critical_exponent(field.p, theta) if theta else 1.0
    else:
        beta = float(beta_raw)
    boundary = BoundarySpec(bd.get("kind", "constant"), float(bd.get("value", 1.0 if theta else 0.0)),
                            beta, int(bd.get("seed", 0)))

    so = cp["solver"] if cp.has_section("solver") else {}
    solver_kw = {}
    if "epsilon_schedule" in so:
        solver_kw["epsilon_schedule"] = _floats(so["epsilon_schedule"])
    for key, conv in (("max_iters", int), ("grad_tol", float), ("method", str),
                      ("shrink", float), ("armijo_c", float)):
        if key in so:
            solver_kw[key] = conv(so[key])

    dg = cp["diagnostics"] if cp.has_section("diagnostics") else {}
    centers = None
    if "centers" in dg:
        centers = [_floats(c) for c in dg["centers"].split(";") if c.strip()]

    alpha0_raw = sc.get("alpha0", "measure")
    return Scenario(
        name=sc.get("name", "custom"),
        field=field,
        source=source,
        theta=theta,
        boundary=boundary,
        resolution=int(sc.get("resolution", 257)),
        solver=SolveConfig(**solver_kw),
        centers=centers,
        lam=float(dg.get("lam", 0.5)),
        min_nodes=int(dg.get("min_nodes", 100)),
        fit_window=None if dg.get("fit_window", "3") == "all" else int(dg.get("fit_window", 3)),
        alpha0=alpha0_raw if alpha0_raw == "measure" else float(alpha0_raw),
        alpha0_samples=int(sc.get("alpha0_samples", 3)),
        alpha0_resolution=int(sc.get("alpha0_resolution", 129)),
        tolerance=float(sc.get("tolerance", 0.05)),
        seed=int(sc.get("seed", 0)),
        load=sc.get("load", "cell"),
    )


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read scenario file {path}: {exc.strerror}") from exc
    return parse_scenario(text)
