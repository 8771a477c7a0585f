"""Weighted p-Laplacian vector fields a(X, xi) = w(X) |xi|^(p-2) xi and their audits.

A field is described by a :class:`FieldSpec` (exponent, dimension, coefficient,
ellipticity bounds). The coefficient may be a scalar weight or a symmetric
matrix; ``evaluate_field`` handles both. The two audits sample the structural
bounds and the continuity modulus numerically so that user-supplied
coefficients can be checked without symbolic derivatives.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "CoefficientField",
    "FieldSpec",
    "StructureAuditReport",
    "evaluate_field",
    "audit_structure",
    "continuity_modulus",
    "structural_constants",
    "field_from_config",
    "field_to_config",
]

COEFFICIENT_KINDS = ("constant", "checkerboard", "smooth-callable", "tabulated")

# named smooth weights usable from plain-text configs
SMOOTH_PROFILES: dict[str, Callable[[np.ndarray, Mapping[str, float]], np.ndarray]] = {
    "radial-linear": lambda r, q: q.get("base", 1.0) + q.get("slope", 1.0) * r,
    "radial-quadratic": lambda r, q: q.get("base", 1.0) + q.get("amp", 0.5) * r**2,
}

XI_FLOOR = 1e-8


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


@dataclass(frozen=True)
class CoefficientField:
    """Coefficient w(X) (scalar) or A(X) (symmetric matrix) on B_1.

    ``kind`` selects the evaluation rule; ``params`` carries its numbers.
    For ``smooth-callable`` either ``func`` (a vectorised callable taking an
    ``(..., dim)`` array) or ``params['profile']`` naming one of
    :data:`SMOOTH_PROFILES` must be given.
    """

    kind: str = "constant"
    params: Mapping[str, object] = dc_field(default_factory=dict)
    func: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.kind not in COEFFICIENT_KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "smooth-callable" and self.func is None:
            name = self.params.get("profile")
            if name not in SMOOTH_PROFILES:
                raise ValueError("smooth-callable needs func or a known params['profile']")
        if self.kind == "tabulated" and "values" not in self.params:
            raise ValueError("tabulated coefficient needs params['values']")

    @property
    def is_matrix(self) -> bool:
        if self.kind == "constant":
            return np.ndim(self.params.get("value", 1.0)) == 2
        if self.kind == "tabulated":
            return bool(self.params.get("matrix", False))
        if self.kind == "smooth-callable" and self.func is not None:
            return bool(self.params.get("matrix", False))
        return False

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        lead = X.shape[:-1]
        if self.kind == "constant":
            value = np.asarray(self.params.get("value", 1.0), dtype=float)
            return np.broadcast_to(value, lead + value.shape).copy()
        if self.kind == "checkerboard":
            low = float(self.params.get("low", 1.0))
            high = float(self.params.get("high", 2.0))
            cell = float(self.params.get("cell", 0.125))
            parity = np.sum(np.floor(X / cell).astype(np.int64), axis=-1) % 2
            return np.where(parity == 0, low, high)
        if self.kind == "smooth-callable":
            if self.func is not None:
                return np.asarray(self.func(X), dtype=float)
            profile = SMOOTH_PROFILES[self.params["profile"]]
            q = {k: float(v) for k, v in self.params.items() if k != "profile"}
            return profile(_norm(X), q)
        return self._tabulated(X)

    def _tabulated(self, X: np.ndarray) -> np.ndarray:
        # piecewise constant lookup on a uniform lattice over [-1, 1]^dim
        values = np.asarray(self.params["values"], dtype=float)
        dim = X.shape[-1]
        m = values.shape[0]
        idx = np.rint((X + 1.0) / 2.0 * (m - 1)).astype(np.int64)
        idx = np.clip(idx, 0, m - 1)
        return values[tuple(idx[..., a] for a in range(dim))]


@dataclass(frozen=True)
class FieldSpec:
    """Vector field ``a(X, xi) = w(X) |xi|^(p-2) xi`` with coefficient bounds.

    ``lambda_lo <= w <= lambda_hi`` (eigenvalues for matrix coefficients) is
    checked on a fixed lattice of sample points at construction.
    ``formal=True`` lifts the ``p < dim`` restriction for radial-oracle studies.
    """

    p: float
    dim: int = 2
    coefficient: CoefficientField = dc_field(default_factory=CoefficientField)
    lambda_lo: float = 1.0
    lambda_hi: float = 1.0
    formal: bool = False

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not self.formal and not self.p < self.dim:
            raise ValueError(f"p={self.p} outside 1 < p < dim={self.dim} (use formal=True)")
        if not 0 < self.lambda_lo <= self.lambda_hi:
            raise ValueError("need 0 < lambda_lo <= lambda_hi")
        lo, hi = self._coefficient_range()
        tol = 1e-12 * max(1.0, hi)
        if lo < self.lambda_lo - tol or hi > self.lambda_hi + tol:
            raise ValueError(
                f"coefficient range [{lo:g}, {hi:g}] not within [{self.lambda_lo:g}, {self.lambda_hi:g}]"
            )

    def _coefficient_range(self) -> tuple[float, float]:
        pts = _lattice_points(self.dim, 17)
        vals = self.coefficient(pts)
        if self.coefficient.is_matrix:
            sym = 0.5 * (vals + np.swapaxes(vals, -1, -2))
            eig = np.linalg.eigvalsh(sym)
            return float(eig.min()), float(eig.max())
        return float(np.min(vals)), float(np.max(vals))

    def weight(self, X) -> np.ndarray:
        return self.coefficient(X)


def _lattice_points(dim: int, m: int) -> np.ndarray:
    axis = np.linspace(-1.0, 1.0, m)
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    return mesh[_norm(mesh) < 1.0]


def evaluate_field(spec: FieldSpec, X, xi) -> np.ndarray:
    """Return a(X, xi); broadcasts over leading axes and maps xi = 0 to 0."""
    X = np.asarray(X, dtype=float)
    xi = np.asarray(xi, dtype=float)
    mag = _norm(xi)
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(mag > 0, mag ** (spec.p - 2.0), 0.0)
    coeff = spec.coefficient(X)
    if spec.coefficient.is_matrix:
        flux = np.einsum("...ij,...j->...i", coeff, xi)
    else:
        flux = np.asarray(coeff)[..., None] * xi
    return factor[..., None] * flux


def structural_constants(spec: FieldSpec) -> tuple[float, float]:
    """Structural bounds (lambda, Lambda) implied by the coefficient bounds.

    For w|xi|^(p-2)xi the Jacobian has eigenvalues w|xi|^(p-2) and
    (p-1)w|xi|^(p-2), hence the min/max with p-1.
    """
    return spec.lambda_lo * min(1.0, spec.p - 1.0), spec.lambda_hi * max(1.0, spec.p - 1.0)


@dataclass
class StructureAuditReport:
    upper_constant: float
    lower_constant: float
    lam: float
    Lam: float
    upper_pass: bool
    lower_pass: bool
    samples: int
    flagged: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.upper_pass and self.lower_pass


def _sample_ball(rng: np.random.Generator, n: int, dim: int, radius: float = 1.0) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    g /= _norm(g)[:, None]
    r = radius * rng.random(n) ** (1.0 / dim)
    return g * r[:, None]


def _sample_xi(rng, n, dim, xi_range):
    g = rng.standard_normal((n, dim))
    g /= _norm(g)[:, None]
    lo, hi = np.log10(xi_range[0]), np.log10(xi_range[1])
    return g * (10.0 ** rng.uniform(lo, hi, n))[:, None]


def _jacobian_fd(spec: FieldSpec, X: np.ndarray, xi: np.ndarray) -> np.ndarray:
    # central differences, step 1e-5 * max(|xi|, 1)
    n, dim = xi.shape
    step = 1e-5 * np.maximum(_norm(xi), 1.0)
    J = np.empty((n, dim, dim))
    for b in range(dim):
        e = np.zeros(dim)
        e[b] = 1.0
        plus = evaluate_field(spec, X, xi + step[:, None] * e)
        minus = evaluate_field(spec, X, xi - step[:, None] * e)
        J[:, :, b] = (plus - minus) / (2.0 * step[:, None])
    return J


def audit_structure(
    spec: FieldSpec,
    sample_count: int = 2000,
    lam: float | None = None,
    Lam: float | None = None,
    seed: int = 0,
    xi_range: tuple[float, float] = (1e-2, 1e2),
    tolerance: float = 1e-4,
) -> StructureAuditReport:
    """Sample the growth and monotonicity bounds of the field.

    Upper bound: ``max(|a(X,xi)|, |d_xi a(X,xi)| |xi|) <= Lam |xi|^(p-1)``.
    Lower bound: ``<d_xi a(X,xi1) xi2, xi2> >= lam |xi1|^(p-2) |xi2|^2``, checked
    for all xi2 at once through the smallest eigenvalue of the symmetrised
    finite-difference Jacobian.

    ``lam``/``Lam`` default to :func:`structural_constants`. Samples with
    ``|xi1| < XI_FLOOR`` are counted in ``flagged`` and skipped.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    default_lam, default_Lam = structural_constants(spec)
    lam = default_lam if lam is None else lam
    Lam = default_Lam if Lam is None else Lam
    rng = np.random.default_rng(seed)
    X = _sample_ball(rng, sample_count, spec.dim)
    xi = _sample_xi(rng, sample_count, spec.dim, xi_range)
    mag = _norm(xi)
    keep = mag >= XI_FLOOR
    flagged = int(np.count_nonzero(~keep))
    X, xi, mag = X[keep], xi[keep], mag[keep]

    a = evaluate_field(spec, X, xi)
    J = _jacobian_fd(spec, X, xi)
    jac_norm = np.linalg.norm(J, ord=2, axis=(1, 2))
    scale = mag ** (spec.p - 1.0)
    upper = np.maximum(_norm(a), jac_norm * mag) / scale

    sym = 0.5 * (J + np.swapaxes(J, 1, 2))
    lower = np.linalg.eigvalsh(sym)[:, 0] / mag ** (spec.p - 2.0)

    upper_constant = float(upper.max()) if upper.size else 0.0
    lower_constant = float(lower.min()) if lower.size else np.inf
    return StructureAuditReport(
        upper_constant=upper_constant,
        lower_constant=lower_constant,
        lam=lam,
        Lam=Lam,
        upper_pass=upper_constant <= Lam * (1.0 + tolerance),
        lower_pass=lower_constant >= lam * (1.0 - tolerance),
        samples=int(keep.sum()),
        flagged=flagged,
        tolerance=tolerance,
    )


def continuity_modulus(
    spec: FieldSpec,
    radii,
    samples_per_radius: int = 4000,
    seed: int = 0,
) -> list[tuple[float, float]]:
    """Sampled modulus ``sup |a(X,xi) - a(Y,xi)| / |xi|^(p-1)`` over ``|X - Y| <= rho``.

    Half the pairs sit at distance exactly rho, half uniformly inside the
    rho-ball. Output is made nondecreasing in rho by a running max.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any((radii <= 0) | (radii >= 1)):
        raise ValueError("radii must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    order = np.argsort(radii)
    raw = np.empty(len(radii))
    n = samples_per_radius
    for i in order:
        rho = radii[i]
        X = _sample_ball(rng, n, spec.dim, 1.0 - rho)
        offsets = _sample_ball(rng, n, spec.dim, rho)
        half = n // 2
        offsets[:half] *= rho / np.maximum(_norm(offsets[:half]), 1e-300)[:, None]
        Y = X + offsets
        xi = _sample_xi(rng, n, spec.dim, (1e-1, 1e1))
        diff = evaluate_field(spec, X, xi) - evaluate_field(spec, Y, xi)
        raw[i] = np.max(_norm(diff) / _norm(xi) ** (spec.p - 1.0))
    monotone = np.maximum.accumulate(raw[order])
    out = np.empty_like(raw)
    out[order] = monotone
    return [(float(r), float(m)) for r, m in zip(radii, out)]


# -- plain-text config -------------------------------------------------------

def _format_params(params: Mapping[str, object]) -> str:
    parts = []
    for key, value in params.items():
        if key == "values":
            raise ValueError("tabulated coefficients are not serialisable to key=value config")
        if np.ndim(value) == 2:
            value = ";".join(" ".join(repr(float(x)) for x in row) for row in np.asarray(value))
        parts.append(f"{key}:{value}")
    return ",".join(parts)


def _parse_params(text: str) -> dict[str, object]:
    params: dict[str, object] = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, _, raw = item.partition(":")
        key, raw = key.strip(), raw.strip()
        if ";" in raw or (key == "value" and " " in raw):
            params[key] = np.array([[float(x) for x in row.split()] for row in raw.split(";")])
            continue
        try:
            params[key] = float(raw)
        except ValueError:
            params[key] = raw
    return params


def field_to_config(spec: FieldSpec) -> str:
    if spec.coefficient.func is not None:
        raise ValueError("fields with Python callables cannot be serialised")
    lines = [
        f"p={spec.p!r}",
        f"dim={spec.dim}",
        f"coeff.kind={spec.coefficient.kind}",
        f"coeff.params={_format_params(spec.coefficient.params)}",
        f"lambda_lo={spec.lambda_lo!r}",
        f"lambda_hi={spec.lambda_hi!r}",
    ]
    if spec.formal:
        lines.append("formal=true")
    return "\n".join(lines) + "\n"


def field_from_config(text: str | Mapping[str, str]) -> FieldSpec:
    """Parse ``key=value`` lines (or an already-split mapping) into a FieldSpec."""
    if isinstance(text, str):
        entries = {}
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"malformed config line: {line!r}")
            entries[key.strip()] = value.strip()
    else:
        entries = dict(text)
    try:
        p = float(entries["p"])
    except KeyError:
        raise ValueError("field config missing 'p'") from None
    coefficient = CoefficientField(
        kind=entries.get("coeff.kind", "constant"),
        params=_parse_params(entries.get("coeff.params", "")),
    )
    return FieldSpec(
        p=p,
        dim=int(entries.get("dim", 2)),
        coefficient=coefficient,
        lambda_lo=float(entries.get("lambda_lo", 1.0)),
        lambda_hi=float(entries.get("lambda_hi", 1.0)),
        formal=entries.get("formal", "false").lower() in ("1", "true", "yes"),
    )
