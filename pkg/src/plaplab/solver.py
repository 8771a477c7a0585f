"""Variational solver for ``-div(w(X) |grad u|^(p-2) grad u) = f`` on a lattice over B_1.

The discrete energy is

    E(u) = sum_cells sum_corners h^d/2^d * w(cell)/p * (|g_c u|^2 + eps^2)^(p/2)
           - h^d * sum_{nodes in B_1} f u,

where ``g_c u`` is the one-sided difference gradient of the cell taken at
corner ``c`` (the ``d`` cell edges meeting there). Averaging over the ``2^d``
corners keeps the stencil symmetric; for ``p = 2`` the gradient of ``E`` is
exactly ``(-Delta_h u - f) h^d`` with the standard (2d+1)-point Laplacian.
All difference operators are stacked in one sparse matrix ``B`` and the
energy gradient is assembled as ``B.T @ (flux)``.

Minimisation runs over an epsilon-continuation schedule. Each stage is a
descent method with Armijo backtracking; the direction is either the plain
negative gradient (``method="gradient"``) or the Newton direction of the
(convex) discrete energy (``method="newton"``, default).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .field import FieldSpec
from .grid import EXTERIOR, INTERIOR, GridFunction, grid_coordinates

__all__ = [
    "SolveConfig",
    "SolveReport",
    "discrete_energy",
    "energy_gradient",
    "energy_hessian",
    "solve",
    "solve_linear_reference",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveConfig:
    epsilon_schedule: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4)
    max_iters: int = 200
    grad_tol: float = 1e-8
    shrink: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 60
    method: str = "newton"

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilon_schedule)
        if not eps:
            raise ValueError("epsilon_schedule must not be empty")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilon_schedule must be strictly decreasing")
        if eps[-1] < 0:
            raise ValueError("epsilon values must be >= 0")
        if self.method not in ("newton", "gradient"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 < self.shrink < 1 or not 0 < self.armijo_c < 1:
            raise ValueError("line search needs shrink, armijo_c in (0, 1)")
        object.__setattr__(self, "epsilon_schedule", eps)


@dataclass
class SolveReport:
    solution: GridFunction
    energy_history: list[float]
    iterations: int
    final_grad_norm: float
    converged: bool
    stage_ends: list[int] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def summary(self) -> dict[str, object]:
        return {
            "dim": self.solution.dim,
            "resolution": self.solution.resolution,
            "h": self.solution.h,
            "iterations": self.iterations,
            "final_grad_norm": self.final_grad_norm,
            "final_energy": self.energy_history[-1] if self.energy_history else float("nan"),
            "converged": self.converged,
            "flags": ";".join(self.flags) or "none",
        }

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.summary().items())


# -- discretisation ----------------------------------------------------------

@lru_cache(maxsize=8)
def _difference_operator(dim: int, m: int) -> sp.csr_matrix:
    """Rows ordered (corner, axis, cell); each row is one edge difference / h."""
    h = 2.0 / (m - 1)
    cells = np.indices((m - 1,) * dim).reshape(dim, -1)
    ncells = cells.shape[1]
    rows, cols, vals = [], [], []
    block = 0
    for corner in product((0, 1), repeat=dim):
        for axis in range(dim):
            hi = np.array(corner)
            lo = np.array(corner)
            hi[axis], lo[axis] = 1, 0
            n_hi = np.ravel_multi_index(cells + hi[:, None], (m,) * dim)
            n_lo = np.ravel_multi_index(cells + lo[:, None], (m,) * dim)
            r = block * ncells + np.arange(ncells)
            rows += [r, r]
            cols += [n_hi, n_lo]
            vals += [np.full(ncells, 1.0 / h), np.full(ncells, -1.0 / h)]
            block += 1
    B = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(block * ncells, m**dim),
    )
    return B


def _cell_weights(field: FieldSpec, dim: int, m: int) -> np.ndarray:
    if field.coefficient.is_matrix:
        raise NotImplementedError("the grid solver handles scalar coefficients only")
    h = 2.0 / (m - 1)
    centres = grid_coordinates(dim, m)[(slice(0, m - 1),) * dim] + 0.5 * h
    w = np.asarray(field.coefficient(centres.reshape(-1, dim)), dtype=float)
    return np.broadcast_to(w, ((m - 1) ** dim,)).copy()


class _Problem:
    """Energy, gradient and Hessian for fixed (f, field, eps) on one grid."""

    def __init__(self, f: GridFunction, field: FieldSpec, epsilon: float):
        if field.dim != f.dim:
            raise ValueError(f"field dim {field.dim} does not match grid dim {f.dim}")
        self.dim, self.m, self.h = f.dim, f.resolution, f.h
        self.p = float(field.p)
        self.eps2 = float(epsilon) ** 2
        self.B = _difference_operator(self.dim, self.m)
        self.ncells = (self.m - 1) ** self.dim
        self.ncorner = 2**self.dim
        self.cell_vol = self.h**self.dim / self.ncorner
        self.w = _cell_weights(field, self.dim, self.m)
        in_ball = (f.mask != EXTERIOR).ravel()
        self.load = np.where(in_ball, np.nan_to_num(f.values.ravel()), 0.0) * self.h**self.dim
        self.free = f.mask.ravel() == INTERIOR

    def gradients(self, u: np.ndarray) -> np.ndarray:
        return (self.B @ u).reshape(self.ncorner, self.dim, self.ncells)

    def energy(self, u: np.ndarray) -> float:
        g = self.gradients(u)
        s = np.sum(g * g, axis=1) + self.eps2
        flux = self.cell_vol / self.p * np.sum(self.w * s ** (self.p / 2.0))
        return float(flux - self.load @ u)

    def _stiffness(self, s: np.ndarray) -> np.ndarray:
        if self.p == 2.0:
            k = np.ones_like(s)
        else:
            # |g|^(p-2) g -> 0 as g -> 0 for every p > 1
            with np.errstate(divide="ignore"):
                k = np.where(s > 0, s ** ((self.p - 2.0) / 2.0), 0.0)
        return self.cell_vol * self.w * k

    def gradient_parts(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Flux and load parts of dE/du; the flux is returned at every node."""
        g = self.gradients(u)
        s = np.sum(g * g, axis=1) + self.eps2
        flux = self.B.T @ (self._stiffness(s)[:, None, :] * g).ravel()
        return flux, -self.load * self.free

    def gradient(self, u: np.ndarray) -> np.ndarray:
        flux, load = self.gradient_parts(u)
        return flux * self.free + load

    def residual(self, u: np.ndarray) -> tuple[np.ndarray, float]:
        """Gradient and its size relative to the flux (fixed nodes included) plus load."""
        flux, load = self.gradient_parts(u)
        grad = flux * self.free + load
        return grad, _relative_norm(grad, flux, load)

    def energy_change(self, u: np.ndarray, du: np.ndarray) -> float:
        """E(u + du) - E(u) without cancellation between two large sums."""
        g = self.gradients(u)
        d = self.gradients(du)
        s0 = np.sum(g * g, axis=1) + self.eps2
        ds = np.sum(d * (2.0 * g + d), axis=1)
        half_p = self.p / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(
                s0 > 0,
                s0**half_p * np.expm1(half_p * np.log1p(ds / np.where(s0 > 0, s0, 1.0))),
                np.maximum(ds, 0.0) ** half_p,
            )
        flux = self.cell_vol / self.p * np.sum(self.w * rel)
        return float(flux - self.load @ du)

    def hessian(self, u: np.ndarray) -> sp.csr_matrix:
        g = self.gradients(u)
        s = np.sum(g * g, axis=1) + self.eps2
        k = self._stiffness(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_s = np.where(s > 0, 1.0 / s, 0.0)
        d, nc, C = self.dim, self.ncells, self.ncorner
        base = (np.arange(C)[:, None] * d * nc) + np.arange(nc)[None, :]
        rows, cols, vals = [], [], []
        p2 = self.p - 2.0
        for a in range(d):
            for b in range(d):
                entry = k * (p2 * g[:, a] * g[:, b] * inv_s + (a == b))
                rows.append((base + a * nc).ravel())
                cols.append((base + b * nc).ravel())
                vals.append(entry.ravel())
        K = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.B.shape[0],) * 2,
        )
        return (self.B.T @ K @ self.B).tocsr()


def _values(u: GridFunction) -> np.ndarray:
    return np.ascontiguousarray(u.values, dtype=float).ravel()


def discrete_energy(u: GridFunction, f: GridFunction, field: FieldSpec, epsilon: float = 0.0) -> float:
    u.check_compatible(f)
    return _Problem(f, field, epsilon).energy(_values(u))


def energy_gradient(u: GridFunction, f: GridFunction, field: FieldSpec, epsilon: float = 0.0
                    ) -> GridFunction:
    """dE/du at interior nodes (zero elsewhere), as a grid function."""
    u.check_compatible(f)
    g = _Problem(f, field, epsilon).gradient(_values(u))
    return GridFunction(u.dim, u.resolution, g.reshape(u.shape))


def energy_hessian(u: GridFunction, f: GridFunction, field: FieldSpec, epsilon: float) -> sp.csr_matrix:
    """Full nodal Hessian of the discrete energy (free and fixed nodes)."""
    u.check_compatible(f)
    return _Problem(f, field, epsilon).hessian(_values(u))


# -- boundary data -----------------------------------------------------------

BoundaryRule = Callable[[np.ndarray], np.ndarray] | GridFunction | float


def _boundary_values(rule: BoundaryRule, f: GridFunction) -> np.ndarray:
    if isinstance(rule, GridFunction):
        rule.check_compatible(f)
        vals = rule.values.ravel().copy()
    elif callable(rule):
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.asarray(rule(f.coordinates), dtype=float).reshape(-1)
    else:
        vals = np.full(f.values.size, float(rule))
    fixed = f.mask.ravel() != INTERIOR
    band = f.mask.ravel() != EXTERIOR
    if not np.all(np.isfinite(vals[fixed & band])):
        raise ValueError("boundary rule must be finite on boundary-band nodes")
    u = np.zeros(f.values.size)
    u[fixed] = np.nan_to_num(vals[fixed])
    return u


def _relative_norm(grad: np.ndarray, flux: np.ndarray, load: np.ndarray) -> float:
    # the flux at fixed nodes (boundary reactions) keeps the scale nonzero when f = 0
    num = np.linalg.norm(grad)
    if num == 0.0:
        return 0.0
    return float(num / (np.linalg.norm(flux) + np.linalg.norm(load)))


def _newton_direction(problem: _Problem, u: np.ndarray, grad: np.ndarray) -> np.ndarray | None:
    free = problem.free
    H = problem.hessian(u)[free][:, free]
    try:
        step = spla.spsolve(H.tocsc(), -grad[free])
    except RuntimeError:
        return None
    if not np.all(np.isfinite(step)):
        return None
    d = np.zeros_like(u)
    d[free] = step
    return d


def solve_linear_reference(f: GridFunction, field: FieldSpec, boundary: BoundaryRule) -> GridFunction:
    """Direct sparse solve of the p = 2 problem with the same weights."""
    from dataclasses import replace

    linear = replace(field, p=2.0, formal=True)
    problem = _Problem(f, linear, 0.0)
    u = _boundary_values(boundary, f)
    d = _newton_direction(problem, u, problem.gradient(u))
    if d is None:
        raise RuntimeError("linear solve failed")
    return f.like((u + d).reshape(f.shape))


def solve(
    f: GridFunction,
    field: FieldSpec,
    boundary: BoundaryRule = 0.0,
    config: SolveConfig | None = None,
) -> SolveReport:
    """Minimise the discrete energy with Dirichlet data on all non-interior nodes."""
    config = config or SolveConfig()
    u = solve_linear_reference(f, field, boundary).values.ravel().copy()
    history: list[float] = []
    stage_ends: list[int] = []
    flags: list[str] = []
    iterations = 0
    rel = np.inf
    schedule = (0.0,) if field.p == 2.0 else config.epsilon_schedule

    for eps in schedule:
        problem = _Problem(f, field, eps)
        energy = problem.energy(u)
        history.append(energy)
        step = 1.0
        for _ in range(config.max_iters):
            grad, rel = problem.residual(u)
            if rel <= config.grad_tol:
                break
            d = None
            if config.method == "newton":
                d = _newton_direction(problem, u, grad)
                step = 1.0
            slope = float(grad @ d) if d is not None else 0.0
            if d is None or slope >= 0:
                d, slope = -grad, -float(grad @ grad)
            for _ in range(config.max_backtracks):
                delta = problem.energy_change(u, step * d)
                if delta <= config.armijo_c * step * slope:
                    break
                step *= config.shrink
            else:
                flags.append(f"line-search-stalled(eps={eps:g})")
                break
            u = u + step * d
            energy += delta
            history.append(energy)
            iterations += 1
            if config.method == "gradient":
                step = min(step / config.shrink, 1e12)
        stage_ends.append(len(history))
        log.debug("eps=%g iterations=%d rel_grad=%.3e", eps, iterations, rel)

    problem = _Problem(f, field, schedule[-1])
    _, rel = problem.residual(u)
    converged = rel <= config.grad_tol
    if not converged:
        flags.append("not-converged")
    solution = GridFunction(f.dim, f.resolution, u.reshape(f.shape), cap=f.cap)
    return SolveReport(solution, history, iterations, rel, converged, stage_ends, flags)
