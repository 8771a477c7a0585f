"""Function-space estimators: weak-L^q, L^q, mean oscillation, BMO, John-Nirenberg.

Grid functions contribute only nodes with ``|X| < 1`` and each node carries
measure ``h^dim``. Ball averages are plain node averages over the nodes
inside the ball.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.special import gamma

from .grid import EXTERIOR, GridFunction

__all__ = [
    "SampleCloud",
    "BallSpec",
    "JNMoment",
    "NormRecord",
    "unit_ball_volume",
    "uniform_ball_samples",
    "weak_lebesgue_norm",
    "lebesgue_norm",
    "ball_nodes",
    "mean_oscillation",
    "bmo_seminorm",
    "default_ball_family",
    "john_nirenberg_moment",
    "write_norm_csv",
]


def unit_ball_volume(dim: int) -> float:
    return float(np.pi ** (dim / 2) / gamma(dim / 2 + 1))


@dataclass
class SampleCloud:
    points: np.ndarray
    values: np.ndarray
    weight: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.values = np.asarray(self.values, dtype=float).ravel()
        if len(self.points) != len(self.values):
            raise ValueError("points and values differ in length")
        if not self.weight > 0:
            raise ValueError("weight must be positive")


def uniform_ball_samples(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((n, dim))
    g /= np.linalg.norm(g, axis=1)[:, None]
    return g * (rng.random(n) ** (1.0 / dim))[:, None]


@dataclass(frozen=True)
class BallSpec:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


def _samples(f) -> tuple[np.ndarray, float]:
    if isinstance(f, SampleCloud):
        values, weight = f.values, f.weight
    elif isinstance(f, GridFunction):
        values, weight = f.values[f.mask != EXTERIOR], f.h**f.dim
    else:
        raise TypeError(f"expected SampleCloud or GridFunction, got {type(f).__name__}")
    if values.size == 0:
        raise ValueError("no samples")
    return values, weight


def weak_lebesgue_norm(f, q: float, min_count: int = 1) -> float:
    """Order-statistic weak-L^q norm ``max_k |v|_(k) (k * weight)^(1/q)``.

    This is the exact weak norm of the empirical measure. ``min_count``
    restricts the maximum to superlevel sets holding at least that many
    samples; sets below it are not resolved by the sample and are skipped
    (``min_count=1`` keeps every order statistic).
    """
    if not q > 0:
        raise ValueError("q must be positive")
    values, weight = _samples(f)
    mags = np.sort(np.abs(values))[::-1]
    k = np.arange(1, mags.size + 1)
    est = mags * (k * weight) ** (1.0 / q)
    start = min(max(int(min_count), 1), mags.size) - 1
    return float(np.max(est[start:]))


def lebesgue_norm(f, q: float) -> float:
    if not q > 0:
        raise ValueError("q must be positive")
    values, weight = _samples(f)
    return float((np.sum(np.abs(values) ** q) * weight) ** (1.0 / q))


def ball_nodes(u: GridFunction, ball: BallSpec) -> np.ndarray:
    center = np.asarray(ball.center, dtype=float)
    if center.shape != (u.dim,):
        raise ValueError("ball center dimension does not match grid")
    dist = np.sqrt(np.sum((u.coordinates - center) ** 2, axis=-1))
    sel = (dist < ball.radius) & (u.mask != EXTERIOR)
    if not sel.any():
        raise ValueError(f"ball {ball} contains no grid nodes")
    return sel


def mean_oscillation(u: GridFunction, ball: BallSpec, exponent: float = 1.0) -> float:
    """``(avg_B |u - avg_B u|^e)^(1/e)`` over the nodes of the ball."""
    if exponent < 1:
        raise ValueError("exponent must be >= 1")
    vals = u.values[ball_nodes(u, ball)]
    dev = np.abs(vals - vals.mean())
    return float(np.mean(dev**exponent) ** (1.0 / exponent))


def default_ball_family(
    u: GridFunction,
    min_nodes: int = 100,
    lattice: int = 5,
    ratio: float = 0.5,
    max_levels: int = 30,
) -> list[BallSpec]:
    """Centers on a ``lattice^dim`` grid over B_{1/2}, radii ``ratio^j``.

    Balls holding fewer than ``min_nodes`` nodes or reaching the boundary
    band (``|c| + r >= 1 - 2h``) are left out.
    """
    axis = np.linspace(-0.5, 0.5, lattice)
    centers = np.stack(np.meshgrid(*([axis] * u.dim), indexing="ij"), -1).reshape(-1, u.dim)
    centers = centers[np.linalg.norm(centers, axis=1) <= 0.5 + 1e-12]
    limit = 1.0 - 2.0 * u.h
    family = []
    for j in range(1, max_levels + 1):
        r = ratio**j
        if unit_ball_volume(u.dim) * r**u.dim / u.h**u.dim < min_nodes:
            break
        for c in centers:
            if np.linalg.norm(c) + r >= limit:
                continue
            ball = BallSpec(tuple(c), r)
            if np.count_nonzero(ball_nodes(u, ball)) >= min_nodes:
                family.append(ball)
    return family


def bmo_seminorm(u: GridFunction, ball_family: Sequence[BallSpec] | None = None) -> float:
    family = default_ball_family(u) if ball_family is None else ball_family
    if not family:
        raise ValueError("empty ball family")
    return max(mean_oscillation(u, b, 1.0) for b in family)


class JNMoment(NamedTuple):
    value: float
    overflow: bool


def john_nirenberg_moment(u: GridFunction, ball: BallSpec, alpha: float) -> JNMoment:
    """Node average of ``exp(alpha |u - avg_B u|)`` on the ball.

    On overflow the value is ``inf`` and ``overflow`` is set.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    vals = u.values[ball_nodes(u, ball)]
    expo = alpha * np.abs(vals - vals.mean())
    top = expo.max()
    # factor out the largest exponent to stay finite as long as possible
    log_mean = top + np.log(np.mean(np.exp(expo - top)))
    if log_mean > np.log(np.finfo(float).max):
        return JNMoment(float("inf"), True)
    return JNMoment(float(np.exp(log_mean)), False)


@dataclass
class NormRecord:
    quantity: str
    parameters: str
    value: float
    resolution: int | str
    cap: float

    def row(self) -> list[str]:
        return [self.quantity, self.parameters, repr(float(self.value)), str(self.resolution),
                repr(float(self.cap))]


NORM_COLUMNS = ["quantity", "parameters", "value", "resolution", "cap"]


def write_norm_csv(records: Iterable[NormRecord], path_or_handle) -> None:
    def _write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(NORM_COLUMNS)
        for rec in records:
            writer.writerow(rec.row())

    if hasattr(path_or_handle, "write"):
        _write(path_or_handle)
    else:
        with open(path_or_handle, "w", newline="") as fh:
            _write(fh)
