"""Uniform lattice functions over [-1, 1]^dim with a B_1 node mask."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

__all__ = ["GridFunction", "INTERIOR", "BAND", "EXTERIOR", "node_mask", "grid_coordinates"]

INTERIOR, BAND, EXTERIOR = 0, 1, 2
BAND_WIDTH = 2


def grid_coordinates(dim: int, m: int) -> np.ndarray:
    """Node coordinates, shape ``(m,)*dim + (dim,)``."""
    axis = np.linspace(-1.0, 1.0, m)
    return np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1)


def node_mask(dim: int, m: int, band_width: int = BAND_WIDTH) -> np.ndarray:
    h = 2.0 / (m - 1)
    r = np.sqrt(np.sum(grid_coordinates(dim, m) ** 2, axis=-1))
    mask = np.full(r.shape, BAND, dtype=np.int8)
    mask[r < 1.0 - band_width * h] = INTERIOR
    mask[r >= 1.0] = EXTERIOR
    return mask


@dataclass
class GridFunction:
    """Scalar field on an ``m^dim`` lattice with spacing ``h = 2/(m-1)``.

    The mask is recomputed from coordinates: interior ``|X| < 1 - 2h``,
    boundary band ``1 - 2h <= |X| < 1``, exterior ``|X| >= 1``.
    """

    dim: int
    resolution: int
    values: np.ndarray
    cap: float = 0.0
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError("dim must be 2 or 3")
        if self.resolution < 3:
            raise ValueError("resolution must be >= 3")
        shape = (self.resolution,) * self.dim
        self.values = np.asarray(self.values, dtype=float).reshape(shape)
        self.mask = node_mask(self.dim, self.resolution)
        if not np.all(np.isfinite(self.values[self.mask != EXTERIOR])):
            raise ValueError("values must be finite on interior and band nodes")

    @property
    def h(self) -> float:
        return 2.0 / (self.resolution - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.resolution,) * self.dim

    @property
    def coordinates(self) -> np.ndarray:
        return grid_coordinates(self.dim, self.resolution)

    @property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.coordinates**2, axis=-1))

    @property
    def in_ball(self) -> np.ndarray:
        return self.mask != EXTERIOR

    @classmethod
    def from_function(cls, dim: int, resolution: int, func: Callable[[np.ndarray], np.ndarray],
                      cap: float = 0.0) -> "GridFunction":
        """Sample ``func(X)`` at the nodes; ``func`` gets an ``(..., dim)`` array."""
        X = grid_coordinates(dim, resolution)
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.asarray(func(X), dtype=float)
        return cls(dim, resolution, values, cap=cap)

    @classmethod
    def from_radial(cls, dim: int, resolution: int, profile: Callable, cap: float | None = None,
                    ) -> "GridFunction":
        """Sample ``profile(max(|X|, cap))``; cap defaults to h/2 (the origin cap)."""
        h = 2.0 / (resolution - 1)
        cap = 0.5 * h if cap is None else cap
        r = np.sqrt(np.sum(grid_coordinates(dim, resolution) ** 2, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.asarray(profile(np.maximum(r, cap)), dtype=float)
        return cls(dim, resolution, values, cap=cap)

    def like(self, values) -> "GridFunction":
        return GridFunction(self.dim, self.resolution, values, cap=self.cap)

    def check_compatible(self, other: "GridFunction") -> None:
        if (self.dim, self.resolution) != (other.dim, other.resolution):
            raise ValueError(
                f"grid mismatch: ({self.dim}, {self.resolution}) vs ({other.dim}, {other.resolution})"
            )

    # -- IO ----------------------------------------------------------------

    def header(self) -> str:
        return f"dim={self.dim} m={self.resolution} h={float(self.h)!r} cap={float(self.cap)!r}"

    def to_csv(self, path) -> None:
        idx = np.indices(self.shape).reshape(self.dim, -1).T
        names = ",".join("ijk"[: self.dim]) + ",value"
        with open(path, "w") as fh:
            fh.write(f"# {self.header()}\n{names}\n")
            for row, v in zip(idx, self.values.ravel().tolist()):
                fh.write(",".join(map(str, row)) + f",{v!r}\n")

    def to_binary(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write((self.header() + "\n").encode())
            fh.write(self.values.astype("<f8").tobytes())

    @classmethod
    def _parse_header(cls, line: str) -> dict[str, float]:
        try:
            fields = dict(item.split("=", 1) for item in line.lstrip("#").split())
            return {"dim": int(fields["dim"]), "m": int(fields["m"]),
                    "cap": float(fields.get("cap", 0.0))}
        except (KeyError, ValueError):
            raise ValueError(f"malformed grid header: {line.strip()!r}") from None

    @classmethod
    def from_csv(cls, path) -> "GridFunction":
        with open(path) as fh:
            meta = cls._parse_header(fh.readline())
            data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
        dim, m = meta["dim"], meta["m"]
        values = np.full((m,) * dim, np.nan)
        idx = data[:, :dim].astype(np.int64)
        values[tuple(idx.T)] = data[:, dim]
        return cls(dim, m, values, cap=meta["cap"])

    @classmethod
    def from_binary(cls, path) -> "GridFunction":
        raw = Path(path).read_bytes()
        head, _, body = raw.partition(b"\n")
        meta = cls._parse_header(head.decode())
        values = np.frombuffer(body, dtype="<f8").copy()
        return cls(meta["dim"], meta["m"], values, cap=meta["cap"])

    @classmethod
    def load(cls, path) -> "GridFunction":
        return cls.from_binary(path) if str(path).endswith((".bin", ".dat")) else cls.from_csv(path)
