"""Probability measures on a uniform one-dimensional grid.

Everything here works on plain weight vectors; a :class:`GridMeasure` is a
thin validated wrapper so that distances can refuse to compare measures that
live on different grids.

The total variation convention is the full variation of the signed measure,
``sum(|mu_i - nu_i|)``, which ranges over ``[0, 2]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllZeroMass, GridMismatch, NegativeWeight

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``lower + i * spacing`` for ``i in range(points)``."""

    lower: float
    upper: float
    points: int

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"grid needs lower < upper, got {self.lower}, {self.upper}")
        if int(self.points) != self.points or self.points < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.points}")
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))
        object.__setattr__(self, "points", int(self.points))

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return self.lower + np.arange(self.points) * self.spacing

    def index_of(self, x: float) -> int:
        """Index of the node nearest to ``x`` (clipped to the grid)."""
        i = int(round((x - self.lower) / self.spacing))
        return min(max(i, 0), self.points - 1)


@dataclass(frozen=True, eq=False)
class GridMeasure:
    grid: GridSpec
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.grid.points,):
            raise ValueError(f"expected {self.grid.points} weights, got shape {w.shape}")
        if np.any(w < 0):
            raise NegativeWeight("measure weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def __eq__(self, other):
        if not isinstance(other, GridMeasure):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.weights, other.weights)

    __hash__ = None

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def mean(self) -> float:
        return float(self.weights @ self.grid.nodes)

    # constructors -------------------------------------------------------

    @classmethod
    def point_mass(cls, grid: GridSpec, x: float = 0.0) -> "GridMeasure":
        w = np.zeros(grid.points)
        w[grid.index_of(x)] = 1.0
        return cls(grid, w)

    @classmethod
    def uniform(cls, grid: GridSpec, a: float | None = None, b: float | None = None) -> "GridMeasure":
        """Uniform weights on the nodes inside ``[a, b]`` (whole grid by default)."""
        x = grid.nodes
        a = grid.lower if a is None else a
        b = grid.upper if b is None else b
        eps = 1e-9 * grid.spacing
        w = ((x >= a - eps) & (x <= b + eps)).astype(float)
        return normalize(w, grid)[0]

    @classmethod
    def laplace(cls, grid: GridSpec, loc: float = 0.0, scale: float = 1.0) -> "GridMeasure":
        """Laplace-shaped weights; strictly positive on every node."""
        w = np.exp(-np.abs(grid.nodes - loc) / scale)
        return normalize(w, grid)[0]


def normalize(weights, grid: GridSpec | None = None) -> tuple[GridMeasure, float]:
    """Rescale nonnegative weights to a probability measure.

    Returns the measure together with the original total mass. If ``grid``
    is omitted the weights are placed on ``0, 1, ..., len-1``.

    >>> mu, mass = normalize([1, 1, 2])
    >>> mu.weights.tolist(), mass
    ([0.25, 0.25, 0.5], 4.0)
    """
    w = np.asarray(weights, dtype=float)
    if grid is None:
        grid = GridSpec(0, len(w) - 1, len(w))
    if np.any(w < 0):
        raise NegativeWeight("cannot normalize negative weights")
    mass = float(w.sum())
    if not mass > 0:
        raise AllZeroMass("all weights are zero")
    out = w / mass
    # one correction pass keeps the sum within a few ulps of 1
    out = out / out.sum()
    return GridMeasure(grid, out), mass


def _check_same_grid(mu: GridMeasure, nu: GridMeasure):
    if mu.grid != nu.grid:
        raise GridMismatch(f"measures live on different grids: {mu.grid} vs {nu.grid}")


def tv_distance(mu: GridMeasure, nu: GridMeasure) -> float:
    """Total variation ``sum |mu_i - nu_i|`` (range ``[0, 2]``)."""
    _check_same_grid(mu, nu)
    return float(np.abs(mu.weights - nu.weights).sum())


def birkhoff_distance(mu: GridMeasure, nu: GridMeasure) -> float:
    """Hilbert projective (Birkhoff) distance between two measures.

    ``ln max(mu/nu) + ln max(nu/mu)`` over the nodes charged by either
    measure. Nodes where both weights vanish are skipped; if one measure
    charges a node the other does not, the distance is ``inf``.
    """
    _check_same_grid(mu, nu)
    return _birkhoff(mu.weights, nu.weights)


def _birkhoff(a: np.ndarray, b: np.ndarray, axis=-1):
    """Vectorized Birkhoff distance on raw (not necessarily normalized) rows."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    support = (a > 0) | (b > 0)
    mismatch = np.any(support & ((a == 0) | (b == 0)), axis=axis)
    with np.errstate(divide="ignore", invalid="ignore"):
        la = np.where(support, np.log(np.where(a > 0, a, 1.0)), 0.0)
        lb = np.where(support, np.log(np.where(b > 0, b, 1.0)), 0.0)
        d = la - lb
        up = np.max(np.where(support, d, -np.inf), axis=axis)
        down = np.max(np.where(support, -d, -np.inf), axis=axis)
        out = up + down
    out = np.where(mismatch, np.inf, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def exp_moment(mu: GridMeasure, c: float) -> float:
    """``sum_i mu_i * exp(c * |x_i|)``."""
    if not c > 0:
        raise ValueError(f"moment exponent must be positive, got {c}")
    return float(mu.weights @ np.exp(c * np.abs(mu.grid.nodes)))
