"""Additive-noise hidden Markov models and their grid discretization.

The continuous model is

    X[k+1] = X[k] + b(X[k]) + xi[k+1]
    Y[k]   = h(X[k]) + V[k]

with IID noises ``xi ~ q_xi`` and ``V ~ q_v``. :func:`discretize` turns it into
a finite transition matrix on a :class:`~filterlab.measure.GridSpec` plus a
likelihood evaluator, which is what the filters actually run on.

Drift and observation maps are plain callables; they must accept numpy
arrays and act elementwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import TruncationExcess
from .measure import GridMeasure, GridSpec

ArrayFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# noise densities
# ---------------------------------------------------------------------------


class NoiseDensity:
    """Base class for one-dimensional noise densities.

    Subclasses provide ``pdf``, ``cdf`` and ``ppf``; sampling goes through
    the inverse CDF so a seed fully determines the draws.
    """

    def pdf(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def ppf(self, u):
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.ppf(rng.random(size))

    def mean(self) -> float:
        raise NotImplementedError

    def exp_moment_bound(self) -> float:
        """Supremum of ``eps`` with ``E exp(eps |xi|) < inf`` (0 if none, inf if all)."""
        raise NotImplementedError


@dataclass(frozen=True)
class Laplace(NoiseDensity):
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("Laplace scale must be positive")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-np.abs(x) / self.scale) / (2.0 * self.scale)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        e = 0.5 * np.exp(-np.abs(x) / self.scale)
        return np.where(x < 0, e, 1.0 - e)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(u < 0.5, self.scale * np.log(2.0 * u),
                            -self.scale * np.log(2.0 * (1.0 - u)))

    def mean(self):
        return 0.0

    def exp_moment_bound(self):
        return 1.0 / self.scale


@dataclass(frozen=True)
class PolynomialTail(NoiseDensity):
    """``c * (1 + |y|)**-m`` for ``|y| >= M``, flat at the boundary value inside.

    The flat core keeps the density continuous and strictly positive.
    """

    m: float = 3.0
    M: float = 1.0

    def __post_init__(self):
        if not self.m > 1:
            raise ValueError("polynomial tail exponent must exceed 1")
        if not self.M > 0:
            raise ValueError("core radius must be positive")

    @property
    def _core_height(self):
        return (1.0 + self.M) ** -self.m

    @property
    def _const(self):
        half = self.M * self._core_height + (1.0 + self.M) ** (1.0 - self.m) / (self.m - 1.0)
        return 1.0 / (2.0 * half)

    def pdf(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        return self._const * (1.0 + np.maximum(a, self.M)) ** -self.m

    def _upper_mass(self, a):
        # mass of [a, inf) for a >= 0
        c, m, M = self._const, self.m, self.M
        tail = c * (1.0 + np.maximum(a, M)) ** (1.0 - m) / (m - 1.0)
        core = c * self._core_height * np.maximum(M - a, 0.0)
        return tail + core

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        up = self._upper_mass(np.abs(x))
        return np.where(x < 0, up, 1.0 - up)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        p = np.minimum(u, 1.0 - u)  # upper-tail mass of |x|
        c, m, M = self._const, self.m, self.M
        p_core_edge = c * (1.0 + M) ** (1.0 - m) / (m - 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            a_tail = (p * (m - 1.0) / c) ** (1.0 / (1.0 - m)) - 1.0
            a_core = M - (p - p_core_edge) / (c * self._core_height)
        a = np.where(p <= p_core_edge, a_tail, a_core)
        return np.where(u < 0.5, -a, a)

    def mean(self):
        return 0.0 if self.m > 2 else float("nan")

    def exp_moment_bound(self):
        return 0.0


@dataclass(frozen=True, eq=False)
class Tabulated(NoiseDensity):
    """Density given by node values on a grid, linearly interpolated, zero outside.

    Values are rescaled so that ``sum(values) * spacing == 1``; sampling
    draws grid nodes with those probabilities. Zeros are allowed (they make
    the density violate positivity, which the assumption checks detect).
    """

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.points,):
            raise ValueError("one value per grid node required")
        if np.any(v < 0) or not v.sum() > 0:
            raise ValueError("tabulated density needs nonnegative values with positive mass")
        v = v / (v.sum() * self.grid.spacing)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def point_mass(cls, grid: GridSpec, x: float = 0.0) -> "Tabulated":
        v = np.zeros(grid.points)
        v[grid.index_of(x)] = 1.0
        return cls(grid, v)

    @property
    def _probs(self):
        return self.values * self.grid.spacing

    def pdf(self, x):
        return np.interp(np.asarray(x, dtype=float), self.grid.nodes, self.values, left=0.0, right=0.0)

    def cdf(self, x):
        h = self.grid.spacing
        edges = np.concatenate([[self.grid.lower - h / 2], self.grid.nodes + h / 2])
        cum = np.concatenate([[0.0], np.cumsum(self._probs)])
        return np.interp(np.asarray(x, dtype=float), edges, cum, left=0.0, right=1.0)

    def ppf(self, u):
        cum = np.cumsum(self._probs)
        idx = np.searchsorted(cum, np.asarray(u, dtype=float) * cum[-1], side="right")
        return self.grid.nodes[np.minimum(idx, self.grid.points - 1)]

    def mean(self):
        return float(self._probs @ self.grid.nodes)

    def exp_moment_bound(self):
        # compact support
        return float("inf")


# ---------------------------------------------------------------------------
# continuous model and perturbations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    drift: ArrayFn
    obs_map: ArrayFn
    signal_noise: NoiseDensity
    obs_noise: NoiseDensity
    name: str = "custom"


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PerturbationSpec:
    """Differences between a wrong model and the true one.

    ``drift_delta`` is expected to vanish for ``|x| > radius``.
    """

    drift_delta: ArrayFn = _zero
    obs_delta: ArrayFn = _zero
    radius: float = float("inf")
    signal_noise: Optional[NoiseDensity] = None
    obs_noise: Optional[NoiseDensity] = None

    @classmethod
    def bump(cls, size: float, radius: float = 2.0, **noise) -> "PerturbationSpec":
        """Constant drift shift ``size`` on ``|x| <= radius``, nothing outside."""

        def delta(x):
            x = np.asarray(x, dtype=float)
            return np.where(np.abs(x) <= radius, size, 0.0)

        return cls(drift_delta=delta, radius=radius, **noise)

    def is_local(self, grid: GridSpec) -> bool:
        x = grid.nodes
        outside = np.abs(x) > self.radius
        return bool(np.all(np.asarray(self.drift_delta(x))[outside] == 0))


def apply_perturbation(spec: ModelSpec, pert: PerturbationSpec) -> ModelSpec:
    b, h = spec.drift, spec.obs_map
    db, dh = pert.drift_delta, pert.obs_delta

    def drift(x):
        return b(x) + db(x)

    def obs_map(x):
        return h(x) + dh(x)

    return replace(
        spec,
        drift=drift,
        obs_map=obs_map,
        signal_noise=pert.signal_noise or spec.signal_noise,
        obs_noise=pert.obs_noise or spec.obs_noise,
        name=spec.name + "+perturbed",
    )


# ---------------------------------------------------------------------------
# discretization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """Finite-state model on a grid.

    ``transition[i, j]`` is the probability of moving from node ``i`` to node
    ``j`` (rows sum to one). ``likelihood(y)`` returns the observation density
    at ``y`` for every node; for array ``y`` the node axis is appended last.
    """

    grid: GridSpec
    transition: np.ndarray = field(repr=False)
    likelihood: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    truncation_loss: Optional[np.ndarray] = field(default=None, repr=False)
    name: str = "custom"

    def __post_init__(self):
        T = np.array(self.transition, dtype=float)
        n = self.grid.points
        if T.shape != (n, n):
            raise ValueError(f"transition must be {n}x{n}, got {T.shape}")
        if np.any(T < 0):
            raise ValueError("transition entries must be nonnegative")
        T = T / T.sum(axis=1, keepdims=True)
        T.flags.writeable = False
        object.__setattr__(self, "transition", T)

    @classmethod
    def from_arrays(cls, transition, emission, grid: GridSpec | None = None, name="finite"):
        """Finite chain whose likelihood ignores ``y`` beyond a table lookup.

        ``emission`` is either a callable ``y -> (..., n)`` or a matrix whose
        row ``int(y)`` is the likelihood vector for observation ``y``.
        """
        T = np.asarray(transition, dtype=float)
        grid = grid or GridSpec(0, T.shape[0] - 1, T.shape[0])
        if callable(emission):
            lik = emission
        else:
            E = np.asarray(emission, dtype=float)

            def lik(y):
                return E[np.asarray(y, dtype=int)]

        return cls(grid, T, lik, name=name)

    def likelihood_at(self, i: int, y: float) -> float:
        return float(self.likelihood(np.asarray(y))[..., i])


def discretize(spec: ModelSpec, grid: GridSpec, max_loss: float | None = 1e-3,
               check_radius: float | None = None) -> DiscreteModel:
    """Grid approximation of the transition kernel and observation density.

    Row ``i`` is ``q_xi(x_j - x_i - b(x_i))`` evaluated on the nodes and
    renormalized. The truncation loss of a row is the mass of the continuous
    kernel falling outside ``[lower - h/2, upper + h/2]``.

    Truncation is only policed on rows within ``check_radius`` of the grid
    center (default: a quarter of the grid span), since rows at the very
    edge always lose mass whenever the noise has unbounded support. Pass
    ``max_loss=None`` to disable the check.
    """
    x = grid.nodes
    h = grid.spacing
    centers = x + np.asarray(spec.drift(x), dtype=float)
    if not np.all(np.isfinite(centers)):
        raise ValueError("drift is not finite on the grid")
    h_nodes = np.asarray(spec.obs_map(x), dtype=float)
    if not np.all(np.isfinite(h_nodes)):
        raise ValueError("observation map is not finite on the grid")

    raw = spec.signal_noise.pdf(x[None, :] - centers[:, None])
    noise = spec.signal_noise
    loss = 1.0 - (noise.cdf(grid.upper + h / 2 - centers) - noise.cdf(grid.lower - h / 2 - centers))
    loss = np.clip(loss, 0.0, 1.0)

    row_mass = raw.sum(axis=1)
    if np.any(row_mass <= 0):
        bad = x[np.argmax(row_mass <= 0)]
        raise TruncationExcess(f"transition row at x={bad:g} has no mass on the grid")
    if max_loss is not None:
        radius = (grid.upper - grid.lower) / 4 if check_radius is None else check_radius
        mid = 0.5 * (grid.lower + grid.upper)
        policed = np.abs(x - mid) <= radius + 1e-12
        worst = np.where(policed, loss, 0.0)
        if worst.max() > max_loss:
            i = int(np.argmax(worst))
            raise TruncationExcess(
                f"row at x={x[i]:g} loses {worst[i]:.3g} of its mass outside the grid "
                f"(limit {max_loss:g}); widen the grid")

    obs_noise = spec.obs_noise

    def likelihood(y):
        y = np.asarray(y, dtype=float)
        return obs_noise.pdf(y[..., None] - h_nodes)

    return DiscreteModel(grid, raw / row_mass[:, None], likelihood, truncation_loss=loss, name=spec.name)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    seed: int
    states: np.ndarray  # X_0 .. X_n
    observations: np.ndarray  # Y_1 .. Y_n

    def __post_init__(self):
        if len(self.observations) != len(self.states) - 1:
            raise ValueError("need exactly one observation per transition")

    def __eq__(self, other):
        if not isinstance(other, TrajectorySample):
            return NotImplemented
        return (self.seed == other.seed and np.array_equal(self.states, other.states)
                and np.array_equal(self.observations, other.observations))

    __hash__ = None


def _draw_initial(initial, rng):
    if initial is None:
        return 0.0
    if isinstance(initial, GridMeasure):
        cum = np.cumsum(initial.weights)
        i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return float(initial.grid.nodes[min(i, initial.grid.points - 1)])
    if isinstance(initial, NoiseDensity):
        return float(initial.sample(rng, None))
    if callable(initial):
        return float(initial(rng))
    return float(initial)


def sample_trajectory(model: ModelSpec, n: int, seed: int, initial=None) -> TrajectorySample:
    """Simulate ``X_0..X_n`` and ``Y_1..Y_n``.

    ``initial`` may be ``None`` (start at 0), a number, a
    :class:`GridMeasure` (a node is drawn from it), a :class:`NoiseDensity`
    (drawn by inverse CDF), or a callable taking the generator.
    Draw order is fixed: initial state, all signal noise, all observation
    noise. The generator is numpy's PCG64 seeded with ``seed``.
    """
    if n < 1:
        raise ValueError("trajectory length must be at least 1")
    rng = np.random.default_rng(seed)
    x0 = _draw_initial(initial, rng)
    xi = np.asarray(model.signal_noise.sample(rng, n), dtype=float)
    v = np.asarray(model.obs_noise.sample(rng, n), dtype=float)
    states = np.empty(n + 1)
    states[0] = x0
    b = model.drift
    for k in range(n):
        xk = states[k]
        states[k + 1] = xk + float(b(np.asarray(xk))) + xi[k]
    obs = np.asarray(model.obs_map(states[1:]), dtype=float) + v
    return TrajectorySample(seed, states, obs)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def contractive_drift(x):
    """``-0.5 * sign(x) * min(|x|, 2)``: pulls toward 0 by at most one unit."""
    x = np.asarray(x, dtype=float)
    return -0.5 * np.sign(x) * np.minimum(np.abs(x), 2.0)


def _tanh_obs(amplitude):
    def h(x):
        return amplitude * np.tanh(np.asarray(x, dtype=float))
    return h


def preset(name: str, h_amplitude: float = 0.05, signal_scale: float = 1.0,
           obs_scale: float = 1.0, tail_exponent: float = 3.0) -> ModelSpec:
    """Named models.

    laplace-contractive
        contractive drift, ``h = h_amplitude * tanh``, Laplace noises.
    laplace-random-walk
        zero drift (no recurrence), otherwise as above.
    polynomial-contractive
        as laplace-contractive but with polynomial-tail observation noise.
    """
    h = _tanh_obs(h_amplitude)
    if name == "laplace-contractive":
        return ModelSpec(contractive_drift, h, Laplace(signal_scale), Laplace(obs_scale), name)
    if name == "laplace-random-walk":
        return ModelSpec(_zero, h, Laplace(signal_scale), Laplace(obs_scale), name)
    if name == "polynomial-contractive":
        return ModelSpec(contractive_drift, h, Laplace(signal_scale),
                         PolynomialTail(tail_exponent, 1.0), name)
    raise KeyError(f"unknown model preset {name!r}; known: {', '.join(PRESETS)}")


PRESETS = ("laplace-contractive", "laplace-random-walk", "polynomial-contractive")
