"""Recursive Bayes filter on a discrete model.

One step is predict (``mu @ transition``), reweight by the likelihood of the
new observation, normalize. The same code serves the exact filter and the
"wrong" filter; only the model passed in differs.

Normalization happens after every step and the log of each step's mass is
accumulated, so the total evidence ``c_n`` is ``exp(sum(log_normalizers))``
without ever forming the underflowing n-fold product.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import AllZeroMass, GridMismatch
from .measure import GridMeasure
from .model import DiscreteModel

UNDERFLOW = 1e-300


def _step(weights: np.ndarray, transition: np.ndarray, lik: np.ndarray):
    """Batched filter step on raw arrays.

    ``weights`` and ``lik`` have shape ``(..., n)``. Returns the posterior
    weights and the log of the unnormalized mass.
    """
    unnorm = (weights @ transition) * lik
    mass = unnorm.sum(axis=-1, keepdims=True)
    if np.any(mass < UNDERFLOW):
        # positive in exact arithmetic but lost to underflow
        peak = unnorm.max(axis=-1, keepdims=True)
        if np.any(peak <= 0):
            raise AllZeroMass("filter step produced zero mass; likelihood vanishes on the predicted support")
        small = mass < UNDERFLOW
        scaled = np.where(small, unnorm / np.where(small, peak, 1.0), unnorm)
        smass = scaled.sum(axis=-1, keepdims=True)
        post = scaled / smass
        logn = np.where(small, np.log(smass) + np.log(peak), np.log(np.where(small, 1.0, mass)))
    else:
        post = unnorm / mass
        logn = np.log(mass)
    return post, logn[..., 0]


def _check_grid(model: DiscreteModel, mu: GridMeasure):
    if model.grid != mu.grid:
        raise GridMismatch("measure and model are defined on different grids")


def filter_step(model: DiscreteModel, mu: GridMeasure, y: float) -> tuple[GridMeasure, float]:
    """One conditional step; returns the posterior and the log-normalizer."""
    _check_grid(model, mu)
    post, logn = _step(mu.weights, model.transition, model.likelihood(np.asarray(y, dtype=float)))
    return GridMeasure(mu.grid, post), float(logn)


@dataclass(frozen=True, eq=False)
class FilterTrace:
    measures: list  # GridMeasure for steps 0..n
    log_normalizers: np.ndarray  # one per observation
    model_tag: str = "true-model"
    observations: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.log_normalizers) != len(self.measures) - 1:
            raise ValueError("need one log-normalizer per filter step")

    @property
    def log_evidence(self) -> float:
        """``ln c_n``: log of the total observation likelihood."""
        return float(np.sum(self.log_normalizers))

    @property
    def weights(self) -> np.ndarray:
        return np.vstack([m.weights for m in self.measures])

    def __len__(self):
        return len(self.measures)

    def __getitem__(self, k):
        return self.measures[k]


def run_filter(model: DiscreteModel, mu0: GridMeasure, observations: Sequence[float],
               model_tag: str = "true-model") -> FilterTrace:
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 1 or len(obs) == 0:
        raise ValueError("need a nonempty 1-d observation sequence")
    measures = [mu0]
    logs = np.empty(len(obs))
    mu = mu0
    for k, y in enumerate(obs):
        mu, logs[k] = filter_step(model, mu, y)
        measures.append(mu)
    return FilterTrace(measures, logs, model_tag, obs.copy())


def multi_step(model: DiscreteModel, mu: GridMeasure, observations: Sequence[float]) -> GridMeasure:
    """Push ``mu`` through the filter over an observation window.

    An empty window returns ``mu`` itself.
    """
    _check_grid(model, mu)
    for y in np.asarray(observations, dtype=float).reshape(-1):
        mu, _ = filter_step(model, mu, y)
    return mu


def window_log_evidence(model: DiscreteModel, mu: GridMeasure, observations: Sequence[float]) -> float:
    """Log of the window normalizer started from ``mu`` (0 for an empty window)."""
    total = 0.0
    for y in np.asarray(observations, dtype=float).reshape(-1):
        mu, logn = filter_step(model, mu, y)
        total += logn
    return total


def run_filter_batch(model: DiscreteModel, mu0: np.ndarray, observations: np.ndarray,
                     keep: bool = True) -> np.ndarray:
    """Filter many observation streams at once.

    ``mu0`` has shape ``(n_points,)`` or ``(replicas, n_points)`` and
    ``observations`` shape ``(replicas, steps)``. Returns posterior weights of
    shape ``(replicas, steps + 1, n_points)`` if ``keep`` else only the last
    step.
    """
    obs = np.atleast_2d(np.asarray(observations, dtype=float))
    r, n = obs.shape
    w = np.broadcast_to(np.asarray(mu0, dtype=float), (r, model.grid.points)).copy()
    T = model.transition
    if keep:
        out = np.empty((r, n + 1, model.grid.points))
        out[:, 0] = w
    for k in range(n):
        w, _ = _step(w, T, model.likelihood(obs[:, k]))
        if keep:
            out[:, k + 1] = w
    return out if keep else w
