"""Monte Carlo experiments on filter stability and forgetting.

All replicas are simulated from the true model with seeds ``seed + r`` and
filtered in one batch, so results are reproducible bit for bit on a serial
run.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .assumptions import AssumptionReport, certify
from .errors import GridMismatch, ValidationError
from .filtering import FilterTrace, _step, filter_step, multi_step
from .measure import GridMeasure, GridSpec, _birkhoff, birkhoff_distance, exp_moment
from .model import (DiscreteModel, Laplace, ModelSpec, PerturbationSpec, apply_perturbation,
                    discretize, preset, sample_trajectory)

log = logging.getLogger(__name__)

TV_FLOOR = 1e-12


class InfiniteBirkhoff(UserWarning):
    """The two initial measures have infinite projective distance."""


def initial_measure(desc: str, grid: GridSpec) -> GridMeasure:
    """Parse ``point:X``, ``uniform:A:B`` or ``laplace:LOC:SCALE``."""
    kind, *args = str(desc).strip().split(":")
    try:
        vals = [float(a) for a in args]
    except ValueError:
        raise ValueError(f"bad initial measure {desc!r}") from None
    if kind == "point" and len(vals) <= 1:
        return GridMeasure.point_mass(grid, vals[0] if vals else 0.0)
    if kind == "uniform" and len(vals) in (0, 2):
        return GridMeasure.uniform(grid, *vals)
    if kind == "laplace" and len(vals) in (1, 2):
        return GridMeasure.laplace(grid, *vals)
    raise ValueError(f"bad initial measure {desc!r}; use point:X, uniform:A:B or laplace:LOC:SCALE")


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "laplace-contractive"
    perturbation: float = 0.01  # drift shift inside the perturbation radius
    perturbation_radius: float = 2.0
    obs_perturbation: float = 0.0  # constant shift added to h
    wrong_signal_scale: Optional[float] = None
    wrong_obs_scale: Optional[float] = None
    horizon: int = 200
    replicas: int = 500
    seed: int = 0
    grid: GridSpec = field(default_factory=lambda: GridSpec(-20.0, 20.0, 401))
    c: Optional[float] = None  # None: scan for the largest certifying exponent
    R: float = 5.0
    h_amplitude: float = 0.05
    signal_scale: float = 1.0
    obs_scale: float = 1.0
    initial: str = "point:0"
    initial_alt: str = "laplace:2:1"
    sweep: tuple = (1.0, 2.0, 4.0)

    def __post_init__(self):
        if self.replicas < 1:
            raise ValidationError("replicas ≥ 1")
        if self.horizon < 2:
            raise ValidationError("horizon ≥ 2")

    def true_spec(self) -> ModelSpec:
        return preset(self.preset, h_amplitude=self.h_amplitude,
                      signal_scale=self.signal_scale, obs_scale=self.obs_scale)

    def perturbation_spec(self, factor: float = 1.0) -> PerturbationSpec:
        shift = self.obs_perturbation * factor
        pert = PerturbationSpec.bump(
            self.perturbation * factor, self.perturbation_radius,
            signal_noise=Laplace(self.wrong_signal_scale) if self.wrong_signal_scale else None,
            obs_noise=Laplace(self.wrong_obs_scale) if self.wrong_obs_scale else None,
        )
        if shift:
            pert = replace(pert, obs_delta=lambda x: np.full_like(np.asarray(x, dtype=float), shift))
        return pert

    def wrong_spec(self, factor: float = 1.0) -> ModelSpec:
        return apply_perturbation(self.true_spec(), self.perturbation_spec(factor))

    def models(self, factor: float = 1.0) -> tuple[DiscreteModel, DiscreteModel]:
        return discretize(self.true_spec(), self.grid), discretize(self.wrong_spec(factor), self.grid)

    def echo(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "grid"}
        d["grid"] = f"{self.grid.lower}:{self.grid.upper}:{self.grid.points}"
        d["sweep"] = " ".join(repr(float(s)) for s in self.sweep)
        return d


def simulate_observations(spec: ModelSpec, n: int, replicas: int, seed: int,
                          initial: Optional[GridMeasure] = None) -> np.ndarray:
    """Observation matrix ``(replicas, n)``; replica ``r`` uses seed ``seed + r``."""
    return np.vstack([sample_trajectory(spec, n, seed + r, initial).observations for r in range(replicas)])


def paired_tv(model_a: DiscreteModel, model_b: DiscreteModel, mu_a: GridMeasure, mu_b: GridMeasure,
              observations: np.ndarray) -> np.ndarray:
    """TV between two filters driven by the same observations, shape ``(replicas, n)``."""
    if model_a.grid != model_b.grid or mu_a.grid != model_a.grid or mu_b.grid != model_a.grid:
        raise GridMismatch("models and initial measures must share a grid")
    obs = np.atleast_2d(observations)
    r, n = obs.shape
    wa = np.tile(mu_a.weights, (r, 1))
    wb = np.tile(mu_b.weights, (r, 1))
    out = np.empty((r, n))
    same = model_a is model_b
    for k in range(n):
        la = model_a.likelihood(obs[:, k])
        lb = la if same else model_b.likelihood(obs[:, k])
        wa, _ = _step(wa, model_a.transition, la)
        wb, _ = _step(wb, model_b.transition, lb)
        out[:, k] = np.abs(wa - wb).sum(axis=1)
    return out


def _mean_and_stderr(tv: np.ndarray):
    mean = tv.mean(axis=0)
    if tv.shape[0] > 1:
        se = tv.std(axis=0, ddof=1) / math.sqrt(tv.shape[0])
    else:
        se = np.zeros_like(mean)
    return mean, se


@dataclass
class StabilityReport:
    q: float
    mean_tv: np.ndarray  # steps 1..n
    stderr: np.ndarray
    replicas: int
    assumptions: Optional[AssumptionReport] = None
    factor: float = 1.0
    tv: Optional[np.ndarray] = field(default=None, repr=False)  # (replicas, n)

    @property
    def sup_mean_tv(self) -> float:
        return float(self.mean_tv.max())

    @property
    def certified(self) -> bool:
        return self.assumptions is not None and self.assumptions.certified

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, len(self.mean_tv) + 1)


def stability_experiment(config: ExperimentConfig, factor: float = 1.0,
                         assumptions: Optional[AssumptionReport] = None,
                         observations: Optional[np.ndarray] = None) -> StabilityReport:
    """Exact vs wrong filter from the same known initial law, on true-model data.

    ``factor`` scales the configured perturbation. Runs even when the
    assumption checks fail; the report then reads as uncertified.
    """
    true_model, wrong_model = config.models(factor)
    mu0 = initial_measure(config.initial, config.grid)
    if assumptions is None:
        assumptions = certify(true_model, wrong_model, R=config.R, c=config.c)
    if not assumptions.certified:
        log.warning("stability run on an uncertified model pair: %s", assumptions.notes or "A5 product")
    if observations is None:
        observations = simulate_observations(config.true_spec(), config.horizon, config.replicas,
                                             config.seed, mu0)
    tv = paired_tv(true_model, wrong_model, mu0, mu0, observations)
    mean, se = _mean_and_stderr(tv)
    return StabilityReport(assumptions.q, mean, se, tv.shape[0], assumptions, factor, tv)


def sweep_experiment(config: ExperimentConfig, factors: Optional[Sequence[float]] = None) -> list:
    """Stability runs at scaled perturbations, all on the same observation streams."""
    factors = config.sweep if factors is None else factors
    mu0 = initial_measure(config.initial, config.grid)
    obs = simulate_observations(config.true_spec(), config.horizon, config.replicas, config.seed, mu0)
    return [stability_experiment(config, f, observations=obs) for f in factors]


@dataclass
class ForgettingReport:
    mean_tv: np.ndarray
    stderr: np.ndarray
    replicas: int
    initial_birkhoff: float
    alpha_hat: Optional[float] = None
    intercept: Optional[float] = None
    r_squared: Optional[float] = None
    fit_steps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    assumptions: Optional[AssumptionReport] = None
    tv: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, len(self.mean_tv) + 1)

    @property
    def certified(self) -> bool:
        return self.assumptions is not None and self.assumptions.certified


def fit_decay(mean_tv: np.ndarray, floor: float = TV_FLOOR, skip: int = 5, min_points: int = 5):
    """Least-squares fit of ``ln TV = a - alpha * step``.

    Uses steps after the first ``skip`` while the mean TV stays above
    ``100 * floor``. Returns ``(alpha, intercept, r_squared, steps)`` or
    ``None`` when fewer than ``min_points`` steps qualify.
    """
    tv = np.asarray(mean_tv, dtype=float)
    steps = np.arange(1, len(tv) + 1)
    above = tv > 100 * floor
    # stop at the first step that hits the floor
    cut = len(tv) if above.all() else int(np.argmin(above))
    sel = (steps > skip) & (steps <= cut)
    if sel.sum() < min_points:
        return None
    fit = stats.linregress(steps[sel], np.log(tv[sel]))
    return -fit.slope, fit.intercept, fit.rvalue ** 2, steps[sel]


def forgetting_experiment(config: ExperimentConfig, mu0: Optional[GridMeasure] = None,
                          nu0: Optional[GridMeasure] = None,
                          assumptions: Optional[AssumptionReport] = None) -> ForgettingReport:
    """Exact filter from two initial laws on the same true-model data.

    Data are generated with ``X_0 ~ mu0``. Defaults come from
    ``config.initial`` and ``config.initial_alt``.
    """
    mu0 = initial_measure(config.initial, config.grid) if mu0 is None else mu0
    nu0 = initial_measure(config.initial_alt, config.grid) if nu0 is None else nu0
    rho0 = birkhoff_distance(mu0, nu0)
    if math.isinf(rho0):
        warnings.warn("initial measures have infinite Birkhoff distance; "
                      "only the decay rate is meaningful", InfiniteBirkhoff, stacklevel=2)
    model = discretize(config.true_spec(), config.grid)
    if assumptions is None:
        assumptions = certify(model, R=config.R, c=config.c)
    obs = simulate_observations(config.true_spec(), config.horizon, config.replicas, config.seed, mu0)
    tv = paired_tv(model, model, mu0, nu0, obs)
    mean, se = _mean_and_stderr(tv)
    rep = ForgettingReport(mean, se, tv.shape[0], rho0, assumptions=assumptions, tv=tv)
    fit = fit_decay(mean)
    if fit is not None:
        rep.alpha_hat, rep.intercept, rep.r_squared, rep.fit_steps = fit
    return rep


# ---------------------------------------------------------------------------
# proof-structure diagnostics
# ---------------------------------------------------------------------------


@dataclass
class TelescopingResult:
    terms: np.ndarray  # (n, points): signed measure for k = 1..n
    difference: np.ndarray  # mu'_n - mu_n

    @property
    def term_tv(self) -> np.ndarray:
        return np.abs(self.terms).sum(axis=1)

    @property
    def reconstruction_error(self) -> float:
        return float(np.abs(self.terms.sum(axis=0) - self.difference).max())


def telescoping_diagnostic(true_model: DiscreteModel, wrong_model: DiscreteModel, mu0: GridMeasure,
                           observations: Sequence[float]) -> TelescopingResult:
    """Split ``mu'_n - mu_n`` into one term per substitution step.

    Term ``k`` is the wrong step at time ``k`` versus the true step, both
    applied to the wrong filter's ``mu'_{k-1}`` and then propagated to time
    ``n`` with the true filter on ``Y_{k+1..n}``. Cost is quadratic in ``n``.
    """
    obs = np.asarray(observations, dtype=float)
    n = len(obs)
    wrong_prev = mu0
    terms = np.empty((n, mu0.grid.points))
    for k in range(1, n + 1):
        y = obs[k - 1]
        via_wrong, _ = filter_step(wrong_model, wrong_prev, y)
        via_true, _ = filter_step(true_model, wrong_prev, y)
        rest = obs[k:]
        terms[k - 1] = (multi_step(true_model, via_wrong, rest).weights
                        - multi_step(true_model, via_true, rest).weights)
        wrong_prev = via_wrong
    exact = multi_step(true_model, mu0, obs)
    return TelescopingResult(terms, wrong_prev.weights - exact.weights)


def per_step_birkhoff_probe(true_model: DiscreteModel, wrong_model: DiscreteModel, trace: FilterTrace,
                            observations: Optional[Sequence[float]] = None,
                            q: Optional[float] = None, slack: float = 1e-9) -> np.ndarray:
    """``rho(mu'_k, true step of mu'_{k-1})`` for each step of a wrong-model trace.

    If ``q`` is given, raises ``AssertionError`` when any value exceeds
    ``q + slack``.
    """
    obs = trace.observations if observations is None else np.asarray(observations, dtype=float)
    if obs is None:
        raise ValueError("trace carries no observations; pass them explicitly")
    W = trace.weights
    prev, cur = W[:-1], W[1:]
    true_step, _ = _step(prev, true_model.transition, true_model.likelihood(obs))
    vals = np.asarray(_birkhoff(cur, true_step, axis=-1), dtype=float)
    if q is not None and np.any(vals > q + slack):
        k = int(np.argmax(vals))
        raise AssertionError(f"step {k + 1}: Birkhoff probe {vals[k]:.6g} exceeds q = {q:.6g}")
    return vals


@dataclass(frozen=True)
class MomentProbe:
    max_moment: float
    bound: float
    moments: np.ndarray

    @property
    def ok(self) -> bool:
        return self.max_moment <= self.bound


def moment_stability_probe(trace: FilterTrace, c: float, report: AssumptionReport) -> MomentProbe:
    """Largest posterior exponential moment along a trace, against its uniform bound.

    The bound is ``K'/(1 - rho') + exp_moment(mu_0, c)``.
    """
    moments = np.array([exp_moment(m, c) for m in trace.measures])
    bound = report.moment_bound_constant + moments[0]
    return MomentProbe(float(moments.max()), float(bound), moments)


# ---------------------------------------------------------------------------
# trend test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrendTest:
    S: float
    var_S: float
    z: float
    p_increasing: float  # one-sided p-value against "no trend"

    def increasing(self, level: float = 0.05) -> bool:
        return self.p_increasing < level


def mann_kendall(x: Sequence[float], cov: Optional[np.ndarray] = None) -> TrendTest:
    """Mann-Kendall trend test.

    Without ``cov`` this is the classical test for independent data (tie
    corrected). With ``cov``, the null covariance matrix of ``x``, the
    variance of ``S`` is the exact Gaussian-null value
    ``sum (2/pi) arcsin(corr(x_j - x_i, x_l - x_k))`` over all pairs of
    pairs; with ``cov = I`` it reduces to ``n(n-1)(2n+5)/18``. Use it for
    serially dependent series such as per-step averages over replicas.
    The normal approximation with continuity correction gives the p-value.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 3:
        raise ValueError("need at least 3 points")
    i, j = np.triu_indices(n, 1)
    S = float(np.sign(x[j] - x[i]).sum())
    if cov is None:
        _, counts = np.unique(x, return_counts=True)
        var = (n * (n - 1) * (2 * n + 5) - np.sum(counts * (counts - 1) * (2 * counts + 5))) / 18.0
    else:
        cov = np.asarray(cov, dtype=float)
        dcov = cov[np.ix_(j, j)] - cov[np.ix_(j, i)] - cov[np.ix_(i, j)] + cov[np.ix_(i, i)]
        sd = np.sqrt(np.clip(np.diag(dcov), 0.0, None))
        keep = sd > 0
        if not keep.any():
            return TrendTest(S, 0.0, 0.0, 0.5)
        dcov = dcov[np.ix_(keep, keep)]
        corr = np.clip(dcov / np.outer(sd[keep], sd[keep]), -1.0, 1.0)
        # arcsin is ill-conditioned at 1; the diagonal is exactly 1 by definition
        np.fill_diagonal(corr, 1.0)
        var = float((2.0 / np.pi) * np.arcsin(corr).sum())
    if var <= 0:
        return TrendTest(S, float(var), 0.0, 0.5)
    z = (S - np.sign(S)) / math.sqrt(var)
    return TrendTest(S, float(var), float(z), float(stats.norm.sf(z)))


def trend_test(tv: np.ndarray, first_step: int, last_step: int) -> TrendTest:
    """Mann-Kendall test on the replica-mean TV over ``first_step..last_step``.

    ``tv`` is the per-replica matrix ``(replicas, n)`` with column ``k-1``
    holding step ``k``. The null covariance of the mean series is estimated
    from the independent replicas.
    """
    block = np.asarray(tv)[:, first_step - 1:last_step]
    if block.shape[0] < 2:
        raise ValueError("need at least two replicas to estimate the covariance")
    cov = np.cov(block, rowvar=False) / block.shape[0]
    return mann_kendall(block.mean(axis=0), cov=cov)
