"""Numerical checks of the stability assumptions on discretized models.

Each ``check_*`` function evaluates one hypothesis over grid nodes (and a
finite set of probe observations standing in for suprema over all ``y``)
and returns the constant it certifies. :func:`certify` runs them all and
collects an :class:`AssumptionReport`.

Two symbols are kept apart: ``q`` is always the perturbation size, ``rho``
the exponential drift contraction factor.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from .errors import RecurrenceFailure, UnboundedRatio
from .filtering import filter_step
from .measure import GridMeasure, GridSpec, exp_moment
from .model import DiscreteModel, Laplace, ModelSpec, PolynomialTail, Tabulated

RATIO_LIMIT = 1e12
MIXING_FLAG = 1e6
C_SCAN = (0.5, 0.25, 0.1, 0.05, 0.01)


def _models(true_model, wrong_model):
    return (true_model,) if wrong_model is None else (true_model, wrong_model)


def _two_sided_log_sup(a: np.ndarray, b: np.ndarray, what: str) -> tuple[float, float]:
    """``(ln sup a/b, ln sup b/a)`` over entries where either is positive."""
    support = (a > 0) | (b > 0)
    if np.any(support & ((a == 0) | (b == 0))):
        raise UnboundedRatio(f"{what}: one model vanishes where the other does not")
    with np.errstate(divide="ignore"):
        d = np.log(np.where(support, a, 1.0)) - np.log(np.where(support, b, 1.0))
    d = d[support]
    up, down = float(d.max()), float((-d).max())
    if max(up, down) > np.log(RATIO_LIMIT):
        raise UnboundedRatio(f"{what}: density ratio exceeds {RATIO_LIMIT:g}")
    return up, down


def _probe_obs(model: DiscreteModel, probes) -> np.ndarray:
    extra = model.grid.nodes
    if probes is None:
        return extra
    return np.unique(np.concatenate([np.asarray(probes, dtype=float).ravel(), extra]))


def check_a1(true_model: DiscreteModel, wrong_model: DiscreteModel, probes=None) -> float:
    """Perturbation size ``q``.

    ``ln sup (Q Psi)/(P Xi) + ln sup (P Xi)/(Q Psi)``, where the kernel
    ratio runs over grid pairs and the likelihood ratio over grid nodes and
    probe observations (grid coordinates are always included as probes).
    Since the two factors have independent arguments, each supremum splits
    into a kernel part and a likelihood part.
    """
    if true_model.grid != wrong_model.grid:
        raise ValueError("models must share a grid")
    ys = _probe_obs(true_model, probes)
    k_up, k_down = _two_sided_log_sup(true_model.transition, wrong_model.transition, "kernel")
    l_up, l_down = _two_sided_log_sup(true_model.likelihood(ys), wrong_model.likelihood(ys), "likelihood")
    q = (k_up + l_up) + (k_down + l_down)
    return max(q, 0.0)


def kernel_part_of_q(true_model: DiscreteModel, wrong_model: DiscreteModel) -> float:
    up, down = _two_sided_log_sup(true_model.transition, wrong_model.transition, "kernel")
    return up + down


def check_a2(true_model: DiscreteModel, wrong_model: Optional[DiscreteModel], R: float) -> float:
    """Local mixing constant ``C_R``: worst ratio of two kernel rows on ``|x| <= R``."""
    x = true_model.grid.nodes
    idx = np.flatnonzero(np.abs(x) <= R + 1e-12)
    if len(idx) == 0:
        raise ValueError(f"no grid node within radius {R}")
    worst = 1.0
    for m in _models(true_model, wrong_model):
        block = m.transition[np.ix_(idx, idx)]
        lo = block.min(axis=0)
        hi = block.max(axis=0)
        if np.any(lo <= 0):
            raise UnboundedRatio(f"kernel of {m.name} has zero entries within radius {R}")
        worst = max(worst, float((hi / lo).max()))
    if worst > RATIO_LIMIT:
        raise UnboundedRatio(f"C_R = {worst:.3g} exceeds {RATIO_LIMIT:g}")
    return worst


def check_a3(true_model: DiscreteModel, wrong_model: Optional[DiscreteModel] = None, probes=None) -> bool:
    ys = _probe_obs(true_model, probes)
    return all(bool(np.all(m.likelihood(ys) > 0)) for m in _models(true_model, wrong_model))


@dataclass(frozen=True)
class A4Result:
    rho: float
    K: float
    c: float
    R: float
    witness: float  # node attaining rho


def _drift_ratios(m: DiscreteModel, c: float):
    V = np.exp(c * np.abs(m.grid.nodes))
    QV = m.transition @ V
    return QV, QV / V


def check_a4(true_model: DiscreteModel, wrong_model: Optional[DiscreteModel] = None,
             c: float = 0.5, R: float = 5.0) -> A4Result:
    """Exponential drift constants for ``V(x) = exp(c|x|)``.

    ``rho = max_{|x| >= R} (QV)(x) / V(x)`` and ``K = max_{|x| <= R} (QV)(x)``,
    both maximized over the true and the wrong kernel. Raises
    :class:`RecurrenceFailure` if ``rho >= 1``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    x = true_model.grid.nodes
    outer = np.abs(x) >= R - 1e-12
    inner = np.abs(x) <= R + 1e-12
    if not outer.any() or not inner.any():
        raise ValueError(f"radius {R} does not split the grid")
    rho, K, witness = -np.inf, -np.inf, None
    for m in _models(true_model, wrong_model):
        QV, ratio = _drift_ratios(m, c)
        i = int(np.argmax(np.where(outer, ratio, -np.inf)))
        if ratio[i] > rho:
            rho, witness = float(ratio[i]), float(x[i])
        K = max(K, float(QV[inner].max()))
    if rho >= 1:
        raise RecurrenceFailure(f"drift ratio {rho:.4g} >= 1 at x={witness:g} (c={c}, R={R})",
                                witness=witness, rho=rho)
    return A4Result(rho, K, c, R, witness)


def scan_a4(true_model: DiscreteModel, wrong_model: Optional[DiscreteModel] = None,
            R: float = 5.0, cs: Sequence[float] = C_SCAN) -> A4Result:
    """Largest ``c`` from ``cs`` (tried in decreasing order) that certifies ``rho < 1``."""
    last = None
    for c in sorted(cs, reverse=True):
        try:
            return check_a4(true_model, wrong_model, c=c, R=R)
        except RecurrenceFailure as exc:
            last = exc
    raise last


@dataclass(frozen=True)
class A4PrimeResult:
    ok: bool
    margin: float  # inward step r achieved in the tail
    threshold: float  # |x| beyond which the margin holds
    bounded_image: bool
    zero_mean: bool
    exp_moment_eps: float  # sup eps with finite exponential moment of |noise|


def _noise_mean(noise) -> float:
    if isinstance(noise, (Laplace, PolynomialTail, Tabulated)):
        return noise.mean()
    # numeric fallback on a wide quadrature grid
    t = np.linspace(-200, 200, 400001)
    return float(np.trapezoid(t * noise.pdf(t), t))


def check_a4prime(true_spec: ModelSpec, wrong_spec: Optional[ModelSpec], grid: GridSpec,
                  r: Optional[float] = None, mean_tol: float = 1e-9) -> A4PrimeResult:
    """Sufficient recurrence condition stated on the drift and the signal noise.

    The inward margin ``r`` is the smallest value of
    ``|x| - max(|x + b(x)|, |x + b~(x)|)`` over the outer half of the grid
    (``|x| >= span/4`` from the center), standing in for "|x| large enough".
    If ``r`` is given it is a required minimum margin.
    """
    specs = (true_spec,) if wrong_spec is None else (true_spec, wrong_spec)
    x = grid.nodes
    ax = np.abs(x)
    image = np.max([np.abs(x + np.asarray(s.drift(x), dtype=float)) for s in specs], axis=0)
    step = ax - image
    tail = ax >= (grid.upper - grid.lower) / 4
    margin = float(step[tail].min())
    need = margin if r is None else r
    drift_ok = margin > 0 and (r is None or margin >= r - 1e-9)

    # smallest |x| beyond which the margin holds at every node
    order = np.argsort(ax)[::-1]
    threshold = float(ax[order[0]])
    for i in order:
        if step[i] < need - 1e-9:
            break
        threshold = float(ax[i])

    bounded = bool(np.all(np.isfinite(image)))
    means = [_noise_mean(s.signal_noise) for s in specs]
    zero_mean = all(np.isfinite(m) and abs(m) <= mean_tol for m in means)
    eps = min(s.signal_noise.exp_moment_bound() for s in specs)
    ok = bool(drift_ok and bounded and zero_mean and eps > 0)
    return A4PrimeResult(ok, margin, threshold, bounded, zero_mean, float(eps))


@dataclass(frozen=True)
class A5Result:
    delta: float
    product_ok: Optional[bool]
    probe_span: float


def _log_spreads(m: DiscreteModel, ys) -> np.ndarray:
    """``ln max_x Psi(x, y) - ln min_x Psi(x, y)`` for each probe ``y``."""
    L = m.likelihood(np.asarray(ys, dtype=float))
    with np.errstate(divide="ignore"):
        logL = np.log(L)
    return logL.max(axis=-1) - logL.min(axis=-1)


def _log_spread(m: DiscreteModel, ys) -> float:
    return float(_log_spreads(m, ys).max())


def _refine_spread(ms, ys: np.ndarray) -> float:
    """Polish the best probe with a bounded scalar search between its neighbours.

    Densities with kinks (flat cores, absolute values) can peak between
    probe points; the search recovers the peak to ``xatol``.
    """
    ys = np.unique(ys)
    spreads = np.max([_log_spreads(m, ys) for m in ms], axis=0)
    i = int(np.argmax(spreads))
    lo, hi = ys[max(i - 1, 0)], ys[min(i + 1, len(ys) - 1)]
    best = float(spreads[i])
    if hi > lo and np.isfinite(best):
        res = optimize.minimize_scalar(lambda y: -max(_log_spread(m, [y]) for m in ms),
                                       bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
        best = max(best, float(-res.fun))
    return best


def check_a5(true_model: DiscreteModel, wrong_model: Optional[DiscreteModel] = None, probes=None,
             rho: Optional[float] = None, tol: float = 1e-3, max_doublings: int = 12) -> A5Result:
    """Observation influence ``delta = max_y max_x Psi(x,y)/min_x Psi(x,y) - 1``.

    The probe set (grid nodes plus ``probes``) is widened by doubling its
    span until the running maximum moves by less than ``tol`` (relative);
    the best probe is then refined by a bounded scalar search.
    """
    ms = _models(true_model, wrong_model)
    ys = _probe_obs(true_model, probes)
    span = float(np.abs(ys).max()) or 1.0
    spread = max(_log_spread(m, ys) for m in ms)
    seen = [ys]
    for _ in range(max_doublings):
        span *= 2
        extra = np.linspace(-span, span, 2 * len(true_model.grid.nodes) + 1)
        seen.append(extra)
        new = max(spread, max(_log_spread(m, extra) for m in ms))
        settled = np.expm1(new) - np.expm1(spread) <= tol * max(np.expm1(spread), 1e-300)
        spread = new
        if settled:
            break
    spread = max(spread, _refine_spread(ms, np.concatenate(seen)))
    delta = float(np.expm1(spread))
    product_ok = None if rho is None else bool((1 + delta) * rho < 1)
    return A5Result(delta, product_ok, span)


def conditional_moment_factor(model: DiscreteModel, mu: GridMeasure, y: float, c: float) -> float:
    """One-step growth of the exponential moment under the filter operator."""
    post, _ = filter_step(model, mu, y)
    return exp_moment(post, c) / exp_moment(mu, c)


def conditional_moment(model: DiscreteModel, mu: GridMeasure, y: float, c: float) -> float:
    """``E[exp(c|X_1|) | Y_1 = y]`` when ``X_0 ~ mu``."""
    post, _ = filter_step(model, mu, y)
    return exp_moment(post, c)


def hitting_time_exp_moment(spec: ModelSpec, x0: float, R: float, lam: float, trajectories: int,
                            seed: int = 0, max_steps: int = 10_000) -> tuple[float, np.ndarray]:
    """Sample mean of ``exp(lam * tau)``, ``tau`` = first time with ``|X_t| <= R``.

    Trajectories are simulated jointly; trajectory ``k`` uses the generator
    seeded with ``seed + k``. Returns the mean and the hitting times.
    """
    gens = [np.random.default_rng(seed + k) for k in range(trajectories)]
    x = np.full(trajectories, float(x0))
    tau = np.where(np.abs(x) <= R, 0, -1)
    for t in range(1, max_steps + 1):
        alive = tau < 0
        if not alive.any():
            break
        u = np.array([g.random() for g in gens])
        x = x + np.asarray(spec.drift(x), dtype=float) + spec.signal_noise.ppf(u)
        tau = np.where(alive & (np.abs(x) <= R), t, tau)
    if np.any(tau < 0):
        raise RuntimeError(f"{np.sum(tau < 0)} trajectories did not reach radius {R} in {max_steps} steps")
    return float(np.mean(np.exp(lam * tau))), tau


@dataclass(frozen=True)
class AssumptionReport:
    q: float
    C_R: float
    a3_ok: bool
    c: float
    rho: float
    K: float
    R: float
    delta: float
    rho_prime: float
    K_prime: float
    a4_ok: bool
    a5_product_ok: bool
    mixing_ok: bool = True
    notes: str = ""

    @property
    def certified(self) -> bool:
        return bool(np.isfinite(self.q) and self.a3_ok and self.a4_ok and self.a5_product_ok
                    and np.isfinite(self.C_R))

    @property
    def moment_bound_constant(self) -> float:
        """``K' / (1 - rho')``; the uniform part of the posterior moment bound."""
        if not self.rho_prime < 1:
            return float("inf")
        return self.K_prime / (1 - self.rho_prime)

    def to_text(self) -> str:
        d = asdict(self)
        d["certified"] = self.certified
        lines = []
        for k, v in d.items():
            if isinstance(v, float):
                v = repr(v)
            elif isinstance(v, bool):
                v = str(v).lower()
            lines.append(f"{k} = {v}")
        return "\n".join(lines)


def certify(true_model: DiscreteModel, wrong_model: Optional[DiscreteModel] = None, probes=None,
            R: float = 5.0, c: Optional[float] = None) -> AssumptionReport:
    """Run every check and collect the constants.

    With ``c=None`` the exponent is the largest value in :data:`C_SCAN` that
    certifies the drift condition. Failures are recorded in the report
    rather than raised.
    """
    wrong = true_model if wrong_model is None else wrong_model
    notes = []
    try:
        q = check_a1(true_model, wrong, probes)
    except UnboundedRatio as exc:
        q = float("inf")
        notes.append(f"A1: {exc}")
    try:
        C_R = check_a2(true_model, wrong, R)
    except UnboundedRatio as exc:
        C_R = float("inf")
        notes.append(f"A2: {exc}")
    a3 = check_a3(true_model, wrong, probes)
    try:
        a4 = scan_a4(true_model, wrong, R) if c is None else check_a4(true_model, wrong, c, R)
        rho, K, c_used, a4_ok = a4.rho, a4.K, a4.c, True
    except RecurrenceFailure as exc:
        c_used = min(C_SCAN) if c is None else c
        QV = [_drift_ratios(m, c_used) for m in _models(true_model, wrong)]
        x = true_model.grid.nodes
        rho = exc.rho
        K = max(float(v[0][np.abs(x) <= R + 1e-12].max()) for v in QV)
        a4_ok = False
        notes.append(f"A4: {exc}")
    a5 = check_a5(true_model, wrong, probes, rho=rho)
    return AssumptionReport(
        q=q, C_R=C_R, a3_ok=a3, c=c_used, rho=rho, K=K, R=R, delta=a5.delta,
        rho_prime=rho * (1 + a5.delta), K_prime=K * (1 + a5.delta), a4_ok=a4_ok,
        a5_product_ok=bool(a5.product_ok), mixing_ok=bool(C_R <= MIXING_FLAG),
        notes="; ".join(notes),
    )
