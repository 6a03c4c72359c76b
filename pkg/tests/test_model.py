import math

import numpy as np
import pytest
from scipy import integrate

from filterlab.errors import TruncationExcess
from filterlab.measure import GridMeasure, GridSpec
from filterlab.model import (DiscreteModel, Laplace, ModelSpec, PerturbationSpec, PolynomialTail,
                             Tabulated, apply_perturbation, discretize, preset, sample_trajectory)


def zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def half_drift(x):
    return -0.5 * np.asarray(x, dtype=float)


# --- noise densities -----------------------------------------------------------

@pytest.mark.parametrize("noise", [Laplace(1.0), Laplace(0.3), PolynomialTail(3, 1), PolynomialTail(1.5, 0.5)])
def test_noise_pdf_integrates_to_one(noise):
    total = sum(integrate.quad(noise.pdf, a, b, limit=200)[0]
                for a, b in [(-np.inf, -1), (-1, 1), (1, np.inf)])
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("noise", [Laplace(1.0), Laplace(2.5), PolynomialTail(3, 1), PolynomialTail(2.5, 2)])
def test_cdf_matches_integrated_pdf_and_ppf_inverts(noise):
    for x in (-7.0, -1.3, -0.2, 0.0, 0.4, 1.0, 3.5, 12.0):
        lower = integrate.quad(noise.pdf, -np.inf, min(x, -1.0))[0]
        if x > -1.0:
            lower += integrate.quad(noise.pdf, -1.0, x, points=[0.0])[0]
        assert noise.cdf(x) == pytest.approx(lower, abs=1e-8)
        assert noise.ppf(noise.cdf(x)) == pytest.approx(x, abs=1e-8)


def test_tabulated_density():
    g = GridSpec(-2, 2, 5)
    t = Tabulated(g, [0, 1, 2, 1, 0])
    assert integrate.quad(t.pdf, -3, 3, points=list(g.nodes))[0] == pytest.approx(1.0, abs=1e-9)
    assert t.pdf(5.0) == 0.0
    assert t.mean() == pytest.approx(0.0, abs=1e-15)
    pm = Tabulated.point_mass(g, 1.0)
    assert np.all(pm.sample(np.random.default_rng(0), 10) == 1.0)


def test_polynomial_tail_sampling_mean():
    noise = PolynomialTail(4, 1)
    draws = noise.sample(np.random.default_rng(3), 200_000)
    var = 2 * integrate.quad(lambda y: y * y * noise.pdf(y), 0, np.inf)[0]
    assert abs(draws.mean()) < 3 * math.sqrt(var / draws.size)


# --- discretization ------------------------------------------------------------

def test_laplace_row_hand_values():
    spec = ModelSpec(zero, zero, Laplace(1.0), Laplace(1.0))
    m = discretize(spec, GridSpec(-1, 1, 3), max_loss=None)
    e = math.exp(-1)
    expected = np.array([e, 1.0, e]) / (1 + 2 * e)
    np.testing.assert_allclose(m.transition[1], expected, rtol=0, atol=1e-15)
    np.testing.assert_allclose(m.transition[1], [0.2119416, 0.5761169, 0.2119416], atol=1e-7)


def test_truncation_is_policed():
    spec = ModelSpec(zero, zero, Laplace(1.0), Laplace(1.0))
    with pytest.raises(TruncationExcess):
        discretize(spec, GridSpec(-1, 1, 3))
    with pytest.raises(TruncationExcess):
        # every drifted centre falls halfway between nodes, outside the noise support
        shift = lambda x: np.full_like(np.asarray(x, dtype=float), 2.5)  # noqa: E731
        discretize(ModelSpec(shift, zero, Tabulated.point_mass(GridSpec(-1, 1, 3), 0.0), Laplace(1.0)),
                   GridSpec(-10, 10, 5), max_loss=None)


def test_reflection_symmetry_of_transition():
    spec = ModelSpec(half_drift, zero, Laplace(1.0), Laplace(1.0))
    T = discretize(spec, GridSpec(-10, 10, 81)).transition
    np.testing.assert_allclose(T, T[::-1, ::-1], rtol=0, atol=1e-15)


@pytest.mark.parametrize("name", ["laplace-contractive", "laplace-random-walk", "polynomial-contractive"])
def test_presets_are_stochastic_and_positive(name):
    grid = GridSpec(-20, 20, 201)
    m = discretize(preset(name), grid)
    np.testing.assert_allclose(m.transition.sum(axis=1), 1.0, atol=1e-10)
    ys = np.random.default_rng(1).normal(0, 10, 100)
    assert np.all(m.likelihood(ys) > 0)
    assert m.likelihood(ys).shape == (100, grid.points)


def test_grid_convergence(default_config):
    spec = default_config.true_spec()
    coarse = GridSpec(-20, 20, 401)
    fine = GridSpec(-20, 20, 801)
    pc = GridMeasure.uniform(coarse).weights @ discretize(spec, coarse).transition
    pf = GridMeasure.uniform(fine).weights @ discretize(spec, fine).transition
    # assign fine mass to the nearest coarse node; midpoints split evenly
    binned = pf[0::2].copy()
    binned[:-1] += 0.5 * pf[1::2]
    binned[1:] += 0.5 * pf[1::2]
    assert np.abs(pc - binned).sum() < 0.02


# --- perturbations ---------------------------------------------------------------

def test_zero_perturbation_is_identity():
    spec = preset("laplace-contractive")
    same = apply_perturbation(spec, PerturbationSpec())
    x = GridSpec(-20, 20, 401).nodes
    np.testing.assert_array_equal(same.drift(x), spec.drift(x))
    np.testing.assert_array_equal(same.obs_map(x), spec.obs_map(x))
    assert same.signal_noise == spec.signal_noise and same.obs_noise == spec.obs_noise


def test_compact_drift_perturbation():
    spec = ModelSpec(half_drift, zero, Laplace(1.0), Laplace(1.0))
    wrong = apply_perturbation(spec, PerturbationSpec.bump(0.01, radius=5.0))
    assert wrong.drift(3.0) == pytest.approx(spec.drift(3.0) + 0.01, abs=1e-15)
    assert wrong.drift(6.0) == spec.drift(6.0)


def test_noise_replacement_changes_rows():
    spec = ModelSpec(half_drift, zero, Laplace(1.0), Laplace(1.0))
    grid = GridSpec(-15, 15, 121)
    wrong = apply_perturbation(spec, PerturbationSpec(signal_noise=Laplace(1.05)))
    a, b = discretize(spec, grid), discretize(wrong, grid)
    assert np.abs(a.transition - b.transition).max() > 1e-3
    np.testing.assert_allclose(b.transition.sum(axis=1), 1.0, atol=1e-12)


def test_perturbation_locality(preset_models):
    true_model, wrong_model = preset_models
    x = true_model.grid.nodes
    outside = np.abs(x) > 2.0
    row_tv = np.abs(true_model.transition - wrong_model.transition).sum(axis=1)
    assert row_tv[outside].max() <= 1e-10
    assert row_tv[~outside].max() > 0


def test_from_arrays_lookup():
    m = DiscreteModel.from_arrays([[0.5, 0.5], [0.1, 0.9]], [[0.7, 0.3], [0.2, 0.8]])
    np.testing.assert_array_equal(m.likelihood(np.array([1, 0])), [[0.2, 0.8], [0.7, 0.3]])
    assert m.likelihood_at(1, 0) == 0.3


# --- simulation --------------------------------------------------------------------

def test_noiseless_chain_stays_put():
    g = GridSpec(-1, 1, 3)
    h = lambda x: 2.0 + np.asarray(x, dtype=float)  # noqa: E731
    spec = ModelSpec(zero, h, Tabulated.point_mass(g), Tabulated.point_mass(g))
    s = sample_trajectory(spec, 25, seed=4, initial=0.0)
    assert np.all(s.states == 0)
    assert np.all(s.observations == 2.0)


def test_sampling_is_deterministic():
    spec = preset("laplace-contractive")
    assert sample_trajectory(spec, 50, 11) == sample_trajectory(spec, 50, 11)
    assert sample_trajectory(spec, 50, 11) != sample_trajectory(spec, 50, 12)


def test_ar_recursion_stationary_mean():
    n, phi = 10_000, 0.5
    spec = ModelSpec(half_drift, zero, Laplace(1.0), Laplace(1.0))
    x = sample_trajectory(spec, n, seed=2).states[1:]
    # long-run variance of an AR(1) mean is var * (1 + phi) / (1 - phi)
    se = math.sqrt(x.var() * (1 + phi) / (1 - phi) / n)
    assert abs(x.mean()) < 3 * se
    assert x.var() == pytest.approx(2.0 / (1 - phi ** 2), rel=0.1)


def test_initial_law_from_measure():
    g = GridSpec(-2, 2, 5)
    spec = preset("laplace-contractive")
    mu = GridMeasure.point_mass(g, -1.0)
    assert sample_trajectory(spec, 3, 0, mu).states[0] == -1.0
    starts = [sample_trajectory(spec, 1, s, GridMeasure.uniform(g, 1, 2)).states[0] for s in range(40)]
    assert set(starts) == {1.0, 2.0}
