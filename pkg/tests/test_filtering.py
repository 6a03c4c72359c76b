import math

import numpy as np
import pytest

from conftest import CHAIN4_E, CHAIN4_MU0, CHAIN4_OBS, CHAIN4_T, brute_force_posterior
from filterlab.errors import AllZeroMass, GridMismatch
from filterlab.filtering import (filter_step, multi_step, run_filter, run_filter_batch,
                                 window_log_evidence)
from filterlab.measure import GridMeasure, GridSpec, normalize, tv_distance
from filterlab.model import DiscreteModel


def two_state():
    return DiscreteModel.from_arrays([[0.9, 0.1], [0.2, 0.8]], [[0.7, 0.3]])


def chain4():
    return DiscreteModel.from_arrays(CHAIN4_T, CHAIN4_E)


def test_two_state_hand_computation():
    m = two_state()
    mu0 = normalize([0.5, 0.5])[0]
    post, logn = filter_step(m, mu0, 0)
    # predicted (0.55, 0.45), corrected (0.385, 0.135), mass 0.52
    np.testing.assert_allclose(post.weights, [0.385 / 0.52, 0.135 / 0.52], rtol=0, atol=1e-15)
    assert post.weights[0] == pytest.approx(0.7403846153846154, abs=1e-15)
    assert math.exp(logn) == pytest.approx(0.52, rel=1e-14)


def test_uninformative_observation():
    m = DiscreteModel.from_arrays([[0.9, 0.1], [0.2, 0.8]], lambda y: np.full(np.shape(y) + (2,), 0.3))
    mu0 = normalize([0.5, 0.5])[0]
    post, logn = filter_step(m, mu0, 1.7)
    np.testing.assert_allclose(post.weights, [0.55, 0.45], atol=1e-15)
    assert logn == pytest.approx(math.log(0.3), abs=1e-15)


def test_frozen_chain_keeps_point_mass():
    m = DiscreteModel.from_arrays(np.eye(4), CHAIN4_E)
    mu0 = GridMeasure.point_mass(m.grid, 2)
    for y in (0, 1, 2):
        assert filter_step(m, mu0, y)[0] == mu0


def test_zero_mass_and_grid_checks():
    m = DiscreteModel.from_arrays(np.eye(2), [[1.0, 0.0]])
    with pytest.raises(AllZeroMass):
        filter_step(m, GridMeasure.point_mass(m.grid, 1), 0)
    with pytest.raises(GridMismatch):
        filter_step(m, GridMeasure.uniform(GridSpec(0, 2, 2)), 0)


def test_exact_against_path_enumeration():
    m = chain4()
    mu0 = normalize(CHAIN4_MU0)[0]
    trace = run_filter(m, mu0, CHAIN4_OBS)
    post, evidence = brute_force_posterior(CHAIN4_T, CHAIN4_E[CHAIN4_OBS], CHAIN4_MU0)
    assert len(trace) == 11
    assert np.abs(trace[10].weights - post).sum() <= 1e-12
    assert math.exp(trace.log_evidence) == pytest.approx(evidence, rel=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_exact_against_path_enumeration_random_chains(seed):
    rng = np.random.default_rng(seed)
    s, n = rng.integers(2, 6), rng.integers(1, 9)
    T = rng.dirichlet(np.ones(s), s)
    E = rng.uniform(0.05, 1.0, (3, s))
    mu0 = rng.dirichlet(np.ones(s))
    obs = rng.integers(0, 3, n)
    trace = run_filter(DiscreteModel.from_arrays(T, E), normalize(mu0)[0], obs)
    post, evidence = brute_force_posterior(T, E[obs], mu0)
    assert np.abs(trace[-1].weights - post).sum() <= 1e-12
    assert math.exp(trace.log_evidence) == pytest.approx(evidence, rel=1e-10)


def test_single_step_trace():
    m = chain4()
    mu0 = normalize(CHAIN4_MU0)[0]
    trace = run_filter(m, mu0, [2])
    assert len(trace) == 2
    assert trace[1] == filter_step(m, mu0, 2)[0]


def test_multi_step_base_cases():
    m = chain4()
    mu0 = normalize(CHAIN4_MU0)[0]
    assert multi_step(m, mu0, []) is mu0
    assert multi_step(m, mu0, [1]) == filter_step(m, mu0, 1)[0]
    assert window_log_evidence(m, mu0, []) == 0.0


def _random_instance(rng):
    s = int(rng.integers(2, 9))
    T = rng.dirichlet(np.full(s, 0.5), s)
    E = rng.uniform(1e-3, 1.0, (4, s))
    mu = normalize(rng.dirichlet(np.ones(s)))[0]
    obs = rng.integers(0, 4, int(rng.integers(2, 15)))
    return DiscreteModel.from_arrays(T, E), mu, obs


def test_flow_property_and_product_form():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        m, mu, obs = _random_instance(rng)
        k = int(rng.integers(0, len(obs)))
        whole = multi_step(m, mu, obs)
        head = multi_step(m, mu, obs[:k])
        split = multi_step(m, filter_step(m, head, obs[k])[0], obs[k + 1:])
        assert tv_distance(whole, split) <= 1e-12
        # independent route: one unnormalized product of kernels, normalized once
        w = mu.weights.copy()
        for y in obs:
            w = (w @ m.transition) * m.likelihood(y)
        assert np.abs(whole.weights - w / w.sum()).sum() <= 1e-12


def test_evidence_telescopes():
    rng = np.random.default_rng(5)
    for _ in range(20):
        m, mu, obs = _random_instance(rng)
        k = int(rng.integers(0, len(obs) + 1))
        trace = run_filter(m, mu, obs)
        head = float(np.sum(trace.log_normalizers[:k]))
        tail = window_log_evidence(m, trace[k], obs[k:])
        assert math.exp(head + tail) == pytest.approx(math.exp(trace.log_evidence), rel=1e-10)


def test_batch_matches_serial(preset_models):
    true_model, _ = preset_models
    rng = np.random.default_rng(0)
    obs = rng.laplace(0, 1, (3, 25))
    mu0 = GridMeasure.laplace(true_model.grid, 0, 1)
    batch = run_filter_batch(true_model, mu0.weights, obs)
    for r in range(3):
        np.testing.assert_allclose(batch[r], run_filter(true_model, mu0, obs[r]).weights, atol=1e-15)
    np.testing.assert_array_equal(run_filter_batch(true_model, mu0.weights, obs, keep=False), batch[:, -1])


def test_underflow_guard_keeps_evidence():
    # subnormal likelihoods: the step mass falls below the underflow guard
    m = DiscreteModel.from_arrays([[0.5, 0.5], [0.5, 0.5]], [[1e-310, 3e-310]])
    trace = run_filter(m, normalize([0.5, 0.5])[0], [0, 0])
    np.testing.assert_allclose(trace[2].weights, [0.25, 0.75], atol=1e-10)
    assert trace.log_evidence == pytest.approx(2 * math.log(2e-310), rel=1e-10)
