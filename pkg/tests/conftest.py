"""Shared fixtures and independent oracles."""
from __future__ import annotations

import numpy as np
import pytest

from filterlab.experiments import ExperimentConfig
from filterlab.measure import GridSpec

# Four-state chain used by the exactness checks. Rows sum to one; the
# emission matrix is indexed by the integer observation symbol.
CHAIN4_T = np.array([
    [0.70, 0.20, 0.05, 0.05],
    [0.10, 0.60, 0.20, 0.10],
    [0.05, 0.15, 0.50, 0.30],
    [0.25, 0.05, 0.10, 0.60],
])
CHAIN4_E = np.array([
    [0.60, 0.20, 0.15, 0.05],
    [0.30, 0.50, 0.30, 0.15],
    [0.10, 0.30, 0.55, 0.80],
])
CHAIN4_MU0 = np.array([0.4, 0.3, 0.2, 0.1])
CHAIN4_OBS = np.array([0, 2, 1, 1, 0, 2, 2, 1, 0, 2])


def brute_force_posterior(T, lik_rows, mu0):
    """Posterior of ``X_n`` and evidence by summing over every state path.

    ``lik_rows[k]`` is the likelihood vector of observation ``k + 1``. Each
    path weight is ``mu0(x_0) * prod_k T(x_{k-1}, x_k) * L_k(x_k)``; nothing
    is normalized until the end.
    """
    T = np.asarray(T, dtype=float)
    L = np.asarray(lik_rows, dtype=float)
    s, n = T.shape[0], L.shape[0]
    paths = np.stack(np.unravel_index(np.arange(s ** (n + 1)), (s,) * (n + 1)), axis=1)
    w = np.asarray(mu0, dtype=float)[paths[:, 0]]
    for k in range(1, n + 1):
        w = w * T[paths[:, k - 1], paths[:, k]] * L[k - 1, paths[:, k]]
    evidence = w.sum()
    post = np.bincount(paths[:, -1], weights=w, minlength=s) / evidence
    return post, evidence


@pytest.fixture(scope="session")
def default_config():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def preset_models(default_config):
    """True and wrong (bump 0.01 on |x| <= 2) models on the default grid."""
    return default_config.models()


@pytest.fixture(scope="session")
def small_grid():
    return GridSpec(-10.0, 10.0, 81)


@pytest.fixture(scope="session")
def certified_report(preset_models):
    from filterlab.assumptions import certify
    true_model, wrong_model = preset_models
    return certify(true_model, wrong_model)


@pytest.fixture(scope="session")
def default_sweep(default_config):
    """Sweep over perturbation factors 1, 2, 4 at the default size, timed."""
    import time

    from filterlab.experiments import sweep_experiment
    start = time.perf_counter()
    reports = sweep_experiment(default_config)
    return reports, time.perf_counter() - start


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that ran."""
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(results):
        ok, detail = results[name]
        terminalreporter.write_line(f"criterion {name}: {'PASS' if ok else 'FAIL'} ({detail})")
