"""Stability of nonlinear filters under model misspecification.

Grid-discretized hidden Markov models, the exact recursive filter, checks of
the sufficient conditions for uniform-in-time robustness, and Monte Carlo
experiments that measure how far a misspecified filter drifts from the exact
one.
"""
from .assumptions import AssumptionReport, certify
from .errors import (AllZeroMass, FilterLabError, GridMismatch, NegativeWeight, ParseError,
                     RecurrenceFailure, TruncationExcess, UnboundedRatio, ValidationError)
from .experiments import (ExperimentConfig, forgetting_experiment, stability_experiment,
                          sweep_experiment, telescoping_diagnostic)
from .filtering import FilterTrace, filter_step, multi_step, run_filter
from .measure import GridMeasure, GridSpec, birkhoff_distance, exp_moment, normalize, tv_distance
from .model import (DiscreteModel, Laplace, ModelSpec, PerturbationSpec, PolynomialTail, Tabulated,
                    apply_perturbation, discretize, preset, sample_trajectory)

__version__ = "0.1.0"

__all__ = [
    "AllZeroMass", "AssumptionReport", "DiscreteModel", "ExperimentConfig", "FilterLabError",
    "FilterTrace", "GridMeasure", "GridMismatch", "GridSpec", "Laplace", "ModelSpec",
    "NegativeWeight", "ParseError", "PerturbationSpec", "PolynomialTail", "RecurrenceFailure",
    "Tabulated", "TruncationExcess", "UnboundedRatio", "ValidationError", "apply_perturbation",
    "birkhoff_distance", "certify", "discretize", "exp_moment", "filter_step",
    "forgetting_experiment", "multi_step", "normalize", "preset", "run_filter",
    "sample_trajectory", "stability_experiment", "sweep_experiment", "telescoping_diagnostic",
    "tv_distance",
]
