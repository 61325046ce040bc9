"""Conditional Stein discrepancies, Stein equation solvers and TV / Wasserstein bounds."""

from .discrepancy import (
    DiscrepancyReport,
    empirical_stein,
    exact_stein,
    stein_identity_check,
    tv_bound,
    w_bound,
)
from .equation import SteinSolution, residual, solve, solve_conditional
from .estimator import ConditionalSteinDiscrepancy
from .measures import (
    ConditionalModel,
    FiniteDiscrete,
    FiniteLaw,
    Gamma,
    Gaussian,
    JointTable,
    Poisson,
    SampleSet,
    bin_samples,
    disintegrate,
    joint_table,
    mixture_marginal,
)
from .operators import BivariateTestFunction, TestFunction, apply, conditional_apply, zero_mean_residual
from .oracle import characterize_finite, conditional_expectation_check, tv_exact, wasserstein_exact
from .sim import perturb, sample_independent, sample_model
from .sources import Source

__version__ = "0.1.0"

__all__ = [
    "BivariateTestFunction", "ConditionalModel", "ConditionalSteinDiscrepancy", "DiscrepancyReport",
    "FiniteDiscrete", "FiniteLaw", "Gamma", "Gaussian", "JointTable", "Poisson", "SampleSet",
    "Source", "SteinSolution", "TestFunction", "apply", "bin_samples", "characterize_finite",
    "conditional_apply", "conditional_expectation_check", "disintegrate", "empirical_stein",
    "exact_stein", "joint_table", "mixture_marginal", "perturb", "residual", "sample_independent",
    "sample_model", "solve", "solve_conditional", "stein_identity_check", "tv_bound", "tv_exact",
    "w_bound", "wasserstein_exact", "zero_mean_residual",
]
