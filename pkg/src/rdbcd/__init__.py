"""Reinforced doubly adaptive biased coin designs for covariate-adjusted
response-adaptive trials with two treatments and two categorical covariates."""

from .criteria import CriterionId, StratumCounts, criterion_closed_form, efficiencies
from .design import DesignSpace, DomainError, ModelParams, theta_surface
from .engine import (AggregateReport, ReplicateResult, SimulationConfig, asymptotic_information,
                     convergence_diagnostics, run_replicate, run_study)
from .estimation import TrialHistory, ols_estimate, plug_in_target
from .randomization import RandomizationRule
from .targets import SolverError, compound_target, constrained_target
from .weights import WeightSpec, weight

__version__ = "0.1.0"

__all__ = [
    "AggregateReport", "CriterionId", "DesignSpace", "DomainError", "ModelParams",
    "RandomizationRule", "ReplicateResult", "SimulationConfig", "SolverError",
    "StratumCounts", "TrialHistory", "WeightSpec", "asymptotic_information",
    "compound_target", "constrained_target", "convergence_diagnostics",
    "criterion_closed_form", "efficiencies", "ols_estimate", "plug_in_target",
    "run_replicate", "run_study", "theta_surface", "weight",
]
