"""Experiment harness, self-checks and command-line entry points."""

from .runner import (
    ExperimentConfig,
    ExperimentResult,
    RateCurve,
    compare_predictors,
    non_ctw_experiment,
    run_experiment,
)
from .verify import CheckResult, verify

__all__ = [
    "CheckResult",
    "ExperimentConfig",
    "ExperimentResult",
    "RateCurve",
    "compare_predictors",
    "non_ctw_experiment",
    "run_experiment",
    "verify",
]
