"""Ensemble distributionally robust Bayesian optimisation with contextual GP experts."""

from .acquisition import ContextBank, DesignBox, edrbo_value, erbo_value, optimize_acquisition, ucb_value
from .ensemble import (
    EnsembleConfig,
    EnsemblePosterior,
    barycentre,
    confidence_beta,
    ensemble_mean,
    ensemble_std,
    fit_ensemble,
    posterior_radius,
)
from .gp import Dataset, GPPosterior, KernelFamily, KernelSpec, NumericalError, fit_gp, predict
from .harness import RunConfig, RunResult, get_oracle, run, run_all
from .problems import PROBLEMS, Problem, get_problem

__version__ = "0.1.0"
