"""Bayesian shrinkage estimation for the normal-normal hierarchical model."""
from ._backend import BACKEND
from .errors import DegeneratePosteriorError, IntervalNotConverged
from .inference import (
    GridConfig,
    ShrinkagePosterior,
    ShrinkageSummary,
    TauPosteriorGrid,
    conditional_mu_posterior,
    log_marginal_likelihood,
    shrinkage_cdf,
    shrinkage_interval,
    shrinkage_moments,
    shrinkage_posterior,
    tau_posterior_grid,
)
from .model import Dataset, HeterogeneityPrior, SeRule, Study, parse_prior, read_dataset_csv

__version__ = "0.1.0"
