"""Bayesian hierarchical correlated t-test for pairwise model comparison."""

from .diagnostics import Diagnostics, diagnostics
from .evaluate import (
    BayesConfig,
    BayesResult,
    PairPosterior,
    bayes_decision_matrix,
    bayes_family,
    compare_differences,
    compare_pair,
    pair_seed,
    posterior_theta,
    posterior_triples,
    verdict_from_theta,
)
from .model import HierPriors, HierState, cs_gaussian_logpdf, hier_log_posterior, rho_from_cv
from .sampler import McmcResult, SamplerConfig, run_mcmc
