"""Bayesian authentication without adversary data.

World-model priors are fitted by empirical Bayes over multinomial user
models; pessimistic rules condition the adversary prior on the very
observation being classified.
"""

__version__ = "0.1.0"

from .probcore import (
    CountVector,
    DirichletBelief,
    MultinomialModel,
    PriorOdds,
    log_likelihood,
    log_marginal,
    posterior_update,
    sample_counts,
    sample_dirichlet,
)
from .empirical_bayes import FitReport, PopulationData, fit_dirichlet, initialize_phi, user_posterior
from .rules import (
    DecisionRule,
    Verdict,
    bias_transform,
    biased_decide,
    lemma1_gap,
    oracle_decide,
    world_decide,
)

__all__ = [
    "CountVector",
    "DirichletBelief",
    "MultinomialModel",
    "PriorOdds",
    "log_likelihood",
    "log_marginal",
    "posterior_update",
    "sample_counts",
    "sample_dirichlet",
    "FitReport",
    "PopulationData",
    "fit_dirichlet",
    "initialize_phi",
    "user_posterior",
    "DecisionRule",
    "Verdict",
    "bias_transform",
    "biased_decide",
    "lemma1_gap",
    "oracle_decide",
    "world_decide",
]
