"""Active learning of optimal shift interventions in linear Gaussian causal models."""

from causalacq.graph import Dag, GraphKind, Misspecification, generate, perturb
from causalacq.scm import (
    Instance,
    LinearScm,
    gen_instance,
    gen_weights,
    optimal_intervention,
    sample,
    standardize,
    target_mean,
)
from causalacq.posterior import (
    Batch,
    DagBlrPosterior,
    KnownVariance,
    NodeBelief,
    UnknownVariance,
    augmented_M,
    estimate_a_star,
    hypothetical_sample,
    init_prior,
    posterior_mean_B,
    update,
)

__all__ = [
    "Dag",
    "GraphKind",
    "Misspecification",
    "generate",
    "perturb",
    "LinearScm",
    "Instance",
    "gen_weights",
    "standardize",
    "sample",
    "optimal_intervention",
    "target_mean",
    "gen_instance",
    "NodeBelief",
    "DagBlrPosterior",
    "Batch",
    "KnownVariance",
    "UnknownVariance",
    "init_prior",
    "update",
    "posterior_mean_B",
    "estimate_a_star",
    "hypothetical_sample",
    "augmented_M",
]
