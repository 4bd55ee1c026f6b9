"""Autoregressive generative models over update sequences."""

from .emission import (
    EmissionDistribution,
    LowRankGaussianHead,
    emission_params,
    lowrank_gaussian_logprob,
)
from .encoder import RecurrentEncoder
from .models import (
    MODEL_KINDS,
    DgpvarModel,
    FlowModel,
    ModelConfig,
    RnnNfModel,
    fit_dgpvar,
    fit_flow_baseline,
    fit_model,
    fit_rnnnf,
)

__all__ = [
    "MODEL_KINDS", "DgpvarModel", "EmissionDistribution", "FlowModel",
    "LowRankGaussianHead", "ModelConfig", "RecurrentEncoder", "RnnNfModel",
    "emission_params", "fit_dgpvar", "fit_flow_baseline", "fit_model",
    "fit_rnnnf", "lowrank_gaussian_logprob",
]
