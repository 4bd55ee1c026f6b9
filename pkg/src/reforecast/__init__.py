"""reforecast: learn and simulate operational forecast-trajectory processes.

The pipeline: ingest forecast trajectories, extract the hourly forecast
updates, fit one of four generative models (Gaussian copula, normalizing
flow, low-rank Gaussian autoregression, flow-emission autoregression),
sample new update sequences, rebuild bounded trajectories against
pseudo-observations, and score the result (MiVo, energy score, variogram
score).
"""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .argen import (
    DgpvarModel,
    FlowModel,
    ModelConfig,
    RnnNfModel,
    fit_model,
)
from .copula_gen import CopulaModel, fit_gaussian_copula, sample_copula
from .data import (
    ForecastTrajectory,
    MarginalTransform,
    PseudoObservations,
    UpdateSeries,
    diagnose_updates,
    extract_updates,
    load_observations,
    load_trajectories,
)
from .evaluate import EvaluationReport, evaluate_model
from .flow import FlowStack
from .metrics import ScenarioSet, distance_matrix, energy_score, mivo, variogram_score
from .persistence import load_model, save_model
from .reconstruct import RebuildConfig, clip_trajectory, rebuild_trajectory, smoothness_report
from .synthbench import (
    SyntheticProcessConfig,
    generate_synthetic_trajectory,
    run_benchmark,
)
from .training import TrainConfig

__all__ = [
    "CopulaModel", "DgpvarModel", "EvaluationReport", "FlowModel", "FlowStack",
    "ForecastTrajectory", "KERNEL_BACKEND", "MarginalTransform", "ModelConfig",
    "PseudoObservations", "RebuildConfig", "RnnNfModel", "ScenarioSet",
    "SyntheticProcessConfig", "TrainConfig", "UpdateSeries", "clip_trajectory",
    "diagnose_updates", "distance_matrix", "energy_score", "evaluate_model",
    "extract_updates", "fit_gaussian_copula", "fit_model",
    "generate_synthetic_trajectory", "load_model", "load_observations",
    "load_trajectories", "mivo", "rebuild_trajectory", "run_benchmark",
    "sample_copula", "save_model", "smoothness_report", "variogram_score",
    "__version__",
]
