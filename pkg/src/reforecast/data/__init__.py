"""Data layer: trajectory/observation ingestion, update extraction,
marginal transforms, and update-process diagnostics."""

from .diagnostics import (
    DiagnosticsReport,
    diagnose_updates,
    fit_exponential_update_profile,
)
from .trajectory import (
    DEFAULT_OBS_SCHEMA,
    DEFAULT_TRAJECTORY_SCHEMA,
    HOUR,
    ForecastTrajectory,
    PseudoObservations,
    load_observations,
    load_trajectories,
    write_observations_csv,
    write_trajectory_csv,
)
from .transforms import AreaScaler, MarginalTransform
from .updates import UpdateSeries, extract_updates, load_updates_csv, write_updates_csv

__all__ = [
    "AreaScaler", "DEFAULT_OBS_SCHEMA", "DEFAULT_TRAJECTORY_SCHEMA",
    "DiagnosticsReport", "ForecastTrajectory", "HOUR", "MarginalTransform",
    "PseudoObservations", "UpdateSeries", "diagnose_updates", "extract_updates",
    "fit_exponential_update_profile", "load_observations", "load_trajectories",
    "load_updates_csv", "write_observations_csv", "write_trajectory_csv",
    "write_updates_csv",
]
