"""Active semi-supervised clustering with learned feature weights."""

from .core import (
    ClusterAssignment,
    ConstraintStore,
    Dataset,
    MetricMatrix,
    NeighborhoodState,
    add_constraint,
    constraints_from_neighborhoods,
    mahalanobis_distance,
)
from .datagen import GENERATORS, SimSetting
from .harness import (
    ActiveSession,
    RunConfig,
    RunTrajectory,
    config_from_dict,
    config_to_dict,
    drive_session,
    label_oracle,
    run_experiment,
    run_session,
)
from .io import load_csv, save_csv, save_results
from .service import create_app

__all__ = [
    "ActiveSession",
    "ClusterAssignment",
    "ConstraintStore",
    "Dataset",
    "GENERATORS",
    "MetricMatrix",
    "NeighborhoodState",
    "RunConfig",
    "RunTrajectory",
    "SimSetting",
    "add_constraint",
    "config_from_dict",
    "config_to_dict",
    "constraints_from_neighborhoods",
    "create_app",
    "drive_session",
    "label_oracle",
    "load_csv",
    "mahalanobis_distance",
    "run_experiment",
    "run_session",
    "save_csv",
    "save_results",
]

__version__ = "0.1.0"
