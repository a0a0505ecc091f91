"""Non-RT tooling: scenarios, experiment runs, offline training and reports."""

from .config import (
    STATIC_MODES,
    BsSetup,
    ScenarioConfig,
    SliceSetup,
    build_world,
    desk_scenario,
    parse_mode,
    sweep_schedule,
)
from .experiment import DATASET_COLUMNS, ExperimentSummary, run_experiment, spectral_efficiency
from .reporting import action_distribution, compare_policies, compute_cdf, report
from .training import TrainingOptions, TrainingResult, load_ppo_file, train_bandit, train_offline

__all__ = [
    "BsSetup", "DATASET_COLUMNS", "ExperimentSummary", "STATIC_MODES", "ScenarioConfig",
    "SliceSetup", "TrainingOptions", "TrainingResult", "action_distribution", "build_world",
    "compare_policies", "compute_cdf", "desk_scenario", "load_ppo_file", "parse_mode", "report",
    "run_experiment", "spectral_efficiency", "sweep_schedule", "train_bandit", "train_offline",
]
