from .config import ConfigError, ExperimentConfig, apply_overrides, parse_config, validate_config
from .experiment import SeedFailure, build_tasks, load_checkpoints, run_experiment
from .metrics import (
    CSV_COLUMNS,
    MetricsRecord,
    aggregate_epochs,
    cross_task_eval,
    episode_returns,
    parameter_deviation,
    parameter_deviation_details,
    read_jsonl,
    read_metrics_csv,
    write_jsonl,
    write_metrics_csv,
    zero_shot_eval,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "apply_overrides",
    "parse_config",
    "validate_config",
    "SeedFailure",
    "build_tasks",
    "load_checkpoints",
    "run_experiment",
    "CSV_COLUMNS",
    "MetricsRecord",
    "aggregate_epochs",
    "cross_task_eval",
    "episode_returns",
    "parameter_deviation",
    "parameter_deviation_details",
    "read_jsonl",
    "read_metrics_csv",
    "write_jsonl",
    "write_metrics_csv",
    "zero_shot_eval",
]
