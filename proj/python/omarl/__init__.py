"""Offline multi-agent actor-critic laboratory."""

from ._omarl import (
    ConfigError,
    DatasetError,
    DivergenceError,
    UsageError,
    config_keys,
    dataset_header,
    default_config,
    env_names,
    evaluate_checkpoint,
    expectile_loss,
    finetune_online,
    generate_dataset,
    loop_gain,
    loop_gain_svn,
    normalized_score,
    operator_norm,
    report,
    simulate_linear_td,
    spectral_radius,
    sweep,
    train,
)

__all__ = [
    "ConfigError",
    "DatasetError",
    "DivergenceError",
    "UsageError",
    "config_keys",
    "dataset_header",
    "default_config",
    "env_names",
    "evaluate_checkpoint",
    "expectile_loss",
    "finetune_online",
    "generate_dataset",
    "loop_gain",
    "loop_gain_svn",
    "normalized_score",
    "operator_norm",
    "report",
    "simulate_linear_td",
    "spectral_radius",
    "sweep",
    "train",
]
