"""Experiment harness: configs, policy files, training runs, curves and the CLI."""
from .config import ExperimentConfig, load_config, parse_config
from .curves import aggregate, emit_curves, mean_band, smooth, trend_slope
from .metrics import COLUMNS, MetricsRecord, read_metrics, write_metrics
from .policyfile import (PolicyFile, decode_policy, encode_policy, load_manifest,
                         load_policy, load_policy_file, save_policy)
from .runner import (TrainingDiverged, evaluate_policy, grid_greedy_ratio, run_training,
                     train_seed, train_source, train_source_policies)

__all__ = [
    "COLUMNS", "ExperimentConfig", "MetricsRecord", "PolicyFile", "TrainingDiverged",
    "aggregate", "decode_policy", "emit_curves", "encode_policy", "evaluate_policy",
    "grid_greedy_ratio", "load_config", "load_manifest", "load_policy", "load_policy_file",
    "mean_band", "parse_config", "read_metrics", "run_training", "save_policy", "smooth",
    "train_seed", "train_source", "train_source_policies", "trend_slope", "write_metrics",
]
