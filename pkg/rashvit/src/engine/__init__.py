"""
Engine Package

Training loop, evaluation metrics, SNR sweeps, ablations and feature export.
"""

from rashvit.src.engine.config import RunConfigFile, TrainConfig
from rashvit.src.engine.metrics import Metrics, evaluate, metrics_from_predictions
from rashvit.src.engine.trainer import RunRecord, Trainer, train
from rashvit.src.engine.sweep import AblationVariant, ablate, parse_snr_grid, snr_sweep
from rashvit.src.engine.export import export_features

__all__ = [
    "RunConfigFile",
    "TrainConfig",
    "Metrics",
    "evaluate",
    "metrics_from_predictions",
    "RunRecord",
    "Trainer",
    "train",
    "AblationVariant",
    "ablate",
    "parse_snr_grid",
    "snr_sweep",
    "export_features",
]
