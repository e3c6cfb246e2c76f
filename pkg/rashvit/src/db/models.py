"""
Result Data Models

This module defines the tabular records the harness emits.
We use a dual approach:
  1. Dataclasses for records passed between functions (with to_dict)
  2. Polars schemas for CSV output and the DuckDB results store

Every table written to disk goes through one of these schemas so column
order and types are stable across runs.
"""

from dataclasses import dataclass
from typing import List

import polars as pl


# =============================================================================
# POLARS SCHEMAS
# =============================================================================

# One row per layer of the architecture walk
LAYER_SCHEMA = {
    "name": pl.Utf8,                        # e.g. "stage2.block0.shsa.attention"
    "kind": pl.Utf8,                        # conv, batch_norm, shsa, linear, ...
    "in_shape": pl.Utf8,                    # "CxHxW"
    "out_shape": pl.Utf8,
    "params": pl.Int64,
    "macs": pl.Int64,                       # multiply-accumulates per sample
}

# Per-class precision / recall / F1
CLASS_METRICS_SCHEMA = {
    "label": pl.Int64,
    "class_name": pl.Utf8,
    "support": pl.Int64,                    # true count of the class
    "predicted": pl.Int64,                  # predicted count of the class
    "precision": pl.Float64,
    "recall": pl.Float64,
    "f1": pl.Float64,
}

# Confusion matrix in long format (rows = true label, cols = predicted)
CONFUSION_SCHEMA = {
    "true_label": pl.Int64,
    "pred_label": pl.Int64,
    "count": pl.Int64,
}

# Per-epoch training history
EPOCH_SCHEMA = {
    "epoch": pl.Int64,
    "train_loss": pl.Float64,
    "train_acc": pl.Float64,
    "val_loss": pl.Float64,
    "val_acc": pl.Float64,
}

# One evaluation at one (variant, snr, seed)
SWEEP_CELL_SCHEMA = {
    "run_id": pl.Utf8,                      # groups the cells of one sweep/ablation
    "variant": pl.Utf8,                     # "base" or the ablation axis=value
    "protocol": pl.Utf8,                    # "per_snr" or "clean_train"
    "snr_db": pl.Float64,                   # +inf = clean
    "seed": pl.Int64,
    "accuracy": pl.Float64,
    "n_test": pl.Int64,
}

# Aggregate over seeds per (variant, snr)
SWEEP_SUMMARY_SCHEMA = {
    "variant": pl.Utf8,
    "snr_db": pl.Float64,
    "mean_accuracy": pl.Float64,
    "std_accuracy": pl.Float64,             # population std over seeds
    "min_accuracy": pl.Float64,
    "max_accuracy": pl.Float64,
    "n_seeds": pl.Int64,
}

# Ablation comparison: variant vs base per SNR
ABLATION_SCHEMA = {
    "variant": pl.Utf8,
    "axis": pl.Utf8,                        # ahab / ffn / features, "" for base
    "value": pl.Utf8,
    "snr_db": pl.Float64,
    "mean_accuracy": pl.Float64,
    "delta_vs_base": pl.Float64,
}

# Per-class, per-split segment counts
HISTOGRAM_SCHEMA = {
    "label": pl.Int64,
    "class_name": pl.Utf8,
    "train": pl.Int64,
    "val": pl.Int64,
    "test": pl.Int64,
    "unassigned": pl.Int64,
    "total": pl.Int64,
}

# Finished training runs (one row per run directory)
RUN_SCHEMA = {
    "run_id": pl.Utf8,
    "out_dir": pl.Utf8,
    "seed": pl.Int64,
    "epochs": pl.Int64,
    "best_epoch": pl.Int64,
    "best_val_acc": pl.Float64,
    "test_acc": pl.Float64,
    "num_params": pl.Int64,
    "params_changed": pl.Boolean,
}


# =============================================================================
# PYTHON DATA CLASSES
# =============================================================================

@dataclass
class SweepCell:
    """Accuracy of one evaluation in a sweep or ablation grid."""
    run_id: str
    variant: str
    protocol: str
    snr_db: float
    seed: int
    accuracy: float
    n_test: int

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "variant": self.variant,
            "protocol": self.protocol,
            "snr_db": self.snr_db,
            "seed": self.seed,
            "accuracy": self.accuracy,
            "n_test": self.n_test,
        }


@dataclass
class RunSummary:
    """Headline numbers of a finished training run."""
    run_id: str
    out_dir: str
    seed: int
    epochs: int
    best_epoch: int
    best_val_acc: float
    test_acc: float
    num_params: int
    params_changed: bool

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "out_dir": self.out_dir,
            "seed": self.seed,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_acc,
            "test_acc": self.test_acc,
            "num_params": self.num_params,
            "params_changed": self.params_changed,
        }


# =============================================================================
# CONVERSION UTILITIES
# =============================================================================

def cells_to_polars(cells: List[SweepCell]) -> pl.DataFrame:
    """
    Convert sweep cells to a DataFrame with SWEEP_CELL_SCHEMA.

    Example:
        >>> df = cells_to_polars([cell1, cell2])
        >>> df.shape
        (2, 7)
    """
    if not cells:
        return pl.DataFrame(schema=SWEEP_CELL_SCHEMA)
    return pl.DataFrame([c.to_dict() for c in cells], schema=SWEEP_CELL_SCHEMA)


def runs_to_polars(runs: List[RunSummary]) -> pl.DataFrame:
    if not runs:
        return pl.DataFrame(schema=RUN_SCHEMA)
    return pl.DataFrame([r.to_dict() for r in runs], schema=RUN_SCHEMA)


def summarize_cells(cells: pl.DataFrame) -> pl.DataFrame:
    """Mean / std / min / max accuracy over seeds per (variant, snr)."""
    if cells.is_empty():
        return pl.DataFrame(schema=SWEEP_SUMMARY_SCHEMA)
    return (
        cells.group_by(["variant", "snr_db"], maintain_order=True)
        .agg(
            pl.col("accuracy").mean().alias("mean_accuracy"),
            pl.col("accuracy").std(ddof=0).alias("std_accuracy"),
            pl.col("accuracy").min().alias("min_accuracy"),
            pl.col("accuracy").max().alias("max_accuracy"),
            pl.len().cast(pl.Int64).alias("n_seeds"),
        )
        .select(list(SWEEP_SUMMARY_SCHEMA))
    )
