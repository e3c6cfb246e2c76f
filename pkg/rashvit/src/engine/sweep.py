"""
SNR Sweeps and Ablations

A sweep evaluates one model configuration over a grid of SNRs and seeds.
Two protocols:

    per_snr      train and test at each SNR (one training run per cell)
    clean_train  train once per seed on clean data (or use a given
                 checkpoint) and test under every SNR

An ablation is a set of sweeps: the base configuration plus variants that
each change exactly one axis (ahab on/off, ffn res/plain, features
fft/raw). All variants see identical data and seeds.

Cells are independent and run on a thread pool capped by NUM_WORKERS.
Cell i gets seed SeedSequence([base_seed, i]) for its noise draws.

Usage:
    result = snr_sweep(dataset, ModelConfig.tiny(), TrainConfig(epochs=50),
                       snrs=parse_snr_grid("-10:2:10"), seeds=[0, 1, 2])
    result.write("runs/sweep")
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import polars as pl
from pydantic import BaseModel, ConfigDict

from rashvit import config
from rashvit.src.datasets.archive import LabeledDataset
from rashvit.src.db.models import ABLATION_SCHEMA, SweepCell, cells_to_polars, summarize_cells
from rashvit.src.engine.config import CLEAN_TOKEN, TrainConfig, parse_snr
from rashvit.src.engine.metrics import evaluate, resolve_model
from rashvit.src.engine.pipeline import derive_seed
from rashvit.src.engine.trainer import Trainer
from rashvit.src.errors import ConfigError
from rashvit.src.model.config import ModelConfig
from rashvit.src.utils.io import write_csv

logger = logging.getLogger(__name__)

PROTOCOLS = ("per_snr", "clean_train")
BASE_VARIANT = "base"


# =============================================================================
# SNR GRIDS
# =============================================================================

def parse_snr_grid(text: str) -> List[float]:
    """
    Parse "a:step:b" (inclusive) and comma lists; "clean" is +inf.

    Example:
        >>> parse_snr_grid("-10:2:10")      # 11 points
        >>> parse_snr_grid("clean,-6,0")
    """
    values: List[float] = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        if ":" not in token:
            try:
                values.append(parse_snr(token))
            except ValueError:
                raise ConfigError(f"bad SNR value {token!r}")
            continue
        parts = token.split(":")
        if len(parts) != 3:
            raise ConfigError(f"SNR range must be a:step:b, got {token!r}")
        try:
            start, step, stop = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"SNR range must be numeric, got {token!r}")
        if step == 0 or (stop - start) * step < 0:
            raise ConfigError(f"step {step} does not lead from {start} to {stop}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values.extend(round(start + i * step, 10) for i in range(count))
    if not values:
        raise ConfigError(f"empty SNR grid {text!r}")
    return values


def cell_seed(base_seed: int, index: int) -> int:
    return derive_seed(base_seed, index)


def _snr_label(snr: float) -> str:
    return CLEAN_TOKEN if math.isinf(snr) else f"{snr:g}"


# =============================================================================
# SWEEP
# =============================================================================

@dataclass
class SweepResult:
    run_id: str
    cells: pl.DataFrame
    summary: pl.DataFrame

    def write(self, out_dir: Union[str, Path], prefix: str = "sweep") -> Dict[str, Path]:
        out_dir = Path(out_dir)
        return {
            "cells": write_csv(out_dir / f"{prefix}_cells.csv", self.cells),
            "summary": write_csv(out_dir / f"{prefix}_summary.csv", self.summary),
        }

    def cell_objects(self) -> List[SweepCell]:
        return [SweepCell(**row) for row in self.cells.iter_rows(named=True)]


def _run_cells(jobs, workers: Optional[int]) -> list:
    workers = max(1, workers or config.NUM_WORKERS)
    if workers == 1 or len(jobs) == 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def snr_sweep(
    dataset: LabeledDataset,
    model_cfg: Optional[ModelConfig],
    train_cfg: TrainConfig,
    snrs: Sequence[float],
    seeds: Sequence[int],
    protocol: Literal["per_snr", "clean_train"] = "per_snr",
    checkpoint=None,
    variant: str = BASE_VARIANT,
    run_id: str = "sweep",
    workers: Optional[int] = None,
) -> SweepResult:
    """
    Evaluate every (snr, seed) cell.

    Args:
        dataset: Tagged dataset (train/val used for training, test for scoring)
        model_cfg: Architecture to train (ignored when `checkpoint` is given)
        train_cfg: Protocol; its seed is replaced by each sweep seed
        snrs: SNR grid in dB (+inf = clean)
        seeds: Training / noise seeds
        protocol: "per_snr" or "clean_train"
        checkpoint: Trained model or checkpoint path; implies clean_train
        variant: Name written into every cell

    Returns:
        SweepResult with |snrs| x |seeds| cells and a per-SNR summary
    """
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r} (expected one of {PROTOCOLS})")
    if checkpoint is not None and protocol != "clean_train":
        raise ConfigError("a fixed checkpoint can only be swept with the clean_train protocol")
    if not snrs or not seeds:
        raise ConfigError("sweep needs at least one SNR and one seed")

    grid: List[Tuple[int, float, int]] = [
        (i * len(seeds) + j, float(snr), int(seed))
        for i, snr in enumerate(snrs)
        for j, seed in enumerate(seeds)
    ]

    models: Dict[int, object] = {}
    mode = train_cfg.feature_mode
    if checkpoint is not None:
        net, metadata = resolve_model(checkpoint)
        mode = metadata.get("feature_mode", mode)
        models = {seed: net for seed in seeds}
    elif protocol == "clean_train":
        def fit_clean(seed):
            cfg = train_cfg.model_copy(update={"seed": seed}).with_snr(math.inf)
            trainer = Trainer(model_cfg, cfg, run_id=f"{run_id}/{variant}/seed{seed}")
            trainer.run(dataset)
            return trainer.model
        fitted = _run_cells([lambda s=s: fit_clean(s) for s in seeds], workers)
        models = dict(zip(seeds, fitted))

    def run_cell(index: int, snr: float, seed: int) -> SweepCell:
        eval_seed = cell_seed(seed, index)
        if protocol == "per_snr":
            cfg = train_cfg.model_copy(update={"seed": seed}).with_snr(snr)
            trainer = Trainer(model_cfg, cfg, run_id=f"{run_id}/{variant}/{_snr_label(snr)}/seed{seed}")
            trainer.run(dataset)
            model = trainer.model
        else:
            model = models[seed]
        metrics = evaluate(
            model, dataset, "test", snr, eval_seed, mode,
            train_cfg.calibrated_noise, train_cfg.eval_batch_size,
        )
        logger.info(
            f"[{variant}] snr {_snr_label(snr)} dB seed {seed}: accuracy {metrics.accuracy:.4f}"
        )
        return SweepCell(run_id, variant, protocol, snr, seed, metrics.accuracy, metrics.total)

    cells = _run_cells([lambda c=c: run_cell(*c) for c in grid], workers)
    frame = cells_to_polars(cells)
    return SweepResult(run_id, frame, summarize_cells(frame))


# =============================================================================
# ABLATION
# =============================================================================

AXES: Dict[str, Tuple[str, str]] = {
    "ahab": ("on", "off"),
    "ffn": ("res", "plain"),
    "features": ("fft", "raw"),
}


class AblationVariant(BaseModel):
    """Axis settings of one variant; unset axes keep the base value."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    ahab: Optional[Literal["on", "off"]] = None
    ffn: Optional[Literal["res", "plain"]] = None
    features: Optional[Literal["fft", "raw"]] = None


def base_axes(model_cfg: ModelConfig, train_cfg: TrainConfig) -> Dict[str, str]:
    return {
        "ahab": "on" if model_cfg.use_ahab else "off",
        "ffn": "res" if model_cfg.use_res_ffn else "plain",
        "features": train_cfg.feature_mode,
    }


def apply_variant(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    variant: AblationVariant,
) -> Tuple[str, str, ModelConfig, TrainConfig]:
    """
    Resolve a variant against the base.

    Returns:
        (axis, value, model config, train config)

    Raises:
        ConfigError: The variant changes zero or more than one axis
    """
    base = base_axes(model_cfg, train_cfg)
    changed = {
        axis: value
        for axis, value in variant.model_dump().items()
        if value is not None and value != base[axis]
    }
    if len(changed) != 1:
        raise ConfigError(
            f"ablation variant must change exactly one axis from base {base}, "
            f"got changes {changed or 'none'}"
        )
    (axis, value), = changed.items()
    if axis == "ahab":
        model_cfg = model_cfg.model_copy(update={"use_ahab": value == "on"})
    elif axis == "ffn":
        model_cfg = model_cfg.model_copy(update={"use_res_ffn": value == "res"})
    else:
        train_cfg = train_cfg.model_copy(update={"feature_mode": value})
    return axis, value, model_cfg, train_cfg


@dataclass
class AblationResult:
    run_id: str
    cells: pl.DataFrame
    summary: pl.DataFrame
    comparison: pl.DataFrame

    def write(self, out_dir: Union[str, Path]) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        return {
            "cells": write_csv(out_dir / "ablation_cells.csv", self.cells),
            "summary": write_csv(out_dir / "ablation_summary.csv", self.summary),
            "comparison": write_csv(out_dir / "ablation.csv", self.comparison),
        }


def ablate(
    dataset: LabeledDataset,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    variants: Sequence[AblationVariant],
    snrs: Sequence[float],
    seeds: Sequence[int],
    protocol: Literal["per_snr", "clean_train"] = "per_snr",
    run_id: str = "ablation",
    workers: Optional[int] = None,
) -> AblationResult:
    """
    Sweep the base configuration and every single-axis variant.

    The comparison table holds, per variant and SNR, the mean accuracy and
    its difference from the base at the same SNR.

    Raises:
        ConfigError: A variant changes zero or several axes
    """
    resolved = [apply_variant(model_cfg, train_cfg, v) for v in variants]
    runs = [(BASE_VARIANT, "", "", model_cfg, train_cfg)]
    runs += [(f"{axis}={value}", axis, value, m, t) for axis, value, m, t in resolved]

    cell_frames, axis_rows = [], []
    for name, axis, value, m_cfg, t_cfg in runs:
        logger.info(f"Ablation {run_id}: sweeping variant {name}")
        result = snr_sweep(dataset, m_cfg, t_cfg, snrs, seeds, protocol,
                           variant=name, run_id=run_id, workers=workers)
        cell_frames.append(result.cells)
        axis_rows.append({"variant": name, "axis": axis, "value": value})

    cells = pl.concat(cell_frames)
    summary = summarize_cells(cells)
    base = (
        summary.filter(pl.col("variant") == BASE_VARIANT)
        .select("snr_db", pl.col("mean_accuracy").alias("base_accuracy"))
    )
    comparison = (
        summary.join(pl.DataFrame(axis_rows), on="variant", how="left")
        .join(base, on="snr_db", how="left")
        .with_columns((pl.col("mean_accuracy") - pl.col("base_accuracy")).alias("delta_vs_base"))
        .select(list(ABLATION_SCHEMA))
        .cast(ABLATION_SCHEMA)
    )
    return AblationResult(run_id, cells, summary, comparison)


def ordering_margin(comparison: pl.DataFrame, better: str, worse: str, snr_db: float) -> float:
    """Mean accuracy of `better` minus `worse` at one SNR (used to report ablation directions)."""
    def acc(name: str) -> float:
        rows = comparison.filter((pl.col("variant") == name) & (pl.col("snr_db") == snr_db))
        return float(rows["mean_accuracy"][0])
    return acc(better) - acc(worse)

