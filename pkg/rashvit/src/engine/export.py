"""
Feature Export

Writes the pooled pre-classifier feature vector of every sample, for
external dimensionality reduction and plotting.

Columns: f0 .. f{D-1}, label, split
"""

import logging
import math
from pathlib import Path
from typing import Optional, Union

import numpy as np
import polars as pl

from rashvit.src.datasets.archive import LabeledDataset
from rashvit.src.engine.metrics import ModelSource, resolve_model
from rashvit.src.engine.pipeline import STREAM_TEST, derive_seed, prepare_images
from rashvit.src.errors import ClassCountMismatchError
from rashvit.src.utils.io import write_csv

logger = logging.getLogger(__name__)


def export_features(
    model: ModelSource,
    dataset: LabeledDataset,
    split: str = "test",
    out_path: Optional[Union[str, Path]] = None,
    snr_db: float = math.inf,
    seed: int = 0,
    feature_mode: Optional[str] = None,
) -> pl.DataFrame:
    """
    One row per sample of `split` ("all" for every segment), in dataset order.

    The width D equals the input width of the classifier head.
    """
    net, metadata = resolve_model(model)
    if net.cfg.num_classes != dataset.num_classes:
        raise ClassCountMismatchError(
            f"model has {net.cfg.num_classes} classes, dataset has {dataset.num_classes}"
        )
    mask = np.ones(len(dataset), dtype=bool) if split == "all" else dataset.split_mask(split)
    mode = feature_mode or metadata.get("feature_mode", "fft")
    images = prepare_images(dataset.signals[mask], snr_db, derive_seed(seed, STREAM_TEST), mode, dtype=net.dtype)
    features = net.embed(images).astype(np.float64)

    frame = pl.DataFrame(
        {f"f{i}": features[:, i] for i in range(features.shape[1])}
        if features.shape[0]
        else {f"f{i}": pl.Series([], dtype=pl.Float64) for i in range(net.cfg.embed_dims[2])}
    ).with_columns(
        pl.Series("label", dataset.labels[mask].tolist(), dtype=pl.Int64),
        pl.Series("split", [str(s) for s in dataset.splits[mask]], dtype=pl.Utf8),
    )
    if out_path is not None:
        write_csv(out_path, frame)
        logger.info(f"Exported {frame.height} feature rows (width {features.shape[1]}) to {out_path}")
    return frame
