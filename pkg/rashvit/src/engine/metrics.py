"""
Evaluation Metrics

Accuracy, confusion matrix, per-class precision / recall / F1 and the most
frequent confusions, plus `evaluate` which runs a checkpoint over one
split of a dataset under a given noise level.

Example:
    >>> metrics = evaluate("runs/desk/best.ckpt", dataset, split="test", snr_db=-6)
    >>> metrics.accuracy
    0.93
    >>> metrics.class_table()
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import polars as pl

from rashvit.src.datasets.archive import LabeledDataset
from rashvit.src.db.models import CLASS_METRICS_SCHEMA, CONFUSION_SCHEMA
from rashvit.src.engine.pipeline import STREAM_TEST, derive_seed, prepare_images
from rashvit.src.errors import ClassCountMismatchError, EmptyInputError, ShapeError
from rashvit.src.model.checkpoint import load_model
from rashvit.src.model.network import RAShViTNet

logger = logging.getLogger(__name__)

ModelSource = Union[RAShViTNet, str, Path]


@dataclass
class Metrics:
    """
    Classification results of one evaluation.

    Attributes:
        confusion: (K, K) counts, rows = true label, columns = prediction
        loss: Mean cross-entropy, when probabilities were available
        class_names: Label index -> name
    """
    confusion: np.ndarray
    loss: Optional[float] = None
    class_names: Optional[List[str]] = None

    @property
    def num_classes(self) -> int:
        return int(self.confusion.shape[0])

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.total) if self.total else 0.0

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    @property
    def predicted(self) -> np.ndarray:
        return self.confusion.sum(axis=0)

    @property
    def precision(self) -> np.ndarray:
        tp = np.diag(self.confusion).astype(np.float64)
        return np.divide(tp, self.predicted, out=np.zeros_like(tp), where=self.predicted > 0)

    @property
    def recall(self) -> np.ndarray:
        tp = np.diag(self.confusion).astype(np.float64)
        return np.divide(tp, self.support, out=np.zeros_like(tp), where=self.support > 0)

    @property
    def f1(self) -> np.ndarray:
        p, r = self.precision, self.recall
        return np.divide(2 * p * r, p + r, out=np.zeros_like(p), where=(p + r) > 0)

    def normalized_confusion(self) -> np.ndarray:
        """Row-normalized confusion (each true class sums to 1; empty rows stay 0)."""
        rows = self.support[:, None].astype(np.float64)
        return np.divide(self.confusion, rows, out=np.zeros(self.confusion.shape), where=rows > 0)

    def top_confusions(self, k: int = 5) -> List[Tuple[int, int, int]]:
        """Most frequent off-diagonal (true, predicted, count) triples."""
        pairs = [
            (int(i), int(j), int(self.confusion[i, j]))
            for i in range(self.num_classes)
            for j in range(self.num_classes)
            if i != j and self.confusion[i, j] > 0
        ]
        pairs.sort(key=lambda t: (-t[2], t[0], t[1]))
        return pairs[:k]

    def names(self) -> List[str]:
        return list(self.class_names or [str(i) for i in range(self.num_classes)])

    # -- tables ---------------------------------------------------------------

    def class_table(self) -> pl.DataFrame:
        return pl.DataFrame(
            {
                "label": list(range(self.num_classes)),
                "class_name": self.names(),
                "support": self.support.tolist(),
                "predicted": self.predicted.tolist(),
                "precision": self.precision.tolist(),
                "recall": self.recall.tolist(),
                "f1": self.f1.tolist(),
            },
            schema=CLASS_METRICS_SCHEMA,
        )

    def confusion_table(self) -> pl.DataFrame:
        k = self.num_classes
        return pl.DataFrame(
            {
                "true_label": np.repeat(np.arange(k), k).tolist(),
                "pred_label": np.tile(np.arange(k), k).tolist(),
                "count": self.confusion.reshape(-1).tolist(),
            },
            schema=CONFUSION_SCHEMA,
        )

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "total": self.total,
            "loss": self.loss,
            "class_names": self.names(),
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "top_confusions": [list(t) for t in self.top_confusions()],
        }


def confusion_matrix(y_true: Sequence[int], y_pred: Sequence[int], num_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"{y_true.shape[0]} labels but {y_pred.shape[0]} predictions")
    for name, values in (("labels", y_true), ("predictions", y_pred)):
        if values.size and (values.min() < 0 or values.max() >= num_classes):
            raise ShapeError(f"{name} must lie in [0, {num_classes})")
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (y_true, y_pred), 1)
    return matrix


def metrics_from_predictions(
    y_true: Sequence[int],
    y_pred: Sequence[int],
    num_classes: int,
    class_names: Optional[List[str]] = None,
    probabilities: Optional[np.ndarray] = None,
) -> Metrics:
    """Build Metrics from labels and predictions (and optionally class probabilities)."""
    loss = None
    if probabilities is not None:
        probs = np.asarray(probabilities, dtype=np.float64)
        picked = probs[np.arange(probs.shape[0]), np.asarray(y_true, dtype=np.int64)]
        loss = float(-np.mean(np.log(np.maximum(picked, np.finfo(np.float64).tiny)))) if picked.size else None
    return Metrics(confusion_matrix(y_true, y_pred, num_classes), loss, class_names)


def resolve_model(source: ModelSource) -> Tuple[RAShViTNet, dict]:
    """A live model passes through; a path is loaded as a checkpoint."""
    if isinstance(source, RAShViTNet):
        return source, {}
    return load_model(source)


def evaluate(
    model: ModelSource,
    dataset: LabeledDataset,
    split: str = "test",
    snr_db: float = math.inf,
    seed: int = 0,
    feature_mode: Optional[str] = None,
    calibrated: bool = True,
    batch_size: int = 64,
) -> Metrics:
    """
    Evaluate a model on one split in eval mode.

    Noise is injected per segment before featurization; +inf evaluates clean.

    Args:
        model: RAShViTNet or checkpoint path
        dataset: Tagged dataset
        split: "train", "val", "test" or "all"
        snr_db: Test SNR
        seed: Noise seed (the test stream of this seed is used)
        feature_mode: "fft" / "raw"; defaults to the mode stored in the checkpoint

    Raises:
        ClassCountMismatchError: Model and dataset disagree on K
        EmptyInputError: The split holds no segments
    """
    net, metadata = resolve_model(model)
    if net.cfg.num_classes != dataset.num_classes:
        raise ClassCountMismatchError(
            f"model has {net.cfg.num_classes} classes, dataset has {dataset.num_classes}"
        )
    if split == "all":
        signals, labels = dataset.signals, dataset.labels
    else:
        signals, labels = dataset.subset(split)
    if labels.shape[0] == 0:
        raise EmptyInputError(f"split {split!r} is empty")

    mode = feature_mode or metadata.get("feature_mode", "fft")
    images = prepare_images(signals, snr_db, derive_seed(seed, STREAM_TEST), mode, calibrated, net.dtype)
    probs = net.predict_proba(images, batch_size)
    preds = np.argmax(probs, axis=1)
    metrics = metrics_from_predictions(labels, preds, dataset.num_classes, list(dataset.classes), probs)
    logger.debug(f"evaluate split={split} snr={snr_db} seed={seed}: acc={metrics.accuracy:.4f}")
    return metrics
