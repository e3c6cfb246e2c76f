"""
Training Loop

Mini-batch AdamW on cross-entropy with best-validation checkpointing.

Flow per epoch:
    permute train indices (seeded) -> batches -> forward on a tape
    -> backward -> AdamW -> validation pass in eval mode -> keep best

Everything random (initialization, batch order, dropout masks, noise) is
derived from TrainConfig.seed, so two runs with the same inputs produce
identical loss curves and identical run.json files. Wall-clock timing is
written to timing.json beside run.json.

Usage:
    from rashvit.src.engine.trainer import Trainer

    trainer = Trainer(ModelConfig.tiny(), TrainConfig(epochs=50), out_dir="runs/desk")
    record = trainer.run(dataset)
    print(record)
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import polars as pl

from rashvit.src.datasets.archive import LabeledDataset
from rashvit.src.db.models import EPOCH_SCHEMA, RunSummary
from rashvit.src.diffcore import ops
from rashvit.src.diffcore.optim import OptimizerState, adamw_step
from rashvit.src.diffcore.tensor import Tape, Tensor, backward
from rashvit.src.engine.config import TrainConfig
from rashvit.src.engine.metrics import Metrics, evaluate
from rashvit.src.engine.pipeline import (
    STREAM_DROPOUT,
    STREAM_TRAIN,
    STREAM_VAL,
    derive_seed,
    make_batches,
    prepare_images,
)
from rashvit.src.errors import ClassCountMismatchError, DivergenceError, EmptyInputError
from rashvit.src.model.checkpoint import Checkpoint, restore
from rashvit.src.model.config import ModelConfig
from rashvit.src.model.layers import ForwardContext
from rashvit.src.model.network import RAShViTNet
from rashvit.src.sigproc.noise import GENERATOR_NAME
from rashvit.src.utils.io import atomic_write_bytes, write_csv, write_json

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "best.ckpt"
RECORD_NAME = "run.json"
TIMING_NAME = "timing.json"
HISTORY_NAME = "history.csv"

# Choices the architecture leaves open, recorded with every run.
DESIGN_CHOICES = {
    "loss": "softmax_cross_entropy",
    "init": "trunc_normal(0.02) linear, fan_out_normal conv",
    "norm": "batch_norm inside ConvBN units, per model.norm",
}


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: Optional[float]
    val_acc: Optional[float]

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "train_acc": self.train_acc,
            "val_loss": self.val_loss,
            "val_acc": self.val_acc,
        }


@dataclass
class RunRecord:
    """
    Provenance and results of one training run.

    Serialized to run.json; contains no timing so repeated runs are
    byte-identical.
    """
    run_id: str
    model: ModelConfig
    train: TrainConfig
    dataset: Dict
    generator: str
    num_params: int
    history: List[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: Optional[float] = None
    params_changed: bool = True
    checkpoint: Optional[str] = None
    test_metrics: Optional[Metrics] = None
    wall_clock_s: float = 0.0

    @property
    def test_accuracy(self) -> Optional[float]:
        return self.test_metrics.accuracy if self.test_metrics else None

    def history_frame(self) -> pl.DataFrame:
        if not self.history:
            return pl.DataFrame(schema=EPOCH_SCHEMA)
        return pl.DataFrame([h.to_dict() for h in self.history], schema=EPOCH_SCHEMA)

    def summary(self, out_dir: str = "") -> RunSummary:
        return RunSummary(
            run_id=self.run_id,
            out_dir=out_dir,
            seed=self.train.seed,
            epochs=self.train.epochs,
            best_epoch=self.best_epoch,
            best_val_acc=self.best_val_acc,
            test_acc=self.test_accuracy,
            num_params=self.num_params,
            params_changed=self.params_changed,
        )

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "model": self.model.model_dump(mode="json"),
            "train": self.train.model_dump(mode="json"),
            "dataset": self.dataset,
            "seed": self.train.seed,
            "generator": self.generator,
            "design": DESIGN_CHOICES,
            "num_params": self.num_params,
            "history": [h.to_dict() for h in self.history],
            "best_epoch": self.best_epoch,
            "best_val_acc": self.best_val_acc,
            "params_changed": self.params_changed,
            "checkpoint": self.checkpoint,
            "test_metrics": self.test_metrics.to_dict() if self.test_metrics else None,
        }

    def __str__(self) -> str:
        test = f"{self.test_accuracy:.4f}" if self.test_metrics else "n/a"
        val = f"{self.best_val_acc:.4f}" if self.best_val_acc is not None else "n/a"
        return (
            f"RunRecord({self.run_id}): {len(self.history)} epochs, "
            f"best val {val} @ epoch {self.best_epoch}, test {test}"
        )


def _dataset_provenance(dataset: LabeledDataset) -> dict:
    return {
        "size": len(dataset),
        "classes": list(dataset.classes),
        "sample_rate_hz": dataset.sample_rate_hz,
        "window": dataset.window,
        "counts": {name: int(dataset.split_mask(name).sum()) for name in ("train", "val", "test")},
        "provenance": dataset.provenance,
    }


class Trainer:
    """
    Runs one training job.

    Example:
        >>> trainer = Trainer(ModelConfig.tiny(), TrainConfig(epochs=300), out_dir="runs/desk")
        >>> record = trainer.run(split(synth_generate(SynthSpec()), seed=0))
        >>> print(record)
    """

    def __init__(
        self,
        model_cfg: ModelConfig,
        train_cfg: TrainConfig,
        out_dir: Optional[Union[str, Path]] = None,
        run_id: Optional[str] = None,
    ):
        """
        Args:
            model_cfg: Architecture
            train_cfg: Optimization protocol
            out_dir: Artifact directory; None keeps everything in memory
            run_id: Identifier recorded in run.json (default: out_dir name or "run")
        """
        self.model_cfg = model_cfg
        self.train_cfg = train_cfg
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.run_id = run_id or (self.out_dir.name if self.out_dir else "run")
        self.model: Optional[RAShViTNet] = None
        self.best: Optional[Checkpoint] = None

    # =========================================================================
    # INTERNALS
    # =========================================================================

    def _images(self, dataset: LabeledDataset, name: str, snr_db: float, stream: int):
        signals, labels = dataset.subset(name)
        cfg = self.train_cfg
        images = prepare_images(
            signals, snr_db, derive_seed(cfg.seed, stream), cfg.feature_mode, cfg.calibrated_noise
        )
        return images, labels

    def _train_epoch(self, epoch, x, y, params, state, order_rng) -> EpochStats:
        cfg = self.train_cfg
        batches = make_batches(order_rng.permutation(y.shape[0]), cfg.batch_size)
        names = list(params)
        tensors = [params[n] for n in names]
        loss_sum, correct = 0.0, 0

        for b, idx in enumerate(batches):
            ctx = ForwardContext.train(derive_seed(cfg.seed, STREAM_DROPOUT, epoch, b))
            with Tape() as tape:
                logits = self.model(Tensor(x[idx]), ctx)
                loss = ops.cross_entropy(logits, y[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(
                    f"non-finite loss {value} at epoch {epoch}, batch {b} (lr={cfg.lr})"
                )
            grads = backward(loss, tape, wrt=tensors)
            adamw_step(params, dict(zip(names, grads)), state)
            loss_sum += value * idx.shape[0]
            correct += int(np.sum(np.argmax(logits.data, axis=1) == y[idx]))
            logger.debug(f"epoch {epoch} batch {b}: loss {value:.6f}")

        return EpochStats(epoch, loss_sum / y.shape[0], correct / y.shape[0], None, None)

    def _validate(self, x, y):
        if y.shape[0] == 0:
            return None, None
        probs = self.model.predict_proba(x, self.train_cfg.eval_batch_size)
        picked = probs[np.arange(y.shape[0]), y].astype(np.float64)
        loss = float(-np.mean(np.log(np.maximum(picked, np.finfo(np.float64).tiny))))
        acc = float(np.mean(np.argmax(probs, axis=1) == y))
        return loss, acc

    def _checkpoint_metadata(self, stats: EpochStats) -> dict:
        return {
            "epoch": stats.epoch,
            "val_acc": stats.val_acc,
            "feature_mode": self.train_cfg.feature_mode,
            "seed": self.train_cfg.seed,
            "run_id": self.run_id,
        }

    # =========================================================================
    # RUN
    # =========================================================================

    def run(self, dataset: LabeledDataset) -> RunRecord:
        """
        Train on the dataset's train split, select on val, report on test.

        Raises:
            EmptyInputError: Fewer than two training segments
            ClassCountMismatchError: Dataset and model disagree on K
            DivergenceError: Loss became NaN/Inf
        """
        cfg = self.train_cfg
        if dataset.num_classes != self.model_cfg.num_classes:
            raise ClassCountMismatchError(
                f"model has {self.model_cfg.num_classes} classes, dataset has {dataset.num_classes}"
            )
        started = time.perf_counter()

        x_train, y_train = self._images(dataset, "train", cfg.train_snr_db, STREAM_TRAIN)
        x_val, y_val = self._images(dataset, "val", cfg.train_snr_db, STREAM_VAL)
        if y_train.shape[0] < 2:
            raise EmptyInputError(f"train split has {y_train.shape[0]} segments; at least 2 needed")
        if y_val.shape[0] == 0:
            logger.warning("Validation split is empty; the final epoch is kept as the checkpoint")

        self.model = RAShViTNet(self.model_cfg, seed=cfg.seed)
        params = self.model.parameters()
        initial = {name: t.data.copy() for name, t in params.items()}
        state = OptimizerState(
            lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps, weight_decay=cfg.weight_decay
        )
        order_rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, STREAM_TRAIN, 0)))

        record = RunRecord(
            run_id=self.run_id,
            model=self.model_cfg,
            train=cfg,
            dataset=_dataset_provenance(dataset),
            generator=GENERATOR_NAME,
            num_params=self.model.num_parameters(),
        )
        logger.info(
            f"Training {self.run_id}: {y_train.shape[0]} train / {y_val.shape[0]} val segments, "
            f"{record.num_params:,} parameters, {cfg.epochs} epochs"
        )

        best_acc = -1.0
        for epoch in range(1, cfg.epochs + 1):
            stats = self._train_epoch(epoch, x_train, y_train, params, state, order_rng)
            stats.val_loss, stats.val_acc = self._validate(x_val, y_val)
            record.history.append(stats)

            score = stats.val_acc if stats.val_acc is not None else None
            improved = score is not None and score > best_acc
            if improved or (score is None and epoch == cfg.epochs):
                best_acc = score if score is not None else best_acc
                record.best_epoch = epoch
                record.best_val_acc = score
                self.best = Checkpoint.from_model(self.model, self._checkpoint_metadata(stats))

            if epoch % cfg.log_every == 0 or epoch == cfg.epochs:
                val = f"{stats.val_acc:.4f}" if stats.val_acc is not None else "n/a"
                logger.info(
                    f"epoch {epoch}/{cfg.epochs}: train loss {stats.train_loss:.4f} "
                    f"acc {stats.train_acc:.4f} | val acc {val}"
                )

        record.params_changed = any(
            not np.array_equal(initial[name], t.data) for name, t in params.items()
        )
        if not record.params_changed:
            logger.info("Parameters unchanged by training (flat run)")

        restore(self.model, self.best)
        if dataset.split_mask("test").any():
            record.test_metrics = evaluate(
                self.model, dataset, "test", cfg.test_snr_db, cfg.seed,
                cfg.feature_mode, cfg.calibrated_noise, cfg.eval_batch_size,
            )
            logger.info(f"Test accuracy {record.test_accuracy:.4f} (snr {cfg.test_snr_db} dB)")

        record.wall_clock_s = time.perf_counter() - started
        if self.out_dir is not None:
            self.write(record)
        return record

    def write(self, record: RunRecord) -> None:
        """Checkpoint, run.json, timing.json and history.csv into out_dir."""
        out = self.out_dir
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(out / CHECKPOINT_NAME, self.best.to_bytes())
        record.checkpoint = CHECKPOINT_NAME
        write_json(out / RECORD_NAME, record.to_dict())
        write_json(out / TIMING_NAME, {"run_id": record.run_id, "wall_clock_s": record.wall_clock_s})
        write_csv(out / HISTORY_NAME, record.history_frame())
        logger.info(f"Wrote {CHECKPOINT_NAME}, {RECORD_NAME} and {HISTORY_NAME} to {out}")


def train(
    dataset: LabeledDataset,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    out_dir: Optional[Union[str, Path]] = None,
    run_id: Optional[str] = None,
) -> RunRecord:
    """Functional wrapper around Trainer.run."""
    return Trainer(model_cfg, train_cfg, out_dir, run_id).run(dataset)
