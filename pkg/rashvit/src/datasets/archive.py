"""
Signal Archives

A dataset on disk is a directory of headerless little-endian float32
recordings plus a JSON manifest:

    archive/
      manifest.json
      class_00.f32
      class_01.f32
      ...

Each manifest entry points at a byte range of one file and carries its
label. Loading cuts every range into windows with sliding_window.

Example:
    >>> ds = load_archive("data/cwru/manifest.json")
    >>> ds = split(ds, (0.7, 0.1, 0.2), seed=0)
    >>> save_archive(ds, "data/copy")
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from rashvit import config
from rashvit.src.errors import (
    EmptyInputError,
    LabelGapError,
    MissingFileError,
    ShapeError,
    ShortFileError,
)
from rashvit.src.sigproc.segments import SignalSegment, sliding_window
from rashvit.src.utils.io import atomic_write_bytes, atomic_write_text

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SAMPLE_DTYPE = np.dtype("<f4")

# Split tags; "" marks a segment no split claimed
SPLITS = ("train", "val", "test")
UNASSIGNED = ""


# =============================================================================
# MANIFEST
# =============================================================================

class ManifestEntry(BaseModel):
    """Byte range of one recording file holding a single class."""

    model_config = ConfigDict(extra="forbid")

    path: str = Field(description="File path, relative to the manifest directory")
    offset: int = Field(default=0, ge=0, description="Byte offset of the first sample")
    count: Optional[int] = Field(default=None, ge=1, description="Samples to read (None = rest of file)")
    label: int = Field(ge=0, description="Class index")


class Manifest(BaseModel):
    """Archive description: classes, sampling rate, windowing and entries."""

    model_config = ConfigDict(extra="forbid")

    sample_rate_hz: float = Field(default=config.DEFAULT_SAMPLE_RATE_HZ, gt=0.0)
    classes: List[str] = Field(default_factory=list, description="Label index -> class name")
    window: int = Field(default=config.WINDOW_SIZE, ge=1, description="Segment length in samples")
    stride: int = Field(default=config.WINDOW_SIZE, ge=1, description="Step between segment starts")
    entries: List[ManifestEntry] = Field(default_factory=list)

    @property
    def num_classes(self) -> int:
        labels = [e.label for e in self.entries]
        return max(len(self.classes), max(labels) + 1 if labels else 0)

    def check_labels(self) -> None:
        """Raise LabelGapError unless labels cover every index in [0, K)."""
        present = {e.label for e in self.entries}
        k = self.num_classes
        for label in range(k):
            if label not in present:
                raise LabelGapError(label, k)

    def class_names(self) -> List[str]:
        names = list(self.classes)
        names += [f"class_{i}" for i in range(len(names), self.num_classes)]
        return names

    @classmethod
    def read(cls, path: Union[str, Path]) -> "Manifest":
        path = Path(path)
        if not path.exists():
            raise MissingFileError(f"manifest not found: {path}")
        return cls.model_validate_json(path.read_text(encoding="utf-8"))

    def write(self, path: Union[str, Path]) -> Path:
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
        return atomic_write_text(path, payload)


# =============================================================================
# LABELED DATASET
# =============================================================================

@dataclass
class LabeledDataset:
    """
    Segments with labels and split tags.

    Attributes:
        signals: (n, L) float32 time-domain segments
        labels: (n,) int64 class indices
        splits: (n,) split tags ("train", "val", "test" or "" when unassigned)
        classes: Label index -> class name
        sample_rate_hz: Sampling rate of every segment
        source_ids: Per-segment origin identifiers
        provenance: Source manifest or synth spec, seeds used
    """
    signals: np.ndarray
    labels: np.ndarray
    classes: List[str]
    sample_rate_hz: float = config.DEFAULT_SAMPLE_RATE_HZ
    splits: Optional[np.ndarray] = None
    source_ids: Optional[List[str]] = None
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.signals = np.asarray(self.signals)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n = self.labels.shape[0]
        if self.signals.ndim != 2 or self.signals.shape[0] != n:
            raise ShapeError(
                f"signals must be (n, L) with n = {n} labels, got shape {self.signals.shape}"
            )
        if self.splits is None:
            self.splits = np.full(n, UNASSIGNED, dtype=object)
        else:
            self.splits = np.asarray(self.splits, dtype=object)
        if self.source_ids is None:
            self.source_ids = [f"segment@{i}" for i in range(n)]
        if n and (self.labels.min() < 0 or self.labels.max() >= len(self.classes)):
            raise ShapeError(f"labels must lie in [0, {len(self.classes)})")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def window(self) -> int:
        return int(self.signals.shape[1])

    def segments(self) -> Iterator[Tuple[SignalSegment, int]]:
        for i in range(len(self)):
            yield SignalSegment(self.signals[i], self.sample_rate_hz, self.source_ids[i]), int(self.labels[i])

    def split_mask(self, name: str) -> np.ndarray:
        return self.splits == name

    def subset(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """(signals, labels) of one split, in dataset order."""
        mask = self.split_mask(name)
        return self.signals[mask], self.labels[mask]

    def with_splits(self, splits: np.ndarray, **provenance) -> "LabeledDataset":
        return LabeledDataset(
            signals=self.signals,
            labels=self.labels,
            classes=list(self.classes),
            sample_rate_hz=self.sample_rate_hz,
            splits=splits,
            source_ids=list(self.source_ids),
            provenance={**self.provenance, **provenance},
        )

    def class_counts(self, name: Optional[str] = None) -> np.ndarray:
        labels = self.labels if name is None else self.labels[self.split_mask(name)]
        return np.bincount(labels, minlength=self.num_classes).astype(np.int64)


# =============================================================================
# LOAD / SAVE
# =============================================================================

def _read_entry(root: Path, entry: ManifestEntry) -> np.ndarray:
    path = root / entry.path
    if not path.exists():
        raise MissingFileError(f"archive file not found: {path}")
    size = path.stat().st_size
    available = (size - entry.offset) // SAMPLE_DTYPE.itemsize if size > entry.offset else 0
    count = available if entry.count is None else entry.count
    if count > available or count == 0:
        raise ShortFileError(
            f"{path}: entry wants {count} samples at byte {entry.offset}, "
            f"file holds {available}"
        )
    return np.fromfile(path, dtype=SAMPLE_DTYPE, count=count, offset=entry.offset)


def load_archive(
    manifest_path: Union[str, Path],
    window: Optional[int] = None,
    stride: Optional[int] = None,
) -> LabeledDataset:
    """
    Load an archive described by a manifest.

    Args:
        manifest_path: Path to manifest.json (or to the archive directory)
        window: Override of the manifest window
        stride: Override of the manifest stride

    Raises:
        MissingFileError: Manifest or a referenced file does not exist
        ShortFileError: A file holds fewer samples than its entry (or one window)
        LabelGapError: Labels do not cover [0, K)
    """
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    manifest = Manifest.read(manifest_path)
    manifest.check_labels()
    window = window or manifest.window
    stride = stride or manifest.stride
    root = manifest_path.parent

    rows: List[np.ndarray] = []
    labels: List[int] = []
    source_ids: List[str] = []
    for entry in manifest.entries:
        samples = _read_entry(root, entry)
        try:
            segments = sliding_window(
                samples, window, stride, manifest.sample_rate_hz,
                f"{entry.path}+{entry.offset}",
            )
        except EmptyInputError:
            raise ShortFileError(
                f"{root / entry.path}: {samples.shape[0]} samples is shorter than window {window}"
            )
        rows.extend(s.samples for s in segments)
        labels.extend([entry.label] * len(segments))
        source_ids.extend(s.source_id for s in segments)

    signals = np.stack(rows) if rows else np.zeros((0, window), dtype=SAMPLE_DTYPE)
    logger.info(
        f"Loaded {len(labels)} segments ({manifest.num_classes} classes) from {manifest_path}"
    )
    return LabeledDataset(
        signals=signals,
        labels=np.asarray(labels, dtype=np.int64),
        classes=manifest.class_names(),
        sample_rate_hz=manifest.sample_rate_hz,
        source_ids=source_ids,
        provenance={"manifest": str(manifest_path), "window": window, "stride": stride},
    )


def save_archive(dataset: LabeledDataset, out_dir: Union[str, Path]) -> Path:
    """
    Write a dataset as one .f32 file per class plus a manifest.

    Every segment becomes its own entry with window == stride == L, so
    load_archive returns the segments bit-exactly in class order.

    Returns:
        Path of the written manifest
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    window = dataset.window
    entries: List[ManifestEntry] = []

    for label in range(dataset.num_classes):
        name = f"class_{label:02d}.f32"
        block = np.ascontiguousarray(dataset.signals[dataset.labels == label], dtype=SAMPLE_DTYPE)
        atomic_write_bytes(out_dir / name, block.tobytes())
        stride_bytes = window * SAMPLE_DTYPE.itemsize
        entries.extend(
            ManifestEntry(path=name, offset=i * stride_bytes, count=window, label=label)
            for i in range(block.shape[0])
        )

    manifest = Manifest(
        sample_rate_hz=dataset.sample_rate_hz,
        classes=list(dataset.classes),
        window=window,
        stride=window,
        entries=entries,
    )
    path = manifest.write(out_dir / MANIFEST_NAME)
    logger.info(f"Wrote archive with {len(dataset)} segments to {out_dir}")
    return path


def build_manifest(
    files: Sequence[Tuple[Union[str, Path], int]],
    out_path: Union[str, Path],
    classes: Optional[Sequence[str]] = None,
    sample_rate_hz: float = config.DEFAULT_SAMPLE_RATE_HZ,
    window: int = config.WINDOW_SIZE,
    stride: int = config.WINDOW_SIZE,
) -> Manifest:
    """
    Describe existing raw .f32 recordings with a manifest.

    Args:
        files: (path, label) pairs; one recording per pair, read whole
        out_path: Where manifest.json is written; file paths are stored
            relative to its directory when possible

    Raises:
        MissingFileError: A listed file does not exist
        LabelGapError: Labels do not cover [0, K)
    """
    out_path = Path(out_path)
    root = out_path.parent.resolve()
    entries = []
    for path, label in files:
        path = Path(path)
        if not path.exists():
            raise MissingFileError(f"recording not found: {path}")
        resolved = path.resolve()
        try:
            rel = resolved.relative_to(root).as_posix()
        except ValueError:
            rel = str(resolved)
        entries.append(ManifestEntry(path=rel, label=int(label)))

    manifest = Manifest(
        sample_rate_hz=sample_rate_hz,
        classes=list(classes or []),
        window=window,
        stride=stride,
        entries=entries,
    )
    manifest.check_labels()
    manifest.write(out_path)
    logger.info(f"Wrote manifest with {len(entries)} entries to {out_path}")
    return manifest
