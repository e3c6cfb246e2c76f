"""
Deterministic Stratified Splits

Every class is permuted with a seeded generator and cut into parts whose
sizes follow the requested ratios. Part sizes use largest-remainder
rounding, so per-class proportions are exact to within one segment and
the parts always partition the class.

Example:
    >>> ds = split(ds, (0.7, 0.1, 0.2), seed=0)      # CWRU protocol
    >>> ds = split_counts(ds, {"train": 250, "test": 250}, seed=0)   # PU 1:1
    >>> class_histogram(ds)
"""

import logging
import math
from typing import Dict, List, Mapping, Sequence

import numpy as np
import polars as pl

from rashvit.src.datasets.archive import SPLITS, UNASSIGNED, LabeledDataset
from rashvit.src.db.models import HISTOGRAM_SCHEMA
from rashvit.src.errors import ConfigError, InsufficientClassError

logger = logging.getLogger(__name__)


def largest_remainder(total: int, ratios: Sequence[float]) -> List[int]:
    """
    Integer part sizes summing to `total`, proportional to `ratios`.

    Floors first, then hands the leftover units to the largest fractional
    parts (earlier parts win ties).
    """
    quotas = [r * total for r in ratios]
    sizes = [int(math.floor(q + 1e-9)) for q in quotas]
    leftover = total - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:leftover]:
        sizes[i] += 1
    return sizes


def _class_permutation(rng: np.random.Generator, dataset: LabeledDataset, label: int) -> np.ndarray:
    idx = np.flatnonzero(dataset.labels == label)
    return idx[rng.permutation(idx.shape[0])]


def split(
    dataset: LabeledDataset,
    ratios: Sequence[float] = (0.7, 0.1, 0.2),
    seed: int = 0,
) -> LabeledDataset:
    """
    Tag every segment train / val / test, stratified per class.

    Args:
        dataset: Dataset to tag (existing tags are replaced)
        ratios: (train, val, test) fractions, summing to 1
        seed: Permutation seed

    Raises:
        ConfigError: Ratios malformed or not summing to 1 within 1e-9
        InsufficientClassError: A class has fewer segments than non-empty parts
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != len(SPLITS) or any(r < 0 for r in ratios):
        raise ConfigError(f"ratios must be three non-negative fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got {sum(ratios)!r}")

    parts = sum(1 for r in ratios if r > 0)
    rng = np.random.Generator(np.random.PCG64(seed))
    tags = np.full(len(dataset), UNASSIGNED, dtype=object)

    for label in range(dataset.num_classes):
        perm = _class_permutation(rng, dataset, label)
        if perm.shape[0] < parts:
            raise InsufficientClassError(
                f"class {label} ({dataset.classes[label]}) has {perm.shape[0]} segments, "
                f"fewer than the {parts} split parts"
            )
        start = 0
        for name, size in zip(SPLITS, largest_remainder(perm.shape[0], ratios)):
            tags[perm[start:start + size]] = name
            start += size

    logger.debug(f"Split {len(dataset)} segments with ratios {ratios}, seed {seed}")
    return dataset.with_splits(tags, split={"ratios": list(ratios), "seed": seed})


def split_counts(
    dataset: LabeledDataset,
    counts: Mapping[str, int],
    seed: int = 0,
) -> LabeledDataset:
    """
    Tag a fixed number of segments per class and split.

    Segments beyond the requested counts stay unassigned.

    Raises:
        ConfigError: Unknown split name or negative count
        InsufficientClassError: A class holds fewer segments than requested
    """
    unknown = set(counts) - set(SPLITS)
    if unknown:
        raise ConfigError(f"unknown split name(s) {sorted(unknown)} (expected {SPLITS})")
    if any(int(v) < 0 for v in counts.values()):
        raise ConfigError(f"split counts must be non-negative, got {dict(counts)}")

    needed = sum(int(v) for v in counts.values())
    rng = np.random.Generator(np.random.PCG64(seed))
    tags = np.full(len(dataset), UNASSIGNED, dtype=object)

    for label in range(dataset.num_classes):
        perm = _class_permutation(rng, dataset, label)
        if perm.shape[0] < needed:
            raise InsufficientClassError(
                f"class {label} ({dataset.classes[label]}) has {perm.shape[0]} segments, "
                f"{needed} requested"
            )
        start = 0
        for name in SPLITS:
            size = int(counts.get(name, 0))
            tags[perm[start:start + size]] = name
            start += size

    return dataset.with_splits(tags, split={"counts": {k: int(v) for k, v in counts.items()}, "seed": seed})


def class_histogram(dataset: LabeledDataset) -> pl.DataFrame:
    """Per-class, per-split segment counts (HISTOGRAM_SCHEMA)."""
    columns: Dict[str, np.ndarray] = {
        name: dataset.class_counts(name) for name in (*SPLITS, UNASSIGNED)
    }
    return pl.DataFrame(
        {
            "label": list(range(dataset.num_classes)),
            "class_name": list(dataset.classes),
            "train": columns["train"].tolist(),
            "val": columns["val"].tolist(),
            "test": columns["test"].tolist(),
            "unassigned": columns[UNASSIGNED].tolist(),
            "total": dataset.class_counts().tolist(),
        },
        schema=HISTOGRAM_SCHEMA,
    )
