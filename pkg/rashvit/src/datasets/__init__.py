"""
Datasets Package

Manifest archives of raw float32 recordings, stratified splits, the
synthetic bearing-signal generator and benchmark label presets.
"""

from rashvit.src.datasets.archive import (
    LabeledDataset,
    Manifest,
    ManifestEntry,
    build_manifest,
    load_archive,
    save_archive,
)
from rashvit.src.datasets.splits import class_histogram, split, split_counts
from rashvit.src.datasets.synth import SynthSpec, synth_generate
from rashvit.src.datasets.presets import CWRU, PU6, PU14, get_preset

__all__ = [
    "LabeledDataset",
    "Manifest",
    "ManifestEntry",
    "build_manifest",
    "load_archive",
    "save_archive",
    "class_histogram",
    "split",
    "split_counts",
    "SynthSpec",
    "synth_generate",
    "CWRU",
    "PU6",
    "PU14",
    "get_preset",
]
