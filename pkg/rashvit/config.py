"""
RA-SHViT Configuration Module

Centralized configuration for the bearing fault-diagnosis toolkit.
Paths, logging, parallelism and the numeric defaults of the experimental
protocol are managed here.

Environment Variables:
    RA_SHVIT_THREADS: Max parallel sweep/ablation cells (optional, default 1)
    RA_SHVIT_LOG_LEVEL: Logging level (optional, default INFO)
    RA_SHVIT_DATA_DIR: Where archives are written/read (optional)
    RA_SHVIT_RUNS_DIR: Where run artifacts are written (optional)
"""

import os
import warnings
from pathlib import Path

# ==============================================================================
# PATH CONFIGURATION
# ==============================================================================

# Project root (parent of rashvit/)
PROJECT_ROOT = Path(__file__).parent.parent.resolve()

# Package root
PACKAGE_ROOT = Path(__file__).parent.resolve()

# Shipped run configs and synth specs
CONFIGS_DIR = PACKAGE_ROOT / "configs"

# Data and run artifact directories
DATA_DIR = Path(os.environ.get("RA_SHVIT_DATA_DIR", str(PROJECT_ROOT / "data")))
RUNS_DIR = Path(os.environ.get("RA_SHVIT_RUNS_DIR", str(PROJECT_ROOT / "runs")))

# ==============================================================================
# DATABASE CONFIGURATION
# ==============================================================================

# DuckDB results store (sweep cells, ablation cells, run summaries)
DB_PATH = RUNS_DIR / "results.duckdb"

# ==============================================================================
# LOGGING CONFIGURATION
# ==============================================================================

# Log level: DEBUG, INFO, WARNING, ERROR, CRITICAL
LOG_LEVEL = os.environ.get("RA_SHVIT_LOG_LEVEL", "INFO").upper()

# Log format
LOG_FORMAT = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"

# ==============================================================================
# PERFORMANCE TUNING
# ==============================================================================


def _read_threads() -> int:
    raw = os.environ.get("RA_SHVIT_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value < 1:
        warnings.warn(
            f"RA_SHVIT_THREADS={raw!r} is not a positive integer; "
            "running sweep cells sequentially.",
            UserWarning
        )
        return 1
    return value


# Number of worker threads for independent sweep/ablation cells
NUM_WORKERS = _read_threads()

# ==============================================================================
# SIGNAL / FEATURE DEFAULTS
# ==============================================================================

# Samples per segment; the full two-sided FFT of one window fills 2 x 64 x 32
WINDOW_SIZE = 2048
IMAGE_HEIGHT = 64
IMAGE_WIDTH = 32

# CWRU drive-end sampling rate (Hz)
DEFAULT_SAMPLE_RATE_HZ = 12_000.0

# ==============================================================================
# TRAINING DEFAULTS
# ==============================================================================

LEARNING_RATE = 1e-3
BATCH_SIZE = 16
DESK_EPOCHS = 300
FULL_EPOCHS = 750
SPLIT_RATIOS = (0.7, 0.1, 0.2)

# SNR grids (dB) for the two benchmark datasets
CWRU_SNR_GRID = tuple(range(-10, 11, 2))
PU_SNR_GRID = tuple(range(-4, 5, 2))

# Published reference figures for the full model (informational only)
REFERENCE_PARAMS_M = 19.46
REFERENCE_MFLOPS = 6.01
