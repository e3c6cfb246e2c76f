"""
Signal Segmentation

Cuts raw vibration recordings into fixed-length windows and z-scores them.

Sliding-window sampling with overlap is how the training sets are expanded:
a window of 2048 points slides along the recording by `stride` points, so
a stride smaller than the window yields overlapping segments.

Example:
    >>> segments = sliding_window(recording, window=2048, stride=1024)
    >>> clean = [normalize(s) for s in segments]
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from rashvit.src.errors import EmptyInputError, ShapeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SignalSegment:
    """
    One window of a time-domain vibration signal.

    Attributes:
        samples: 1-D real array (dimensionless acceleration units)
        sample_rate_hz: Sampling rate of the recording
        source_id: Opaque identifier of the recording / window origin
    """
    samples: np.ndarray
    sample_rate_hz: float = 12_000.0
    source_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1:
            raise ShapeError(f"segment samples must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError(f"segment {self.source_id!r} contains NaN/Inf samples")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def power(self) -> float:
        """Mean power of the segment (mean of squared samples)."""
        return float(np.mean(np.square(self.samples, dtype=np.float64)))

    def with_samples(self, samples: np.ndarray) -> "SignalSegment":
        """Copy of this segment carrying new samples."""
        return SignalSegment(samples, self.sample_rate_hz, self.source_id)


def window_count(length: int, window: int, stride: int) -> int:
    """Number of windows sliding_window produces: floor((len - window)/stride) + 1."""
    if length < window:
        return 0
    return (length - window) // stride + 1


def sliding_window(
    signal: Union[Sequence[float], np.ndarray],
    window: int,
    stride: int,
    sample_rate_hz: float = 12_000.0,
    source_id: str = "signal",
) -> List[SignalSegment]:
    """
    Cut a recording into (possibly overlapping) fixed-length segments.

    Segment i covers samples [i*stride, i*stride + window).

    Args:
        signal: 1-D recording
        window: Segment length in samples
        stride: Step between segment starts
        sample_rate_hz: Sampling rate attached to each segment
        source_id: Prefix for segment ids ("<source_id>@<start>")

    Returns:
        List of SignalSegment, floor((len - window)/stride) + 1 long

    Raises:
        EmptyInputError: If the signal is shorter than one window
    """
    data = np.asarray(signal)
    if data.ndim != 1:
        raise ShapeError(f"signal must be 1-D, got shape {data.shape}")
    if window < 1 or stride < 1:
        raise ValueError(f"window and stride must be >= 1 (got {window}, {stride})")
    if data.shape[0] < window:
        raise EmptyInputError(
            f"signal of length {data.shape[0]} is shorter than window {window}"
        )

    count = window_count(data.shape[0], window, stride)
    return [
        SignalSegment(
            data[i * stride: i * stride + window].copy(),
            sample_rate_hz,
            f"{source_id}@{i * stride}",
        )
        for i in range(count)
    ]


def zscore(samples: np.ndarray) -> np.ndarray:
    """
    Z-score along the last axis (population standard deviation).

    Rows whose spread is negligible relative to their level map to zeros.
    """
    data = np.asarray(samples, dtype=np.float64)
    mean = data.mean(axis=-1, keepdims=True)
    centered = data - mean
    std = np.sqrt(np.mean(np.square(centered), axis=-1, keepdims=True))
    scale = np.maximum(1.0, np.abs(mean))
    flat = std <= 1e-12 * scale
    out = np.where(flat, 0.0, centered / np.where(flat, 1.0, std))
    if np.any(flat):
        logger.warning(f"{int(np.sum(flat))} constant segment(s) normalized to zeros")
    return out


def normalize(segment: SignalSegment) -> SignalSegment:
    """
    Z-score a segment: mean 0, standard deviation 1.

    Constant segments map to all zeros.

    Example:
        >>> normalize(SignalSegment(np.array([1.0, 1.0, 1.0, 1.0]))).samples
        array([0., 0., 0., 0.])
    """
    return segment.with_samples(zscore(segment.samples))
