"""
Spectral Featurization

Radix-2 FFT and the spectral-image layout consumed by the network.

Layout:
    A 2048-point window is transformed with the full two-sided FFT. The real
    part, reshaped row-major to 64 x 32, is channel 0; the imaginary part is
    channel 1. The image is therefore (2, 64, 32).

The raw-input ablation keeps the same (2, 64, 32) interface: the time-domain
window goes into channel 0 and channel 1 is zeros.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from rashvit import config
from rashvit.src.errors import ShapeError, UnsupportedLengthError
from rashvit.src.sigproc.segments import SignalSegment

IMAGE_SHAPE = (2, config.IMAGE_HEIGHT, config.IMAGE_WIDTH)

FEATURE_MODES = ("fft", "raw")


@lru_cache(maxsize=32)
def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    rev.setflags(write=False)
    return rev


@lru_cache(maxsize=32)
def _twiddles(size: int) -> np.ndarray:
    half = size // 2
    table = np.exp(-2j * np.pi * np.arange(half) / size)
    table.setflags(write=False)
    return table


def fft(x: np.ndarray) -> np.ndarray:
    """
    Unnormalized forward DFT along the last axis, X[k] = sum_t x[t] e^{-2 pi i k t / N}.

    Iterative decimation-in-time radix-2; leading axes are transformed in
    parallel.

    Raises:
        UnsupportedLengthError: If N is not a power of two >= 2
    """
    data = np.asarray(x)
    n = data.shape[-1]
    if n < 2 or n & (n - 1):
        raise UnsupportedLengthError(f"FFT length must be a power of two >= 2, got {n}")

    lead = data.shape[:-1]
    out = data.astype(np.complex128)[..., _bit_reverse_indices(n)]

    size = 2
    while size <= n:
        half = size // 2
        blocks = out.reshape(*lead, n // size, size)
        even = blocks[..., :half]
        odd = blocks[..., half:] * _twiddles(size)
        out = np.concatenate((even + odd, even - odd), axis=-1).reshape(*lead, n)
        size *= 2
    return out


def naive_dft(x: np.ndarray) -> np.ndarray:
    """O(N^2) DFT oracle for testing fft()."""
    data = np.asarray(x, dtype=np.complex128)
    n = data.shape[-1]
    k = np.arange(n)
    # Reduce k*t mod N in integers before scaling, keeps the phase exact
    phase = np.outer(k, k) % n
    matrix = np.exp(-2j * np.pi * phase / n)
    return data @ matrix.T


@dataclass(frozen=True)
class SpectralImage:
    """
    Model input unit: (2, 64, 32) real tensor.

    Attributes:
        data: channel 0 = Re(FFT), channel 1 = Im(FFT), each row-major 64x32
        label: Optional class index
    """
    data: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        if self.data.shape != IMAGE_SHAPE:
            raise ShapeError(f"spectral image must be {IMAGE_SHAPE}, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("spectral image contains NaN/Inf")


def _check_window(length: int) -> None:
    expected = IMAGE_SHAPE[1] * IMAGE_SHAPE[2]
    if length != expected:
        raise ShapeError(f"featurize needs {expected}-sample segments, got {length}")


def spectral_planes(signals: np.ndarray) -> np.ndarray:
    """(n, 2048) signals -> (n, 2, 64, 32) FFT real/imag planes."""
    data = np.asarray(signals, dtype=np.float64)
    _check_window(data.shape[-1])
    spectrum = fft(data)
    planes = np.stack((spectrum.real, spectrum.imag), axis=-2)
    return planes.reshape(*data.shape[:-1], *IMAGE_SHAPE)


def raw_planes(signals: np.ndarray) -> np.ndarray:
    """(n, 2048) signals -> (n, 2, 64, 32) with the time series in channel 0."""
    data = np.asarray(signals, dtype=np.float64)
    _check_window(data.shape[-1])
    out = np.zeros((*data.shape[:-1], *IMAGE_SHAPE))
    out[..., 0, :, :] = data.reshape(*data.shape[:-1], *IMAGE_SHAPE[1:])
    return out


def featurize(segment: SignalSegment, label: Optional[int] = None) -> SpectralImage:
    """
    Turn a 2048-point segment into its (2, 64, 32) spectral image.

    Parseval holds: sum x^2 = (1/2048) * sum(ch0^2 + ch1^2).

    Raises:
        ShapeError: If the segment is not 2048 samples long
    """
    return SpectralImage(spectral_planes(segment.samples), label)


def raw_image(segment: SignalSegment, label: Optional[int] = None) -> SpectralImage:
    """Time-domain packing used by the FFT-vs-raw ablation."""
    return SpectralImage(raw_planes(segment.samples), label)


def featurize_batch(signals: np.ndarray, mode: str = "fft") -> np.ndarray:
    """Featurize a (n, 2048) block in either 'fft' or 'raw' mode."""
    if mode == "fft":
        return spectral_planes(signals)
    if mode == "raw":
        return raw_planes(signals)
    raise ValueError(f"unknown feature mode {mode!r} (expected one of {FEATURE_MODES})")
