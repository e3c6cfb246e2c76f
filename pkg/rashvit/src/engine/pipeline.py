"""
Signal-to-Image Pipeline

    segments -> z-score -> (noise at the requested SNR) -> FFT / raw packing -> images

Noise seeds are derived per segment from one stream seed, so the same
(signals, snr, seed) always yields the same images no matter how the
batch is later cut.
"""

import math
from typing import List

import numpy as np

from rashvit.src.sigproc.noise import inject_noise_batch
from rashvit.src.sigproc.segments import zscore
from rashvit.src.sigproc.spectral import IMAGE_SHAPE, featurize_batch

# Independent seed streams of a run
STREAM_TRAIN = 1
STREAM_VAL = 2
STREAM_TEST = 3
STREAM_DROPOUT = 4


def derive_seed(base_seed: int, *keys: int) -> int:
    """SeedSequence([base_seed, *keys]) -> one 32-bit seed."""
    return int(np.random.SeedSequence([int(base_seed), *[int(k) for k in keys]]).generate_state(1)[0])


def segment_seeds(seed: int, count: int) -> np.ndarray:
    """`count` 64-bit noise seeds, one per segment."""
    return np.random.SeedSequence(int(seed)).generate_state(count, dtype=np.uint64)


def make_batches(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """Cut an index permutation into mini-batches; a trailing singleton joins the previous batch."""
    batches = [order[i:i + batch_size] for i in range(0, order.shape[0], batch_size)]
    if len(batches) > 1 and batches[-1].shape[0] == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def prepare_images(
    signals: np.ndarray,
    snr_db: float = math.inf,
    seed: int = 0,
    mode: str = "fft",
    calibrated: bool = True,
    dtype=np.float32,
) -> np.ndarray:
    """
    Turn (n, 2048) raw segments into (n, 2, 64, 32) model inputs.

    Args:
        signals: Raw time-domain segments
        snr_db: Target SNR; +inf skips injection entirely
        seed: Stream seed; segment i uses segment_seeds(seed, n)[i]
        mode: "fft" or "raw"
    """
    data = np.asarray(signals)
    if data.shape[0] == 0:
        return np.zeros((0, *IMAGE_SHAPE), dtype=dtype)
    normalized = zscore(data)
    noisy = inject_noise_batch(normalized, snr_db, segment_seeds(seed, data.shape[0]), calibrated)
    return featurize_batch(noisy, mode).astype(dtype)
