"""
Calibrated Gaussian Noise

Adds white Gaussian noise at a requested signal-to-noise ratio:

    SNR_dB = 10 * log10(P_signal / P_noise)
    P_noise = P_signal / 10 ** (SNR_dB / 10)

Noise is drawn from a seeded PCG64 generator (standard normal, ziggurat
method). In calibrated mode (default) the drawn vector is rescaled so its
empirical power equals P_noise exactly; measured SNR then matches the
request to floating-point precision instead of to within sampling error.

A +inf SNR is the "clean" sentinel used by the harness: no noise is added.
"""

import math
from dataclasses import dataclass

import numpy as np

from rashvit.src.errors import DegenerateSignalError, ShapeError
from rashvit.src.sigproc.segments import SignalSegment

# Recorded in run metadata so runs can be reproduced with the same sampler
GENERATOR_NAME = "numpy.PCG64/standard_normal(ziggurat)"

# Sentinel meaning "no noise injection"
CLEAN_SNR = math.inf

_MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class NoiseSpec:
    """
    Noise request for one segment.

    Attributes:
        snr_db: Target signal-to-noise ratio in decibels (finite)
        seed: 64-bit unsigned seed; fully determines the noise sequence
        calibrated: Rescale noise to hit the target power exactly. The
            default rescaled draw is Gaussian up to one shared scale factor,
            not strictly i.i.d.; pass False for plain i.i.d. N(0, P_noise).
    """
    snr_db: float
    seed: int = 0
    calibrated: bool = True

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite, got {self.snr_db}")
        if not 0 <= int(self.seed) <= _MAX_SEED:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")


def noise_power_for(signal_power: float, snr_db: float) -> float:
    """Noise power that yields `snr_db` against a signal of `signal_power`."""
    return signal_power / (10.0 ** (snr_db / 10.0))


def _signal_power(samples: np.ndarray) -> float:
    return float(np.mean(np.square(samples, dtype=np.float64)))


def gaussian_noise(
    length: int,
    noise_power: float,
    seed: int,
    calibrated: bool = True,
) -> np.ndarray:
    """Draw a length-n noise vector with the given power."""
    rng = np.random.Generator(np.random.PCG64(seed))
    draw = rng.standard_normal(length)
    if calibrated:
        drawn_power = float(np.mean(np.square(draw)))
        return draw * math.sqrt(noise_power / drawn_power)
    return draw * math.sqrt(noise_power)


def inject_noise(segment: SignalSegment, spec: NoiseSpec) -> SignalSegment:
    """
    Add Gaussian white noise at spec.snr_db to a segment.

    Args:
        segment: Clean segment (power must be > 0)
        spec: Target SNR and seed

    Returns:
        New segment = segment + noise

    Raises:
        DegenerateSignalError: If the segment has zero power
    """
    samples = np.asarray(segment.samples, dtype=np.float64)
    p_signal = _signal_power(samples)
    if p_signal <= 0.0:
        raise DegenerateSignalError(
            f"segment {segment.source_id!r} has zero power; SNR is undefined"
        )
    noise = gaussian_noise(
        samples.shape[0],
        noise_power_for(p_signal, spec.snr_db),
        spec.seed,
        spec.calibrated,
    )
    return segment.with_samples(samples + noise)


def measure_snr(clean: SignalSegment, noisy: SignalSegment) -> float:
    """
    Empirical SNR in dB: 10*log10(P_clean / P_residual), residual = noisy - clean.

    Returns +inf when the residual is exactly zero.
    """
    a = np.asarray(clean.samples, dtype=np.float64)
    b = np.asarray(noisy.samples, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"length mismatch: clean {a.shape} vs noisy {b.shape}")
    p_clean = _signal_power(a)
    if p_clean <= 0.0:
        raise DegenerateSignalError("clean segment has zero power")
    p_residual = _signal_power(b - a)
    if p_residual == 0.0:
        return math.inf
    return 10.0 * math.log10(p_clean / p_residual)


def inject_noise_batch(
    signals: np.ndarray,
    snr_db: float,
    seeds: np.ndarray,
    calibrated: bool = True,
) -> np.ndarray:
    """
    Row-wise inject_noise over a (n, L) block.

    Row i uses seeds[i]; a +inf snr_db returns an unchanged copy.
    Zero-power rows are left untouched (there is no power to scale against).
    """
    data = np.asarray(signals, dtype=np.float64)
    if math.isinf(snr_db) and snr_db > 0:
        return data.copy()
    if data.ndim != 2 or len(seeds) != data.shape[0]:
        raise ShapeError(
            f"expected (n, L) signals with n seeds, got {data.shape} and {len(seeds)} seeds"
        )
    out = data.copy()
    powers = np.mean(np.square(data), axis=1)
    for i in range(data.shape[0]):
        if powers[i] <= 0.0:
            continue
        out[i] += gaussian_noise(
            data.shape[1],
            noise_power_for(float(powers[i]), snr_db),
            int(seeds[i]),
            calibrated,
        )
    return out
