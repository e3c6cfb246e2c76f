"""
Signal Processing Package

Time-domain segmentation, z-scoring, SNR-calibrated noise and FFT
featurization into (2, 64, 32) spectral images.
"""

from rashvit.src.sigproc.segments import SignalSegment, sliding_window, normalize, zscore
from rashvit.src.sigproc.noise import NoiseSpec, inject_noise, measure_snr, CLEAN_SNR
from rashvit.src.sigproc.spectral import SpectralImage, fft, naive_dft, featurize, raw_image

__all__ = [
    "SignalSegment",
    "sliding_window",
    "normalize",
    "zscore",
    "NoiseSpec",
    "inject_noise",
    "measure_snr",
    "CLEAN_SNR",
    "SpectralImage",
    "fft",
    "naive_dft",
    "featurize",
    "raw_image",
]
