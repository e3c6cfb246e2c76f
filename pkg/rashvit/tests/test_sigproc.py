#!/usr/bin/env python3
"""
Test: Signal Processing

Tests segmentation, z-scoring, calibrated noise injection and the FFT
featurizer:
- sliding_window counts and offsets
- zscore fixed points and constant segments
- noise power / measured SNR
- radix-2 FFT against the naive DFT, and its linearity
- measured SNR over 100 seeds per grid point
- spectral image layout and Parseval

Usage:
    python rashvit/tests/test_sigproc.py
"""

import math
import sys
from pathlib import Path

PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

import numpy as np
import pytest

from rashvit.src.errors import (
    DegenerateSignalError,
    EmptyInputError,
    ShapeError,
    UnsupportedLengthError,
)
from rashvit.src.sigproc import (
    NoiseSpec,
    SignalSegment,
    featurize,
    fft,
    inject_noise,
    measure_snr,
    naive_dft,
    normalize,
    raw_image,
    sliding_window,
    zscore,
)
from rashvit.src.sigproc.noise import inject_noise_batch
from rashvit.src.sigproc.spectral import IMAGE_SHAPE, featurize_batch
from rashvit.tests.harness import banner, run_suite


def _unit_power(n: int = 2048, seed: int = 7) -> SignalSegment:
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal(n)
    return SignalSegment(x / math.sqrt(np.mean(x * x)))


def test_sliding_window():
    """Window counts and start offsets."""
    banner("TEST 1: Sliding Window")

    segs = sliding_window(np.arange(4096.0), window=2048, stride=2048)
    assert len(segs) == 2, f"Expected 2 segments, got {len(segs)}"
    assert segs[1].samples[0] == 2048.0

    one = sliding_window(np.arange(2048.0), window=2048, stride=17)
    assert len(one) == 1 and np.array_equal(one[0].samples, np.arange(2048.0))

    three = sliding_window(np.arange(5000.0), window=2048, stride=1024)
    starts = [int(s.samples[0]) for s in three]
    assert starts == [0, 1024, 2048], f"Unexpected starts {starts}"
    assert three[2].source_id == "signal@2048"
    print(f"  ✓ 4096/2048 -> 2, 2048/any -> 1, 5000/1024 -> starts {starts}")

    rng = np.random.Generator(np.random.PCG64(5))
    cases = 0
    for window in (1, 2, 7, 64, 2048):
        for stride in (1, 3, 64, 1000, 4096):
            for extra in (0, 1, stride - 1, stride, 5 * stride + 2):
                length = window + int(extra)
                signal = rng.standard_normal(length)
                segs = sliding_window(signal, window=window, stride=stride)
                expected = (length - window) // stride + 1
                assert len(segs) == expected, f"len {length} window {window} stride {stride}: {len(segs)} != {expected}"
                last = (expected - 1) * stride
                assert np.array_equal(segs[-1].samples, signal[last:last + window])
                cases += 1
    print(f"  ✓ closed-form count and last offset hold on {cases} (len, window, stride) cases")

    with pytest.raises(EmptyInputError):
        sliding_window(np.zeros(100), window=2048, stride=2048)
    print("  ✓ short signal raises EmptyInputError")


def test_zscore():
    """Moments after normalization and the constant-segment case."""
    banner("TEST 2: Z-Score")

    flat = normalize(SignalSegment(np.array([1.0, 1.0, 1.0, 1.0])))
    assert np.array_equal(flat.samples, np.zeros(4)), "constant segment should map to zeros"

    alt = np.tile([-1.0, 1.0], 8)
    assert np.max(np.abs(zscore(alt) - alt)) < 1e-12, "[-1, 1] pattern is a fixed point"

    out = zscore(np.array([0.0, 2.0, 4.0, 6.0]))
    assert abs(out.mean()) < 1e-12 and abs(out.std() - 1.0) < 1e-12
    print("  ✓ constant -> zeros, [-1,1] fixed, [0,2,4,6] -> mean 0 sd 1")

    rows = zscore(np.vstack([np.arange(8.0), np.full(8, 3.0)]))
    assert np.array_equal(rows[1], np.zeros(8)) and abs(rows[0].std() - 1.0) < 1e-12
    print("  ✓ batched rows normalized independently")


def test_noise_power():
    """Calibrated noise hits the requested power exactly."""
    banner("TEST 3: Noise Injection")

    clean = _unit_power()
    for snr, expected in ((0.0, 1.0), (10.0, 0.1)):
        noisy = inject_noise(clean, NoiseSpec(snr, seed=3))
        residual = noisy.samples - clean.samples
        power = float(np.mean(residual ** 2))
        assert abs(power - expected) < 1e-12, f"snr {snr}: noise power {power}"
        print(f"  ✓ snr {snr:>4} dB -> noise power {power:.6f}")

    again = inject_noise(clean, NoiseSpec(10.0, seed=3))
    assert np.array_equal(again.samples, inject_noise(clean, NoiseSpec(10.0, seed=3)).samples)
    other = inject_noise(clean, NoiseSpec(10.0, seed=4))
    assert not np.array_equal(again.samples, other.samples)
    print("  ✓ same seed -> identical noise, different seed -> different noise")

    with pytest.raises(DegenerateSignalError):
        inject_noise(SignalSegment(np.zeros(64)), NoiseSpec(0.0))
    with pytest.raises(ValueError):
        NoiseSpec(math.inf)
    print("  ✓ zero-power segment and infinite NoiseSpec rejected")


def test_measure_snr():
    """Empirical SNR on known residuals and the uncalibrated round trip."""
    banner("TEST 4: Measured SNR")

    clean = _unit_power()
    doubled = clean.with_samples(clean.samples * 2.0)
    assert abs(measure_snr(clean, doubled)) < 1e-12, "equal powers -> 0 dB"
    assert measure_snr(clean, clean) == math.inf

    noise = _unit_power(seed=11).samples * math.sqrt(0.1)
    ten = measure_snr(clean, clean.with_samples(clean.samples + noise))
    assert abs(ten - 10.0) < 1e-9, f"expected 10 dB, got {ten}"

    measured = float(np.mean([
        measure_snr(clean, inject_noise(clean, NoiseSpec(4.0, seed=s, calibrated=False)))
        for s in range(20)
    ]))
    assert abs(measured - 4.0) < 0.2, f"uncalibrated round trip {measured:.3f} dB"
    calibrated = measure_snr(clean, inject_noise(clean, NoiseSpec(4.0, seed=5)))
    assert abs(calibrated - 4.0) < 1e-9
    print(f"  ✓ 0 dB, 10 dB, uncalibrated 4 dB -> {measured:.3f}, calibrated {calibrated:.9f}")

    with pytest.raises(ShapeError):
        measure_snr(clean, SignalSegment(np.ones(10)))


def test_noise_batch():
    """Row-wise batch injection and the clean sentinel."""
    banner("TEST 5: Batch Noise")

    block = np.vstack([_unit_power(seed=s).samples for s in range(3)] + [np.zeros(2048)])
    seeds = np.array([1, 2, 3, 4], dtype=np.uint64)
    noisy = inject_noise_batch(block, -6.0, seeds)
    assert np.array_equal(noisy[3], np.zeros(2048)), "zero rows stay untouched"
    for i in range(3):
        single = inject_noise(SignalSegment(block[i]), NoiseSpec(-6.0, seed=int(seeds[i])))
        assert np.allclose(noisy[i], single.samples, rtol=0, atol=1e-12), f"row {i} differs from inject_noise"
    assert np.array_equal(inject_noise_batch(block, math.inf, seeds), block)
    print("  ✓ batch rows equal single-segment injection; +inf is a copy")


def test_fft_oracle():
    """FFT analytic cases and agreement with the naive DFT."""
    banner("TEST 6: FFT")

    delta = np.zeros(16)
    delta[0] = 1.0
    assert np.max(np.abs(fft(delta) - 1.0)) < 1e-12

    n = 64
    tone = np.cos(2 * np.pi * 4 * np.arange(n) / n)
    mags = np.abs(fft(tone))
    assert abs(mags[4] - 32) < 1e-9 and abs(mags[60] - 32) < 1e-9
    mags[[4, 60]] = 0.0
    assert mags.max() < 1e-9
    print("  ✓ delta -> flat, cos tone -> bins 4 and 60 at 32")

    rng = np.random.Generator(np.random.PCG64(0))
    worst = {}
    for n in (8, 64, 2048):
        vectors = rng.uniform(-1, 1, (20, n))
        worst[n] = max(float(np.max(np.abs(fft(v) - naive_dft(v)))) for v in vectors)
        assert worst[n] < 1e-9, f"N={n}: FFT vs naive DFT error {worst[n]:.3e}"
    err = worst[2048]
    print("  ✓ 20 random vectors each at N = 8, 64, 2048 within 1e-9 of the naive DFT")
    batch = np.random.Generator(np.random.PCG64(1)).standard_normal((3, 128))
    assert np.max(np.abs(fft(batch) - naive_dft(batch))) < 1e-10
    print(f"  ✓ 2048-point max error {err:.2e}; batched transform agrees")

    with pytest.raises(UnsupportedLengthError):
        fft(np.zeros(48))


def test_fft_linearity():
    """fft(a*x + b*y) == a*fft(x) + b*fft(y)."""
    banner("TEST 7: FFT Linearity")

    rng = np.random.Generator(np.random.PCG64(21))
    worst = 0.0
    for n in (8, 256, 2048):
        for _ in range(10):
            x, y = rng.standard_normal((2, n))
            a, b = rng.uniform(-3, 3, 2)
            err = float(np.max(np.abs(fft(a * x + b * y) - (a * fft(x) + b * fft(y)))))
            worst = max(worst, err)
            assert err < 1e-9, f"N={n}: linearity error {err:.3e}"
    print(f"  ✓ 30 random (x, y, a, b) draws, max error {worst:.2e}")


def test_noise_calibration():
    """Measured SNR within 0.2 dB for at least 99% of 100 seeds at each grid SNR."""
    banner("TEST 8: Noise Calibration")

    segments = [normalize(_unit_power(seed=1000 + s)) for s in range(100)]
    for snr in (-10.0, -6.0, 0.0, 6.0, 10.0):
        hits = sum(
            abs(measure_snr(x, inject_noise(x, NoiseSpec(snr, seed=s))) - snr) < 0.2
            for s, x in enumerate(segments)
        )
        assert hits >= 99, f"{snr} dB: only {hits}/100 seeds within 0.2 dB"
        print(f"  ✓ {snr:>5} dB: {hits}/100 seeds within 0.2 dB")

    plain = sum(
        abs(measure_snr(x, inject_noise(x, NoiseSpec(-6.0, seed=s, calibrated=False))) + 6.0) < 0.2
        for s, x in enumerate(segments)
    )
    print(f"  ✓ uncalibrated i.i.d. draw at -6 dB: {plain}/100 seeds within 0.2 dB (reported)")


def test_featurize():
    """Image layout, Parseval and the raw packing."""
    banner("TEST 9: Featurize")

    zero = featurize(SignalSegment(np.zeros(2048)))
    assert zero.data.shape == IMAGE_SHAPE and not zero.data.any()

    delta = np.zeros(2048)
    delta[0] = 1.0
    img = featurize(SignalSegment(delta), label=3).data
    assert np.allclose(img[0], 1.0) and np.allclose(img[1], 0.0) and img.shape == (2, 64, 32)

    x = np.random.Generator(np.random.PCG64(2)).standard_normal(2048)
    planes = featurize(SignalSegment(x)).data
    lhs, rhs = float(np.sum(x * x)), float(np.sum(planes ** 2)) / 2048
    assert abs(lhs - rhs) / lhs < 1e-6, f"Parseval {lhs} vs {rhs}"
    print(f"  ✓ zero/delta layout; Parseval {lhs:.4f} == {rhs:.4f}")

    raw = raw_image(SignalSegment(x)).data
    assert np.array_equal(raw[0].ravel(), x) and not raw[1].any()
    both = featurize_batch(np.vstack([x, delta]), "fft")
    assert both.shape == (2, *IMAGE_SHAPE) and np.allclose(both[0], planes)
    print("  ✓ raw mode packs time series row-major into channel 0")

    with pytest.raises(ShapeError):
        featurize(SignalSegment(np.zeros(1024)))
    with pytest.raises(ValueError):
        featurize_batch(np.zeros((1, 2048)), "wavelet")


def main():
    return run_suite(
        "SIGNAL PROCESSING TEST SUITE",
        [
            test_sliding_window,
            test_zscore,
            test_noise_power,
            test_measure_snr,
            test_noise_batch,
            test_fft_oracle,
            test_fft_linearity,
            test_noise_calibration,
            test_featurize,
        ],
    )


if __name__ == "__main__":
    sys.exit(main())
