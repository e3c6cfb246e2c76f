"""
Synthetic Bearing Signals

Self-contained stand-in for the benchmark recordings. A localized bearing
defect excites the structure once per contact, giving a train of impulses
at the fault characteristic rate, each ringing down at a structural
resonance:

    x(t) = sum_j A * exp(-d (t - t_j)) * sin(2 pi f_r (t - t_j)) * [t >= t_j]
           + noise_floor * n(t)

with t_j = t0 + j / rate and a random phase t0 per segment. Classes differ
in rate, resonance and decay, so they are separable in the spectrum.

Default class k: rate 20 + 15k Hz, resonance 1000 + 450k Hz, decay
300 + 50k 1/s, amplitude 1, noise floor 0.05.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from rashvit import config
from rashvit.src.datasets.archive import LabeledDataset

logger = logging.getLogger(__name__)

# Kernel is truncated once the envelope falls below this fraction
_KERNEL_FLOOR = 1e-6


class SynthSpec(BaseModel):
    """Generative parameters of a synthetic dataset."""

    model_config = ConfigDict(extra="forbid")

    num_classes: int = Field(default=10, ge=1)
    segments_per_class: int = Field(default=64, ge=1)
    sample_rate_hz: float = Field(default=config.DEFAULT_SAMPLE_RATE_HZ, gt=0.0)
    window: int = Field(default=config.WINDOW_SIZE, ge=1, description="Samples per segment")
    impulse_rates_hz: Optional[List[float]] = Field(default=None, description="Per class; default 20 + 15k")
    resonances_hz: Optional[List[float]] = Field(default=None, description="Per class; default 1000 + 450k")
    decays: Optional[List[float]] = Field(default=None, description="Per class envelope decay (1/s); default 300 + 50k")
    amplitudes: Optional[List[float]] = Field(default=None, description="Per class; default `amplitude`")
    amplitude: float = Field(default=1.0, ge=0.0, description="Impulse amplitude when `amplitudes` is unset")
    noise_floor: float = Field(default=0.05, ge=0.0, description="Std of the additive base noise")
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_classes(self):
        for name in ("impulse_rates_hz", "resonances_hz", "decays", "amplitudes"):
            values = getattr(self, name)
            if values is None:
                continue
            if len(values) != self.num_classes:
                raise ValueError(f"{name} has {len(values)} entries, expected {self.num_classes}")
            if any(v < 0 for v in values) or (name != "amplitudes" and any(v == 0 for v in values)):
                raise ValueError(f"{name} entries must be positive")
        params = [self.class_params(k) for k in range(self.num_classes)]
        if len(set(params)) != len(params):
            raise ValueError("distinct classes must differ in at least one generative parameter")
        return self

    def class_params(self, k: int) -> Tuple[float, float, float, float]:
        """(impulse rate, resonance, decay, amplitude) of class k."""
        rate = self.impulse_rates_hz[k] if self.impulse_rates_hz else 20.0 + 15.0 * k
        resonance = self.resonances_hz[k] if self.resonances_hz else 1000.0 + 450.0 * k
        decay = self.decays[k] if self.decays else 300.0 + 50.0 * k
        amp = self.amplitudes[k] if self.amplitudes else self.amplitude
        return float(rate), float(resonance), float(decay), float(amp)


def _ringdown(resonance: float, decay: float, fs: float, max_len: int) -> np.ndarray:
    length = min(max_len, int(math.ceil(fs * math.log(1.0 / _KERNEL_FLOOR) / decay)) + 1)
    t = np.arange(length) / fs
    return np.exp(-decay * t) * np.sin(2.0 * math.pi * resonance * t)


def _segment(
    rng: np.random.Generator,
    kernel: np.ndarray,
    rate: float,
    amp: float,
    spec: SynthSpec,
) -> np.ndarray:
    fs, n = spec.sample_rate_hz, spec.window
    t0 = rng.uniform(0.0, 1.0 / rate)
    times = t0 + np.arange(int(math.ceil(n / fs * rate)) + 1) / rate
    idx = np.round(times * fs).astype(np.int64)
    train = np.zeros(n)
    train[idx[idx < n]] = amp
    signal = np.convolve(train, kernel)[:n]
    noise = rng.standard_normal(n)
    return signal + spec.noise_floor * noise


def synth_generate(spec: SynthSpec) -> LabeledDataset:
    """
    Generate a class-balanced labeled dataset.

    Deterministic: the same spec (seed included) gives bit-identical
    float32 segments, ordered by class then index.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    total = spec.num_classes * spec.segments_per_class
    signals = np.zeros((total, spec.window), dtype=np.float32)
    labels = np.repeat(np.arange(spec.num_classes, dtype=np.int64), spec.segments_per_class)
    source_ids = []

    row = 0
    for k in range(spec.num_classes):
        rate, resonance, decay, amp = spec.class_params(k)
        kernel = _ringdown(resonance, decay, spec.sample_rate_hz, spec.window)
        for i in range(spec.segments_per_class):
            signals[row] = _segment(rng, kernel, rate, amp, spec)
            source_ids.append(f"synth/c{k}/{i}")
            row += 1

    logger.info(
        f"Generated {total} synthetic segments "
        f"({spec.num_classes} classes x {spec.segments_per_class}, seed {spec.seed})"
    )
    return LabeledDataset(
        signals=signals,
        labels=labels,
        classes=[f"synth_{k}" for k in range(spec.num_classes)],
        sample_rate_hz=spec.sample_rate_hz,
        source_ids=source_ids,
        provenance={"synth_spec": spec.model_dump(mode="json")},
    )
