"""Infrared reflection channel: chest displacement to photodetector volts.

The received breathing component shrinks with a power-law path gain while
the noise floor stays put, so SNR falls as gain squared with distance.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LengthMismatch
from .waveform import BreathingClass, ChestTrace

DISTANCES = (0.5, 1.0, 1.5)


@dataclass(frozen=True)
class ChannelConfig:
    distance: float = 0.5
    reference_distance: float = 0.5
    path_loss_exponent: float = 2.0
    signal_gain_at_reference: float = 1.0
    dc_offset: float = 0.5
    noise_sigma: float = 0.073  # calibrated, see evaluation.calibrate_noise_sigma
    drift_amplitude: float = 0.01
    drift_frequency: float = 0.02
    adc_bits: Optional[int] = 12
    adc_full_scale: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"distance must be positive, got {self.distance}")
        if not self.reference_distance > 0:
            raise ValueError(f"reference_distance must be positive, got {self.reference_distance}")
        if self.path_loss_exponent < 0:
            raise ValueError("path_loss_exponent must be >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.drift_amplitude < 0 or self.drift_frequency < 0:
            raise ValueError("drift amplitude and frequency must be >= 0")
        if self.adc_bits is not None:
            if int(self.adc_bits) != self.adc_bits or not 1 <= self.adc_bits <= 24:
                raise ValueError(f"adc_bits must be an integer in [1, 24], got {self.adc_bits}")
            if not self.adc_full_scale > 0:
                raise ValueError("adc_full_scale must be positive")

    def replace(self, **changes) -> "ChannelConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SensorTrace:
    samples: np.ndarray
    sample_rate: float
    label: BreathingClass
    distance: float
    channel_seed: int
    source_seed: int = 0
    true_rate: Optional[float] = None
    true_depth: Optional[float] = None

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples) -> "SensorTrace":
        return dataclasses.replace(self, samples=np.asarray(samples, dtype=float))


def path_gain(config: ChannelConfig) -> float:
    return (config.reference_distance / config.distance) ** config.path_loss_exponent


def transduce(chest: ChestTrace, config: ChannelConfig) -> SensorTrace:
    """Photodetector voltage before the ADC.

    v = dc_offset + gain * chest + drift + white noise; the drift phase is
    drawn before the noise from the same seeded stream.
    """
    rng = np.random.default_rng(config.seed)
    x = np.asarray(chest.samples, dtype=float)
    t = np.arange(x.size) / chest.sample_rate
    phase = rng.uniform(0.0, 2 * np.pi)
    noise = rng.normal(0.0, config.noise_sigma, size=x.size) if config.noise_sigma > 0 else 0.0
    v = config.dc_offset + path_gain(config) * config.signal_gain_at_reference * x
    if config.drift_amplitude > 0:
        v = v + config.drift_amplitude * np.sin(2 * np.pi * config.drift_frequency * t + phase)
    v = v + noise
    return SensorTrace(
        samples=v,
        sample_rate=chest.sample_rate,
        label=chest.label,
        distance=config.distance,
        channel_seed=config.seed,
        source_seed=chest.seed,
        true_rate=chest.true_rate,
        true_depth=chest.true_depth,
    )


def quantize_samples(samples, bits: int, full_scale: float) -> np.ndarray:
    step = full_scale / (2**bits - 1)
    clipped = np.clip(np.asarray(samples, dtype=float), 0.0, full_scale)
    return np.round(clipped / step) * step


def quantize(trace: SensorTrace, config: ChannelConfig) -> SensorTrace:
    """Clamp to [0, full_scale] and snap to 2**bits evenly spaced levels."""
    if config.adc_bits is None:
        raise ValueError("quantize needs adc_bits")
    return trace.with_samples(quantize_samples(trace.samples, config.adc_bits, config.adc_full_scale))


def record(chest: ChestTrace, config: ChannelConfig) -> SensorTrace:
    """Full channel: transduction followed by the ADC when one is configured."""
    sensor = transduce(chest, config)
    return quantize(sensor, config) if config.adc_bits is not None else sensor


def measure_snr(chest: ChestTrace, sensor: SensorTrace, config: ChannelConfig) -> float:
    """Received-signal to residual power ratio in dB (+/-inf on degenerate cases)."""
    x = np.asarray(chest.samples, dtype=float)
    v = np.asarray(sensor.samples, dtype=float)
    if x.size != v.size:
        raise LengthMismatch(f"chest has {x.size} samples, sensor has {v.size}")
    signal = path_gain(config) * config.signal_gain_at_reference * x
    residual = v - config.dc_offset - signal
    p_signal, p_residual = signal.var(), residual.var()
    # float round-off of dc + signal is not noise
    if p_residual <= (8 * np.finfo(float).eps * np.abs(v).max()) ** 2:
        return float("inf")
    if p_signal == 0:
        return float("-inf")
    return float(10 * np.log10(p_signal / p_residual))
