"""Signal conditioning and spectral estimation.

The conditioning chain applied to every sensor trace is
``detrend -> lowpass -> normalize``. Spectra come from a radix-2 FFT over a
zero-padded record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BadPadLength, EmptyBand, InvalidCutoff, InvalidTaps, TooShort

BREATHING_BAND = (0.05, 1.0)  # Hz, i.e. 3..60 BPM
DEFAULT_CUTOFF = 2.0
DEFAULT_TAPS = 101
DEFAULT_PAD = 4096
NEAR_CONSTANT_STD = 1e-12


@dataclass(frozen=True)
class DspConfig:
    cutoff: float = DEFAULT_CUTOFF
    taps: int = DEFAULT_TAPS
    zero_pad_to: int = DEFAULT_PAD
    band: tuple[float, float] = BREATHING_BAND


@dataclass(frozen=True)
class Spectrum:
    bin_frequencies: np.ndarray
    power: np.ndarray
    resolution: float
    source_length: int


class Normalized(NamedTuple):
    samples: np.ndarray
    near_constant: bool


class PeakEstimate(NamedTuple):
    frequency: float
    peak_power: float
    band_power_ratio: float
    zero_power: bool


def _as_signal(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise TooShort(f"need a 1-D signal with at least 2 samples, got shape {x.shape}")
    return x


def detrend(samples, sample_rate: float = 1.0) -> np.ndarray:
    """Subtract the least-squares straight line."""
    x = _as_signal(samples)
    t = np.arange(x.size) / float(sample_rate)
    tc = t - t.mean()
    slope = np.dot(tc, x - x.mean()) / np.dot(tc, tc)
    return x - x.mean() - slope * tc


def lowpass_kernel(sample_rate: float, cutoff: float, taps: int) -> np.ndarray:
    """Hamming-windowed sinc, normalized to unit DC gain."""
    if not 0 < cutoff < sample_rate / 2:
        raise InvalidCutoff(f"cutoff {cutoff} Hz outside (0, {sample_rate / 2})")
    if int(taps) != taps or taps < 11 or taps % 2 == 0:
        raise InvalidTaps(f"taps must be an odd integer >= 11, got {taps}")
    taps = int(taps)
    fc = cutoff / sample_rate
    n = np.arange(taps) - (taps - 1) / 2
    h = 2 * fc * np.sinc(2 * fc * n) * np.hamming(taps)
    return h / h.sum()


def _centered_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    full = np.convolve(x, h, mode="full")
    start = (h.size - 1) // 2
    return full[start : start + x.size]


def lowpass(samples, sample_rate: float, cutoff: float = DEFAULT_CUTOFF, taps: int = DEFAULT_TAPS) -> np.ndarray:
    """Zero-phase FIR low-pass (forward then backward pass, reflect-padded)."""
    x = _as_signal(samples)
    h = lowpass_kernel(sample_rate, cutoff, taps)
    pad = min(x.size - 1, h.size - 1)
    y = np.pad(x, pad, mode="reflect")
    y = _centered_convolve(y, h)
    y = _centered_convolve(y[::-1], h)[::-1]
    return y[pad : pad + x.size]


def normalize(samples) -> Normalized:
    """Zero mean, unit variance. Near-constant input yields zeros and a flag."""
    x = _as_signal(samples)
    sd = x.std()
    if sd < NEAR_CONSTANT_STD:
        return Normalized(np.zeros_like(x), True)
    return Normalized((x - x.mean()) / sd, False)


def _bit_reversed_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def fft(x) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT (length must be a power of two)."""
    a = np.asarray(x, dtype=complex)
    n = a.size
    if not _is_power_of_two(n):
        raise BadPadLength(f"FFT length must be a power of two, got {n}")
    a = a[_bit_reversed_indices(n)]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(-1, size)
        even = blocks[:, :half]
        odd = blocks[:, half:] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=1).reshape(n)
        size *= 2
    return a


def periodogram(samples, sample_rate: float, zero_pad_to: int = DEFAULT_PAD) -> Spectrum:
    """One-sided power |X_k|^2 / L over bins 0..N/2 of the zero-padded record."""
    x = np.asarray(samples, dtype=float)
    n = int(zero_pad_to)
    if n != zero_pad_to or not _is_power_of_two(n) or n < x.size:
        raise BadPadLength(f"zero_pad_to must be a power of two >= {x.size}, got {zero_pad_to}")
    padded = np.zeros(n)
    padded[: x.size] = x
    spec = fft(padded)[: n // 2 + 1]
    power = (spec.real**2 + spec.imag**2) / max(x.size, 1)
    freqs = np.arange(n // 2 + 1) * (sample_rate / n)
    return Spectrum(freqs, power, sample_rate / n, x.size)


def dominant_frequency(spectrum: Spectrum, band: tuple[float, float] = BREATHING_BAND) -> PeakEstimate:
    """Strongest in-band bin, refined by a parabola through it and its neighbors."""
    f_lo, f_hi = band
    freqs, power = spectrum.bin_frequencies, spectrum.power
    nyquist = freqs[-1]
    if not 0 <= f_lo < f_hi <= nyquist + 1e-12:
        raise EmptyBand(f"band {band} invalid for Nyquist {nyquist}")
    in_band = np.flatnonzero((freqs >= f_lo) & (freqs <= f_hi))
    if in_band.size == 0:
        raise EmptyBand(f"no spectral bins inside {band}")

    total = power[1:].sum()
    if total <= 0:
        return PeakEstimate(0.0, 0.0, 0.0, True)
    ratio = float(min(power[in_band].sum() / total, 1.0))

    k = int(in_band[np.argmax(power[in_band])])
    offset, peak = 0.0, float(power[k])
    if 0 < k < power.size - 1:
        y0, y1, y2 = power[k - 1], power[k], power[k + 1]
        denom = y0 - 2 * y1 + y2
        if denom < 0:
            offset = float(np.clip(0.5 * (y0 - y2) / denom, -0.5, 0.5))
            peak = float(y1 - 0.25 * (y0 - y2) * offset)
    return PeakEstimate(float(freqs[k] + offset * spectrum.resolution), peak, ratio, False)
