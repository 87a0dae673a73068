"""Twelve-number summary of one conditioned recording.

Rate and periodicity features are computed on the normalized signal and are
therefore blind to channel gain; amplitude features are read off the filtered
signal in volts, before normalization.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks

from . import dsp
from .channel import SensorTrace
from .errors import TooShort

FEATURE_NAMES = (
    "est_rate_bpm",
    "band_power_ratio",
    "rms_amplitude",
    "peak_to_peak",
    "variance",
    "zero_crossing_rate",
    "spectral_entropy",
    "autocorr_peak_value",
    "autocorr_peak_lag_s",
    "peaks_per_minute",
    "crest_factor",
    "near_constant_flag",
)

MIN_DURATION = 10.0
RATE_GATE_RATIO = 0.1
PEAK_PROMINENCE = 0.5
PEAK_MIN_SPACING_S = 0.8
AUTOCORR_LAGS_S = (1.0, 20.0)


def feature_names() -> list[str]:
    return list(FEATURE_NAMES)


def spectral_entropy(power: np.ndarray) -> float:
    """Shannon entropy of the non-DC power distribution, scaled to [0, 1]."""
    p = np.asarray(power[1:], dtype=float)
    total = p.sum()
    if total <= 0 or p.size < 2:
        return 0.0
    p = p[p > 0] / total
    return float(min(-(p * np.log(p)).sum() / np.log(power.size - 1), 1.0))


def autocorr_peak(x: np.ndarray, sample_rate: float, lags_s=AUTOCORR_LAGS_S) -> tuple[float, float]:
    """Highest autocorrelation peak (value, lag in s) within the lag window.

    Uses the biased estimate normalized by lag-zero energy. Falls back to the
    window maximum when there is no interior local maximum.
    """
    energy = np.dot(x, x)
    if energy <= 0:
        return 0.0, 0.0
    lo = max(1, int(round(lags_s[0] * sample_rate)))
    hi = min(x.size - 1, int(round(lags_s[1] * sample_rate)))
    if hi < lo:
        return 0.0, 0.0
    # lags 0..hi+1 so that local maxima at the window edges can be recognized
    top = min(hi + 1, x.size - 1)
    r = np.array([np.dot(x[: x.size - k], x[k:]) for k in range(top + 1)]) / energy
    window = np.arange(lo, hi + 1)
    inner = window[(window > 0) & (window < top)]
    is_peak = (r[inner] > r[inner - 1]) & (r[inner] >= r[inner + 1])
    candidates = inner[is_peak] if is_peak.any() else window
    best = int(candidates[np.argmax(r[candidates])])
    return float(r[best]), best / sample_rate


def extract_features(sensor: SensorTrace, dsp_config: dsp.DspConfig = dsp.DspConfig()) -> np.ndarray:
    """Run the conditioning chain and return the 12 features in canonical order."""
    fs = sensor.sample_rate
    v = np.asarray(sensor.samples, dtype=float)
    if v.size / fs < MIN_DURATION:
        raise TooShort(f"need at least {MIN_DURATION:g} s of data, got {v.size / fs:g} s")

    filtered = dsp.lowpass(dsp.detrend(v, fs), fs, dsp_config.cutoff, dsp_config.taps)
    z, near_constant = dsp.normalize(filtered)

    pad = max(dsp_config.zero_pad_to, 1 << int(np.ceil(np.log2(z.size))))
    spectrum = dsp.periodogram(z, fs, pad)
    peak = dsp.dominant_frequency(spectrum, dsp_config.band)
    gated = near_constant or peak.zero_power or peak.band_power_ratio < RATE_GATE_RATIO
    est_rate = 0.0 if gated else 60.0 * peak.frequency

    if near_constant:
        rms = p2p = var = crest = 0.0
    else:
        centered = filtered - filtered.mean()
        var = float(centered.var())
        rms = float(np.sqrt(var))
        p2p = float(np.ptp(filtered))
        crest = float(np.abs(centered).max() / rms)

    signs = np.signbit(z)
    zcr = float(np.count_nonzero(signs[1:] != signs[:-1]) / (z.size / fs)) if not near_constant else 0.0

    ac_value, ac_lag = autocorr_peak(z, fs)
    if near_constant:
        n_peaks = 0
    else:
        spacing = max(1, int(np.ceil(PEAK_MIN_SPACING_S * fs)))
        n_peaks = len(find_peaks(z, prominence=PEAK_PROMINENCE, distance=spacing)[0])

    return np.array(
        [
            est_rate,
            peak.band_power_ratio,
            rms,
            p2p,
            var,
            zcr,
            spectral_entropy(spectrum.power),
            ac_value,
            ac_lag,
            n_peaks * 60.0 / (z.size / fs),
            crest,
            1.0 if near_constant else 0.0,
        ]
    )
