"""Chest-displacement synthesis for the eight breathing classes.

Displacement is expressed as a fraction of maximum rib-cage travel, so every
trace lives in [0, 1]. Regular classes are built from raised-cosine breathing
cycles; the faulty class is built from one of three artifact generators.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import dsp
from .errors import InvalidSpec, SynthesisFailure

DEFAULT_DURATION = 60.0
DEFAULT_SAMPLE_RATE = 20.0
DEFAULT_PERIOD_JITTER = 0.05
DEFAULT_AMPLITUDE_JITTER = 0.05

# Faulty traces must carry less in-band power than this (eupnea sits near 1.0).
FAULTY_MAX_BAND_RATIO = 0.4
FAULTY_MAX_RETRIES = 10
FAULTY_MODES = ("drift", "steps", "saturation")


class BreathingClass(enum.IntEnum):
    EUPNEA = 0
    APNEA = 1
    TACHYPNEA = 2
    BRADYPNEA = 3
    HYPERPNEA = 4
    HYPOPNEA = 5
    KUSSMAUL = 6
    FAULTY = 7

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value) -> "BreathingClass":
        """Accept an id (int or digit string) or a case-insensitive name."""
        if isinstance(value, str):
            key = value.strip().lower().replace("'s", "")
            if key.isdigit():
                return cls(int(key))
            for member in cls:
                if member.name.lower() == key:
                    return member
            raise ValueError(f"unknown breathing class {value!r}")
        return cls(int(value))


class ClassRanges(NamedTuple):
    rate_min: float
    rate_max: float
    depth_min: float
    depth_max: float


_RANGES = {
    BreathingClass.EUPNEA: ClassRanges(12, 20, 0.30, 0.58),
    BreathingClass.APNEA: ClassRanges(0, 0, 0.0, 0.0),
    BreathingClass.TACHYPNEA: ClassRanges(21, 50, 0.30, 0.58),
    BreathingClass.BRADYPNEA: ClassRanges(1, 11, 0.30, 0.58),
    BreathingClass.HYPERPNEA: ClassRanges(12, 20, 0.59, 1.00),
    BreathingClass.HYPOPNEA: ClassRanges(12, 20, 0.01, 0.29),
    BreathingClass.KUSSMAUL: ClassRanges(21, 50, 0.59, 1.00),
    # "Any / Any": the widest envelope of the other rows.
    BreathingClass.FAULTY: ClassRanges(0, 50, 0.0, 1.00),
}


def class_ranges(cls) -> ClassRanges:
    return _RANGES[BreathingClass(cls)]


@dataclass(frozen=True)
class WaveformSpec:
    cls: BreathingClass
    rate: float
    depth: float
    duration: float = DEFAULT_DURATION
    sample_rate: float = DEFAULT_SAMPLE_RATE
    period_jitter: float = DEFAULT_PERIOD_JITTER
    amplitude_jitter: float = DEFAULT_AMPLITUDE_JITTER
    seed: int = 0

    def validate(self) -> None:
        if not (self.duration > 0 and self.sample_rate > 0):
            raise InvalidSpec("duration and sample_rate must be positive")
        for name in ("period_jitter", "amplitude_jitter"):
            value = getattr(self, name)
            if not 0 <= value < 0.5:
                raise InvalidSpec(f"{name} must lie in [0, 0.5), got {value}")
        if self.cls is BreathingClass.FAULTY:
            return
        r = class_ranges(self.cls)
        if not r.rate_min <= self.rate <= r.rate_max:
            raise InvalidSpec(f"rate {self.rate} outside {self.cls.label} range [{r.rate_min}, {r.rate_max}]")
        if not r.depth_min <= self.depth <= r.depth_max:
            raise InvalidSpec(f"depth {self.depth} outside {self.cls.label} range [{r.depth_min}, {r.depth_max}]")


@dataclass(frozen=True)
class ChestTrace:
    samples: np.ndarray
    sample_rate: float
    label: BreathingClass
    true_rate: Optional[float]
    true_depth: Optional[float]
    seed: int = 0
    mode: Optional[str] = None

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _n_samples(duration: float, sample_rate: float) -> int:
    return int(round(duration * sample_rate))


def sample_spec(
    cls,
    duration: float = DEFAULT_DURATION,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    rng_seed: int = 0,
    period_jitter: float = DEFAULT_PERIOD_JITTER,
    amplitude_jitter: float = DEFAULT_AMPLITUDE_JITTER,
) -> WaveformSpec:
    """Draw rate and depth uniformly inside the class's ranges.

    For the faulty class rate and depth are meaningless; they are left at zero
    and the seed is handed on to :func:`synth_faulty_trace`.
    """
    cls = BreathingClass(cls)
    rng = np.random.default_rng(rng_seed)
    if cls is BreathingClass.FAULTY:
        rate = depth = 0.0
    else:
        r = class_ranges(cls)
        rate = float(rng.uniform(r.rate_min, r.rate_max))
        depth = float(rng.uniform(r.depth_min, r.depth_max))
    return WaveformSpec(cls, rate, depth, duration, sample_rate, period_jitter, amplitude_jitter, rng_seed)


def synth_chest_trace(spec: WaveformSpec) -> ChestTrace:
    if spec.cls is BreathingClass.FAULTY:
        raise InvalidSpec("faulty traces are produced by synth_faulty_trace")
    spec.validate()
    n = _n_samples(spec.duration, spec.sample_rate)
    out = np.zeros(n)
    if spec.rate > 0 and spec.depth > 0:
        rng = np.random.default_rng(spec.seed)
        t = np.arange(n) / spec.sample_rate
        nominal = 60.0 / spec.rate
        start = 0.0
        while start < spec.duration:
            period = nominal * (1 + rng.uniform(-spec.period_jitter, spec.period_jitter))
            amp = spec.depth * (1 + rng.uniform(-spec.amplitude_jitter, spec.amplitude_jitter))
            lo = int(np.ceil(start * spec.sample_rate - 1e-9))
            hi = min(n, int(np.ceil((start + period) * spec.sample_rate - 1e-9)))
            phase = (t[lo:hi] - start) / period
            out[lo:hi] = amp * (1 - np.cos(2 * np.pi * phase)) / 2
            start += period
    np.clip(out, 0.0, 1.0, out=out)
    return ChestTrace(out, spec.sample_rate, spec.cls, spec.rate, spec.depth, spec.seed)


# -- faulty-data artifacts ---------------------------------------------------


def drift_trace(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random-walk baseline, rescaled so its total excursion is 0.6..0.95."""
    walk = np.cumsum(rng.normal(size=n))
    span = np.ptp(walk)
    excursion = rng.uniform(0.6, 0.95)
    walk = (walk - walk.min()) * (excursion / span if span > 0 else 0.0)
    return walk + rng.uniform(0.0, 1.0 - excursion)


def step_trace(n: int, rng: np.random.Generator) -> np.ndarray:
    """Piecewise-constant levels with 3..8 random discontinuities."""
    n_steps = int(rng.integers(3, 9))
    edges = np.sort(rng.choice(np.arange(1, n), size=n_steps, replace=False))
    levels = rng.uniform(0.0, 1.0, size=n_steps + 1)
    return levels[np.searchsorted(edges, np.arange(n), side="right")]


def saturation_trace(
    n: int,
    sample_rate: float,
    clip_level: float,
    offset: float,
    amplitude: float,
    frequency: float,
    phase: float = 0.0,
) -> np.ndarray:
    """A slow raised-cosine swing pushed into a rail and clipped there.

    With ``clip_level == 1`` the swing rises from ``offset``; with
    ``clip_level == 0`` the mirror image falls from ``1 - offset``. An offset of
    one or more therefore pins the whole trace to the rail.
    """
    t = np.arange(n) / sample_rate
    swing = offset + amplitude * (1 - np.cos(2 * np.pi * frequency * t + phase)) / 2
    x = np.clip(swing, 0.0, 1.0)
    return x if clip_level >= 0.5 else 1.0 - x


def _random_saturation(n: int, sample_rate: float, rng: np.random.Generator) -> np.ndarray:
    for _ in range(100):
        x = saturation_trace(
            n,
            sample_rate,
            clip_level=float(rng.integers(0, 2)),
            offset=rng.uniform(0.0, 0.15),
            amplitude=rng.uniform(1.2, 3.0),
            frequency=rng.uniform(0.008, 0.03),
            phase=rng.uniform(0, 2 * np.pi),
        )
        if np.mean((x <= 0.0) | (x >= 1.0)) >= 0.5:
            return x
    raise SynthesisFailure("could not draw a saturation trace clipped for half its length")


def band_power_ratio(samples, sample_rate: float, band=dsp.BREATHING_BAND) -> float:
    """In-band share of the non-DC power of a detrended trace."""
    x = dsp.detrend(samples, sample_rate)
    pad = 1 << max(int(np.ceil(np.log2(x.size))), 1)
    spectrum = dsp.periodogram(x, sample_rate, max(pad, dsp.DEFAULT_PAD))
    return dsp.dominant_frequency(spectrum, band).band_power_ratio


def synth_faulty_trace(
    duration: float = DEFAULT_DURATION,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    seed: int = 0,
    mode: Optional[str] = None,
) -> ChestTrace:
    """Erroneous recording without a breathing waveform.

    ``mode`` pins the artifact type; by default it is drawn uniformly. A draw
    whose breathing-band power ratio reaches ``FAULTY_MAX_BAND_RATIO`` is
    rejected and redrawn.
    """
    if not (duration > 0 and sample_rate > 0):
        raise InvalidSpec("duration and sample_rate must be positive")
    if mode is not None and mode not in FAULTY_MODES:
        raise InvalidSpec(f"unknown faulty mode {mode!r}; expected one of {FAULTY_MODES}")
    n = _n_samples(duration, sample_rate)
    rng = np.random.default_rng(seed)
    for _ in range(FAULTY_MAX_RETRIES):
        chosen = mode or FAULTY_MODES[int(rng.integers(0, 3))]
        if chosen == "drift":
            x = drift_trace(n, rng)
        elif chosen == "steps":
            x = step_trace(n, rng)
        else:
            x = _random_saturation(n, sample_rate, rng)
        x = np.clip(x, 0.0, 1.0)
        if n < 2 or band_power_ratio(x, sample_rate) < FAULTY_MAX_BAND_RATIO:
            return ChestTrace(x, sample_rate, BreathingClass.FAULTY, None, None, seed, chosen)
    raise SynthesisFailure(f"no aperiodic faulty trace after {FAULTY_MAX_RETRIES} draws (seed={seed})")


def synthesize(
    cls,
    seed: int,
    duration: float = DEFAULT_DURATION,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    period_jitter: float = DEFAULT_PERIOD_JITTER,
    amplitude_jitter: float = DEFAULT_AMPLITUDE_JITTER,
) -> ChestTrace:
    """One random recording of ``cls``; dispatches on the faulty class."""
    cls = BreathingClass(cls)
    if cls is BreathingClass.FAULTY:
        return synth_faulty_trace(duration, sample_rate, seed)
    spec = sample_spec(cls, duration, sample_rate, seed, period_jitter, amplitude_jitter)
    return synth_chest_trace(spec)
