"""Batch recording simulation: waveform -> channel -> features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import dsp, waveform
from .channel import ChannelConfig, SensorTrace, record
from .features import extract_features, feature_names
from .ml import Dataset
from .seeding import derive_seed

ALL_CLASSES = tuple(waveform.BreathingClass)


@dataclass(frozen=True)
class WaveformOptions:
    duration: float = waveform.DEFAULT_DURATION
    sample_rate: float = waveform.DEFAULT_SAMPLE_RATE
    period_jitter: float = waveform.DEFAULT_PERIOD_JITTER
    amplitude_jitter: float = waveform.DEFAULT_AMPLITUDE_JITTER

    def __post_init__(self):
        if not (self.duration > 0 and self.sample_rate > 0):
            raise ValueError("duration and sample_rate must be positive")
        for name in ("period_jitter", "amplitude_jitter"):
            if not 0 <= getattr(self, name) < 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5)")


def recording_seeds(seed: int, class_id: int, index: int, distance: float) -> tuple[int, int]:
    """(waveform seed, channel seed) for one recording.

    The waveform seed ignores distance, so every distance sees the same
    chest motion and only the channel realization differs.
    """
    chest = derive_seed(seed, class_id, index)
    channel = derive_seed(seed, class_id, index, int(round(distance * 1000)))
    return chest, channel


def generate_recordings(
    distance: float,
    per_class: int,
    channel_base: ChannelConfig = ChannelConfig(),
    seed: int = 0,
    classes: Sequence[int] = ALL_CLASSES,
    options: WaveformOptions = WaveformOptions(),
) -> list[SensorTrace]:
    traces = []
    for cls in classes:
        for i in range(per_class):
            chest_seed, channel_seed = recording_seeds(seed, int(cls), i, distance)
            chest = waveform.synthesize(
                cls,
                chest_seed,
                options.duration,
                options.sample_rate,
                options.period_jitter,
                options.amplitude_jitter,
            )
            traces.append(record(chest, channel_base.replace(distance=distance, seed=channel_seed)))
    return traces


@dataclass(frozen=True)
class FeatureTable:
    dataset: Dataset
    distances: np.ndarray
    seeds: np.ndarray

    def at_distance(self, distance: float) -> Dataset:
        rows = np.flatnonzero(np.isclose(self.distances, distance))
        return self.dataset.subset(rows)

    def distinct_distances(self) -> list[float]:
        return sorted(set(float(d) for d in self.distances))


def featurize(traces: Iterable[SensorTrace], dsp_config: dsp.DspConfig = dsp.DspConfig()) -> FeatureTable:
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to featurize")
    X = np.array([extract_features(t, dsp_config) for t in traces])
    labels = np.array([int(t.label) for t in traces], dtype=np.int64)
    return FeatureTable(
        Dataset(X, labels, tuple(feature_names())),
        np.array([t.distance for t in traces]),
        np.array([t.source_seed for t in traces], dtype=np.uint64),
    )


def simulate_features(
    distance: float,
    per_class: int,
    channel_base: ChannelConfig = ChannelConfig(),
    seed: int = 0,
    options: WaveformOptions = WaveformOptions(),
    dsp_config: dsp.DspConfig = dsp.DspConfig(),
    classes: Optional[Sequence[int]] = None,
) -> FeatureTable:
    traces = generate_recordings(distance, per_class, channel_base, seed, classes or ALL_CLASSES, options)
    return featurize(traces, dsp_config)
