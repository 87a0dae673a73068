"""Synthetic light-wave respiration sensing and breathing-pattern classification."""

from .waveform import BreathingClass, ChestTrace, class_ranges, synthesize
from .channel import ChannelConfig, SensorTrace, path_gain, transduce, quantize, measure_snr
from .features import feature_names, extract_features
from .ml import TrainConfig, TreeModel, ForestModel, train_tree, train_forest, predict

__version__ = "0.1.0"

__all__ = [
    "BreathingClass",
    "ChestTrace",
    "class_ranges",
    "synthesize",
    "ChannelConfig",
    "SensorTrace",
    "path_gain",
    "transduce",
    "quantize",
    "measure_snr",
    "feature_names",
    "extract_features",
    "TrainConfig",
    "TreeModel",
    "ForestModel",
    "train_tree",
    "train_forest",
    "predict",
]
