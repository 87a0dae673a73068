"""On-disk formats: JSON-Lines traces and the feature CSV."""

from __future__ import annotations

import csv
import json
import math
from typing import Iterable, Iterator, TextIO, Union

import numpy as np

from .channel import SensorTrace
from .errors import SchemaViolation
from .features import feature_names
from .ml import Dataset
from .waveform import BreathingClass, ChestTrace

TRACE_FORMAT = "breathsim-trace-v1"
META_COLUMNS = ("label", "distance_m", "seed")


class RecordError(SchemaViolation):
    """A malformed input record, tagged with its 1-based line number."""

    def __init__(self, lineno: int, reason: str):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {reason}")


def _opt_float(value):
    return None if value is None else float(value)


def trace_record(trace: Union[ChestTrace, SensorTrace]) -> dict:
    rec = {
        "format": TRACE_FORMAT,
        "class_id": int(trace.label),
        "true_rate": _opt_float(trace.true_rate),
        "true_depth": _opt_float(trace.true_depth),
        "sample_rate": float(trace.sample_rate),
    }
    if isinstance(trace, SensorTrace):
        rec["seed"] = int(trace.source_seed)
        rec["distance_m"] = float(trace.distance)
        rec["channel_seed"] = int(trace.channel_seed)
    else:
        rec["seed"] = int(trace.seed)
    rec["samples"] = [float(v) for v in trace.samples]
    return rec


def write_traces(fh: TextIO, traces: Iterable[Union[ChestTrace, SensorTrace]]) -> int:
    n = 0
    for trace in traces:
        fh.write(json.dumps(trace_record(trace), separators=(",", ":")))
        fh.write("\n")
        n += 1
    return n


def _number(rec: dict, key: str, lineno: int, optional: bool = False):
    value = rec.get(key)
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise RecordError(lineno, f"field {key!r} must be a finite number")
    return value


def parse_trace(line: str, lineno: int = 1) -> Union[ChestTrace, SensorTrace]:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(lineno, f"invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise RecordError(lineno, "record must be a JSON object")
    if rec.get("format", TRACE_FORMAT) != TRACE_FORMAT:
        raise RecordError(lineno, f"unsupported trace format {rec.get('format')!r}")
    class_id = rec.get("class_id")
    if not isinstance(class_id, int) or isinstance(class_id, bool) or not 0 <= class_id <= 7:
        raise RecordError(lineno, "class_id must be an integer in 0..7")
    fs = _number(rec, "sample_rate", lineno)
    if fs <= 0:
        raise RecordError(lineno, "sample_rate must be positive")
    seed = rec.get("seed")
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise RecordError(lineno, "seed must be a non-negative integer")
    samples = rec.get("samples")
    if not isinstance(samples, list) or not samples:
        raise RecordError(lineno, "samples must be a non-empty list")
    try:
        x = np.array(samples, dtype=float)
    except (TypeError, ValueError):
        raise RecordError(lineno, "samples must be numbers") from None
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise RecordError(lineno, "samples must be finite numbers")
    label = BreathingClass(class_id)
    rate = _number(rec, "true_rate", lineno, optional=True)
    depth = _number(rec, "true_depth", lineno, optional=True)
    if "distance_m" not in rec:
        return ChestTrace(x, float(fs), label, rate, depth, seed)
    distance = _number(rec, "distance_m", lineno)
    channel_seed = rec.get("channel_seed")
    if not isinstance(channel_seed, int) or isinstance(channel_seed, bool) or channel_seed < 0:
        raise RecordError(lineno, "channel_seed must be a non-negative integer")
    return SensorTrace(x, float(fs), label, float(distance), channel_seed, seed, rate, depth)


def read_traces(fh: TextIO) -> Iterator[Union[ChestTrace, SensorTrace]]:
    for lineno, line in enumerate(fh, start=1):
        if line.strip():
            yield parse_trace(line, lineno)


# -- feature CSV --------------------------------------------------------------


def csv_header() -> list[str]:
    return feature_names() + list(META_COLUMNS)


def format_number(value: float) -> str:
    """Shortest round-tripping decimal, never in exponent notation."""
    return np.format_float_positional(float(value), unique=True, trim="-")


def write_features(fh: TextIO, X: np.ndarray, labels, distances, seeds) -> int:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(csv_header())
    for row, label, distance, seed in zip(X, labels, distances, seeds):
        writer.writerow([format_number(v) for v in row] + [int(label), format_number(distance), int(seed)])
    return len(X)


def read_features(fh: TextIO):
    """Parse a feature CSV into ``(Dataset or None, distances, seeds)``.

    Returns ``None`` for the dataset when the file holds only a header.
    """
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaViolation("feature CSV is empty (no header row)") from None
    missing = [c for c in csv_header() if c not in header]
    if missing:
        raise SchemaViolation(f"feature CSV lacks columns: {', '.join(missing)}")
    if header != csv_header():
        raise SchemaViolation("feature CSV columns are not in canonical order")
    X, labels, distances, seeds = [], [], [], []
    n_feat = len(feature_names())
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise RecordError(lineno, f"expected {len(header)} fields, got {len(row)}")
        try:
            values = [float(v) for v in row[:n_feat]]
            label, distance, seed = int(row[n_feat]), float(row[n_feat + 1]), int(row[n_feat + 2])
        except ValueError as exc:
            raise RecordError(lineno, str(exc)) from None
        if not all(math.isfinite(v) for v in values) or not 0 <= label <= 7:
            raise RecordError(lineno, "non-finite feature or label outside 0..7")
        X.append(values)
        labels.append(label)
        distances.append(distance)
        seeds.append(seed)
    if not X:
        return None, np.array([]), np.array([], dtype=np.uint64)
    dataset = Dataset(np.array(X), np.array(labels), tuple(feature_names()))
    return dataset, np.array(distances), np.array(seeds, dtype=np.uint64)
