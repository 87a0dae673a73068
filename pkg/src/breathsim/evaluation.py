"""Stratified k-fold cross-validation and the per-distance accuracy sweep."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import dsp
from .channel import DISTANCES, ChannelConfig
from .dataset import WaveformOptions, simulate_features
from .errors import ClassTooSmall, InvalidK, SchemaViolation, UnknownVersion
from .ml import N_CLASSES, Dataset, TrainConfig, fit, predict_many
from .seeding import derive_seed

REPORT_FORMAT = "breathsim-report-v1"
MODEL_KINDS = ("DT", "RF")
_KIND_NAMES = {"DT": "tree", "RF": "forest"}


def default_train_configs(seed: int = 0) -> dict[str, TrainConfig]:
    return {"DT": TrainConfig.for_tree(seed=seed), "RF": TrainConfig.for_forest(seed=seed)}


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def stratified_kfold(labels, k: int, seed: int = 0) -> FoldPlan:
    """Shuffle each class and deal its rows round-robin across the folds.

    Dealing continues where the previous class stopped, which keeps total
    fold sizes within one of each other as well.
    """
    labels = np.asarray(labels)
    if int(k) != k or k < 2:
        raise InvalidK(f"k must be an integer >= 2, got {k}")
    classes, counts = np.unique(labels, return_counts=True)
    for c, n in zip(classes, counts):
        if n < k:
            raise ClassTooSmall(int(c), int(n), k)
    rng = np.random.default_rng(seed)
    assignments = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for c in classes:
        rows = rng.permutation(np.flatnonzero(labels == c))
        assignments[rows] = (offset + np.arange(rows.size)) % k
        offset = (offset + rows.size) % k
    return FoldPlan(int(k), assignments, seed)


@dataclass
class CVResult:
    fold_accuracies: list
    confusion: np.ndarray

    @property
    def mean_accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.confusion.sum())


def confusion_matrix(truth, predicted, class_count: int = N_CLASSES) -> np.ndarray:
    m = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(m, (np.asarray(truth), np.asarray(predicted)), 1)
    return m


def cross_validate(
    dataset: Dataset,
    train_config: TrainConfig,
    k: int = 10,
    seed: int = 0,
    kind: str = "forest",
) -> CVResult:
    """Train on each fold's complement, score the held-out fold.

    Fold ``f`` trains with seed ``derive_seed(seed, f)``, so folds are
    independent units of work.
    """
    plan = stratified_kfold(dataset.labels, k, seed)
    confusion = np.zeros((dataset.class_count, dataset.class_count), dtype=np.int64)
    accuracies = []
    for fold in range(plan.k):
        train, test = plan.train_rows(fold), plan.test_rows(fold)
        config = train_config.replace(seed=derive_seed(seed, fold))
        model = fit(dataset.subset(train), kind, config)
        predicted = predict_many(model, dataset.features[test])[0]
        truth = dataset.labels[test]
        accuracies.append(float(np.mean(predicted == truth)))
        confusion += confusion_matrix(truth, predicted, dataset.class_count)
    return CVResult(accuracies, confusion)


@dataclass
class EvalRow:
    distance_m: float
    model_kind: str
    fold_accuracies: list
    confusion: list
    mean_accuracy: float = field(default=float("nan"))

    def __post_init__(self):
        conf = np.asarray(self.confusion, dtype=np.int64)
        self.confusion = conf.tolist()
        self.mean_accuracy = float(np.trace(conf) / conf.sum()) if conf.sum() else 0.0


@dataclass
class EvalReport:
    rows: list
    settings: dict = field(default_factory=dict)

    def cell(self, distance: float, kind: str) -> EvalRow:
        for row in self.rows:
            if row.model_kind == kind and np.isclose(row.distance_m, distance):
                return row
        raise KeyError((distance, kind))

    def distances(self) -> list[float]:
        seen = []
        for row in self.rows:
            if row.distance_m not in seen:
                seen.append(row.distance_m)
        return seen

    def kinds(self) -> list[str]:
        return [k for k in MODEL_KINDS if any(r.model_kind == k for r in self.rows)] + sorted(
            {r.model_kind for r in self.rows} - set(MODEL_KINDS)
        )

    def to_dict(self) -> dict:
        return {"format": REPORT_FORMAT, "settings": self.settings, "rows": [asdict(r) for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, obj) -> "EvalReport":
        if not isinstance(obj, dict) or "format" not in obj:
            raise SchemaViolation("report must be an object with a 'format' field")
        if obj["format"] != REPORT_FORMAT:
            raise UnknownVersion(f"unsupported report format {obj['format']!r}")
        try:
            rows = [
                EvalRow(r["distance_m"], r["model_kind"], list(r["fold_accuracies"]), r["confusion"])
                for r in obj["rows"]
            ]
        except (KeyError, TypeError) as exc:
            raise SchemaViolation(f"malformed report row: {exc}") from exc
        for raw, row in zip(obj["rows"], rows):
            if "mean_accuracy" in raw and abs(raw["mean_accuracy"] - row.mean_accuracy) > 1e-12:
                raise SchemaViolation("mean_accuracy disagrees with the confusion matrix")
        return cls(rows, dict(obj.get("settings", {})))

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"not valid JSON: {exc}") from exc


def evaluate_dataset(
    dataset: Dataset,
    distance: float,
    train_configs: Mapping[str, TrainConfig],
    k: int = 10,
    seed: int = 0,
) -> list[EvalRow]:
    rows = []
    for label, config in train_configs.items():
        result = cross_validate(dataset, config, k, seed, _KIND_NAMES.get(label, label))
        rows.append(EvalRow(float(distance), label, result.fold_accuracies, result.confusion))
    return rows


def distance_sweep(
    distances: Sequence[float] = DISTANCES,
    per_class_count: int = 100,
    channel_config_base: ChannelConfig = ChannelConfig(),
    train_configs: Optional[Mapping[str, TrainConfig]] = None,
    seed: int = 0,
    k: int = 10,
    options: WaveformOptions = WaveformOptions(),
    dsp_config: dsp.DspConfig = dsp.DspConfig(),
    tables: Optional[dict] = None,
) -> EvalReport:
    """Simulate, featurize and cross-validate each distance independently.

    ``tables``, when given, receives the per-distance ``FeatureTable`` so
    callers can persist intermediates.
    """
    if not distances:
        raise ValueError("distances must be non-empty")
    train_configs = dict(train_configs or default_train_configs())
    rows = []
    for distance in distances:
        table = simulate_features(distance, per_class_count, channel_config_base, seed, options, dsp_config)
        if tables is not None:
            tables[distance] = table
        rows.extend(evaluate_dataset(table.dataset, distance, train_configs, k, seed))
    settings = {
        "seed": seed,
        "k": k,
        "per_class_count": per_class_count,
        "distances": [float(d) for d in distances],
        "channel": asdict(channel_config_base),
        "waveform": asdict(options),
        "dsp": asdict(dsp_config),
        "train": {label: asdict(c) for label, c in train_configs.items()},
    }
    return EvalReport(rows, settings)


def format_distance(d: float) -> str:
    return f"{d:g}m"


def render_table(report: EvalReport) -> str:
    """Accuracy grid: one row per model kind, one column per distance."""
    distances = report.distances()
    kinds = report.kinds()
    header = [""] + [format_distance(d) for d in distances]
    lines = [header]
    for kind in kinds:
        cells = [kind]
        for d in distances:
            try:
                cells.append(f"{100 * report.cell(d, kind).mean_accuracy:.1f}%")
            except KeyError:
                cells.append("-")
        lines.append(cells)
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(row, widths)))
        for row in lines
    ) + "\n"


def render_report(report: EvalReport) -> tuple[str, str]:
    """(text table, JSON document)."""
    return render_table(report), report.to_json()


def accuracy_csv(report: EvalReport) -> str:
    lines = ["distance_m,model_kind,mean_accuracy," + ",".join(f"fold_{i}" for i in range(_max_folds(report)))]
    for row in report.rows:
        lines.append(
            ",".join([f"{row.distance_m:g}", row.model_kind, repr(row.mean_accuracy)] + [repr(a) for a in row.fold_accuracies])
        )
    return "\n".join(lines) + "\n"


def _max_folds(report: EvalReport) -> int:
    return max((len(r.fold_accuracies) for r in report.rows), default=0)


def calibrate_noise_sigma(
    lo: float = 0.005,
    hi: float = 0.1,
    target: float = 0.75,
    iterations: int = 6,
    per_class_count: int = 100,
    seed: int = 0,
    channel_base: ChannelConfig = ChannelConfig(),
    far: float = 1.5,
) -> tuple[float, float]:
    """Bisect noise_sigma so the mean DT/RF accuracy at ``far`` hits ``target``.

    Assumes accuracy falls monotonically with noise over [lo, hi]. Returns
    ``(sigma, accuracy_at_sigma)``.
    """
    def score(sigma: float) -> float:
        report = distance_sweep([far], per_class_count, channel_base.replace(noise_sigma=sigma), seed=seed)
        return float(np.mean([r.mean_accuracy for r in report.rows]))

    best = (hi, score(hi))
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        acc = score(mid)
        if abs(acc - target) < abs(best[1] - target):
            best = (mid, acc)
        if acc > target:
            lo = mid
        else:
            hi = mid
    return best
