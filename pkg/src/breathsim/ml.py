"""CART decision trees and random forests, Gini criterion, numpy only.

Trees route a sample left iff ``x[feature] <= threshold``. Leaves keep the
per-class training counts. Forest members are grown on bootstrap resamples
with a fresh random feature subset at every node; member ``t`` draws all its
randomness from ``SeedSequence([seed, t])`` so the ensemble does not depend
on the order in which members are built.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

from .errors import DimensionMismatch, EmptyDataset, EmptyNode, SchemaViolation, UnknownVersion

MODEL_FORMAT = "breathsim-model-v1"
N_CLASSES = 8
# Decreases closer than this are treated as ties.
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple = ()
    class_count: int = N_CLASSES

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[0] < 1:
            raise EmptyDataset(f"need an N x F matrix with N >= 1, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise DimensionMismatch(f"{X.shape[0]} rows but {y.shape} labels")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if y.size and (np.any(y != np.round(y)) or y.min() < 0 or y.max() >= self.class_count):
            raise ValueError(f"labels must be class ids in [0, {self.class_count})")
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DimensionMismatch(f"{len(names)} feature names for {X.shape[1]} columns")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y.astype(np.int64))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names, self.class_count)


@dataclass(frozen=True)
class Leaf:
    counts: tuple

    @property
    def majority(self) -> int:
        return int(np.argmax(self.counts))


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "Node"
    right: "Node"


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class TrainConfig:
    max_depth: Optional[int] = 12
    min_samples_split: int = 2
    min_impurity_decrease: float = 0.0
    n_trees: int = 100
    features_per_split: Union[str, int] = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1 (or None for unlimited)")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_impurity_decrease < 0:
            raise ValueError("min_impurity_decrease must be >= 0")
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        fps = self.features_per_split
        if isinstance(fps, str):
            if fps not in ("sqrt", "all"):
                raise ValueError(f"features_per_split must be 'sqrt', 'all' or an integer, got {fps!r}")
        elif int(fps) != fps or fps < 1:
            raise ValueError(f"features_per_split must be >= 1, got {fps}")

    @classmethod
    def for_tree(cls, **overrides) -> "TrainConfig":
        base = dict(n_trees=1, features_per_split="all", bootstrap=False)
        return cls(**{**base, **overrides})

    @classmethod
    def for_forest(cls, **overrides) -> "TrainConfig":
        return cls(**overrides)

    def resolve_features(self, n_features: int) -> int:
        fps = self.features_per_split
        if fps == "all":
            m = n_features
        elif fps == "sqrt":
            m = int(math.isqrt(n_features))
        else:
            m = int(fps)
        if not 1 <= m <= n_features:
            raise ValueError(f"features_per_split resolves to {m}, outside [1, {n_features}]")
        return m

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class TreeModel:
    root: Node
    config: TrainConfig
    feature_names: tuple
    class_count: int = N_CLASSES
    kind: str = field(default="tree", init=False)


@dataclass(frozen=True)
class ForestModel:
    trees: tuple
    config: TrainConfig
    feature_names: tuple
    class_count: int = N_CLASSES
    kind: str = field(default="forest", init=False)


class SplitChoice(NamedTuple):
    feature: int
    threshold: float
    decrease: float


def gini(class_counts) -> float:
    counts = np.asarray(class_counts, dtype=float)
    n = counts.sum()
    if n <= 0:
        raise EmptyNode("gini of an empty node")
    return float(1.0 - np.sum((counts / n) ** 2))


def _midpoint(a: float, b: float) -> float:
    mid = (a + b) / 2
    # a and b adjacent floats: the midpoint may round up onto b
    return mid if mid < b else a


def best_split(
    dataset: Dataset,
    row_indices,
    candidate_features: Sequence[int],
    min_impurity_decrease: float = 0.0,
    allow_zero_gain: bool = False,
) -> Optional[SplitChoice]:
    """Exhaustive midpoint search maximizing the Gini decrease.

    Every candidate feature is evaluated in one vectorized pass. Ties go to
    the lowest feature index, then the lowest threshold. Returns None when no
    split has a positive decrease, unless ``allow_zero_gain`` is set (the
    tree grower uses this to get past XOR-like nodes).
    """
    rows = np.asarray(row_indices)
    feats = np.asarray(candidate_features, dtype=np.int64)
    n = rows.size
    if n < 2 or feats.size == 0:
        return None
    y = dataset.labels[rows]
    C = dataset.class_count
    total = np.bincount(y, minlength=C)
    if np.count_nonzero(total) < 2:
        return None

    X = dataset.features[rows][:, feats]
    order = np.argsort(X, axis=0, kind="stable")
    cols = np.arange(feats.size)
    xs = X[order, cols]
    left = np.cumsum(y[order][:, :, None] == np.arange(C), axis=0, dtype=np.int64)[:-1]
    sq_left = (left * left).sum(axis=2)
    total_sq = int(total @ total)
    sq_right = total_sq - 2 * (left @ total) + sq_left
    n_left = np.arange(1, n, dtype=float)[:, None]
    decrease = (sq_left / n_left + sq_right / (n - n_left)) / n - total_sq / (n * n)
    decrease[xs[1:] <= xs[:-1]] = -np.inf

    best = decrease.max()
    if best == -np.inf or best < min_impurity_decrease:
        return None
    if best <= TIE_TOLERANCE and not allow_zero_gain:
        return None
    near = decrease >= best - TIE_TOLERANCE
    tied = np.flatnonzero(near.any(axis=0))
    col = int(tied[np.argmin(feats[tied])])
    i = int(np.argmax(near[:, col]))
    threshold = _midpoint(float(xs[i, col]), float(xs[i + 1, col]))
    return SplitChoice(int(feats[col]), threshold, float(decrease[i, col]))


def train_tree(
    dataset: Dataset,
    config: Optional[TrainConfig] = None,
    row_indices=None,
    rng: Optional[np.random.Generator] = None,
) -> Node:
    """Grow one CART tree over ``row_indices`` (all rows by default)."""
    config = config or TrainConfig.for_tree()
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    rows = np.arange(len(dataset)) if row_indices is None else np.asarray(row_indices)
    if rows.size == 0:
        raise EmptyDataset("no training rows")
    n_feat = dataset.n_features
    m = config.resolve_features(n_feat)
    if m < n_feat and rng is None:
        rng = np.random.default_rng(config.seed)
    all_features = np.arange(n_feat)

    def grow(rows: np.ndarray, depth: int) -> Node:
        counts = np.bincount(dataset.labels[rows], minlength=dataset.class_count)
        choice = None
        if (
            rows.size >= config.min_samples_split
            and (config.max_depth is None or depth < config.max_depth)
            and np.count_nonzero(counts) > 1
        ):
            feats = all_features if m == n_feat else rng.choice(n_feat, size=m, replace=False)
            choice = best_split(
                dataset, rows, feats, config.min_impurity_decrease, config.min_impurity_decrease == 0
            )
        if choice is None:
            return Leaf(tuple(counts.tolist()))
        goes_left = dataset.features[rows, choice.feature] <= choice.threshold
        return Split(
            choice.feature,
            choice.threshold,
            grow(rows[goes_left], depth + 1),
            grow(rows[~goes_left], depth + 1),
        )

    return grow(rows, 0)


def fit_tree(dataset: Dataset, config: Optional[TrainConfig] = None) -> TreeModel:
    config = config or TrainConfig.for_tree()
    root = train_tree(dataset, config)
    return TreeModel(root, config, dataset.feature_names, dataset.class_count)


def _grow_member(dataset: Dataset, config: TrainConfig, index: int) -> Node:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, index]))
    n = len(dataset)
    rows = rng.integers(0, n, size=n) if config.bootstrap else np.arange(n)
    return train_tree(dataset, config, rows, rng)


def train_forest(dataset: Dataset, config: Optional[TrainConfig] = None, n_jobs: int = 1) -> ForestModel:
    config = config or TrainConfig.for_forest()
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    config.resolve_features(dataset.n_features)
    if n_jobs == 1:
        trees = [_grow_member(dataset, config, t) for t in range(config.n_trees)]
    else:
        from joblib import Parallel, delayed

        trees = Parallel(n_jobs=n_jobs)(
            delayed(_grow_member)(dataset, config, t) for t in range(config.n_trees)
        )
    return ForestModel(tuple(trees), config, dataset.feature_names, dataset.class_count)


def fit(dataset: Dataset, kind: str, config: Optional[TrainConfig] = None, n_jobs: int = 1):
    if kind in ("tree", "dt"):
        return fit_tree(dataset, config)
    if kind in ("forest", "rf"):
        return train_forest(dataset, config, n_jobs=n_jobs)
    raise ValueError(f"unknown model kind {kind!r}")


# -- prediction ---------------------------------------------------------------


def _leaf_counts(node: Node, X: np.ndarray, rows: np.ndarray, out: np.ndarray) -> None:
    if isinstance(node, Leaf):
        out[rows] = node.counts
        return
    goes_left = X[rows, node.feature] <= node.threshold
    if goes_left.any():
        _leaf_counts(node.left, X, rows[goes_left], out)
    if not goes_left.all():
        _leaf_counts(node.right, X, rows[~goes_left], out)


def _check_width(model, X: np.ndarray) -> None:
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise DimensionMismatch(
            f"model expects {len(model.feature_names)} features, got shape {X.shape}"
        )


def tree_counts(root: Node, X: np.ndarray, class_count: int = N_CLASSES) -> np.ndarray:
    out = np.zeros((X.shape[0], class_count))
    if X.shape[0]:
        _leaf_counts(root, X, np.arange(X.shape[0]), out)
    return out


def predict_many(model, X) -> tuple[np.ndarray, np.ndarray]:
    """Classes and per-class scores for every row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_width(model, X)
    if isinstance(model, TreeModel):
        counts = tree_counts(model.root, X, model.class_count)
        scores = counts / counts.sum(axis=1, keepdims=True)
    elif isinstance(model, ForestModel):
        votes = np.zeros((X.shape[0], model.class_count))
        rows = np.arange(X.shape[0])
        for root in model.trees:
            votes[rows, tree_counts(root, X, model.class_count).argmax(axis=1)] += 1
        scores = votes / len(model.trees)
    else:
        raise TypeError(f"not a model: {type(model).__name__}")
    # argmax returns the first maximum, i.e. ties resolve to the lowest class id
    return scores.argmax(axis=1), scores


def predict(model, feature_vector) -> tuple[int, np.ndarray]:
    x = np.asarray(feature_vector, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected one feature vector, got shape {x.shape}")
    classes, scores = predict_many(model, x[None, :])
    return int(classes[0]), scores[0]


def accuracy(model, dataset: Dataset) -> float:
    return float(np.mean(predict_many(model, dataset.features)[0] == dataset.labels))


def iter_nodes(node: Node):
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        if isinstance(current, Split):
            stack.extend((current.right, current.left))


def depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(depth(node.left), depth(node.right))


# -- serialization ------------------------------------------------------------


def _node_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"counts": list(node.counts)}
    return {"f": node.feature, "t": node.threshold, "l": _node_to_dict(node.left), "r": _node_to_dict(node.right)}


def model_to_dict(model) -> dict:
    roots = [model.root] if isinstance(model, TreeModel) else list(model.trees)
    return {
        "format": MODEL_FORMAT,
        "kind": model.kind,
        "config": dataclasses.asdict(model.config),
        "feature_names": list(model.feature_names),
        "class_count": model.class_count,
        "trees": [_node_to_dict(r) for r in roots],
    }


def serialize_model(model) -> str:
    return json.dumps(model_to_dict(model), separators=(",", ":"))


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _node_from_dict(obj, n_features: int, class_count: int, path: str) -> Node:
    if not isinstance(obj, dict):
        raise SchemaViolation(f"{path}: node must be an object")
    if set(obj) == {"counts"}:
        counts = obj["counts"]
        if (
            not isinstance(counts, list)
            or len(counts) != class_count
            or not all(_is_int(c) and c >= 0 for c in counts)
            or sum(counts) < 1
        ):
            raise SchemaViolation(f"{path}: leaf counts must be {class_count} non-negative ints summing to >= 1")
        return Leaf(tuple(counts))
    if set(obj) == {"f", "t", "l", "r"}:
        f, t = obj["f"], obj["t"]
        if not _is_int(f) or not 0 <= f < n_features:
            raise SchemaViolation(f"{path}: feature index {f!r} outside [0, {n_features})")
        if isinstance(t, bool) or not isinstance(t, (int, float)) or not math.isfinite(t):
            raise SchemaViolation(f"{path}: threshold must be a finite number")
        return Split(
            f,
            float(t),
            _node_from_dict(obj["l"], n_features, class_count, path + ".l"),
            _node_from_dict(obj["r"], n_features, class_count, path + ".r"),
        )
    raise SchemaViolation(f"{path}: unrecognized node keys {sorted(obj)}")


def model_from_dict(obj) -> Union[TreeModel, ForestModel]:
    if not isinstance(obj, dict):
        raise SchemaViolation("model document must be a JSON object")
    if obj.get("format") != MODEL_FORMAT:
        if "format" not in obj:
            raise SchemaViolation("missing 'format' field")
        raise UnknownVersion(f"unsupported model format {obj.get('format')!r}")
    expected = {"format", "kind", "config", "feature_names", "class_count", "trees"}
    if set(obj) != expected:
        raise SchemaViolation(f"model keys must be {sorted(expected)}, got {sorted(obj)}")
    kind = obj["kind"]
    if kind not in ("tree", "forest"):
        raise SchemaViolation(f"unknown model kind {kind!r}")
    names = obj["feature_names"]
    if not isinstance(names, list) or not names or not all(isinstance(n, str) for n in names):
        raise SchemaViolation("feature_names must be a non-empty list of strings")
    class_count = obj["class_count"]
    if not _is_int(class_count) or class_count < 1:
        raise SchemaViolation("class_count must be a positive integer")
    try:
        config = TrainConfig(**obj["config"])
    except (TypeError, ValueError) as exc:
        raise SchemaViolation(f"invalid config: {exc}") from exc
    trees = obj["trees"]
    if not isinstance(trees, list):
        raise SchemaViolation("trees must be a list")
    roots = tuple(
        _node_from_dict(t, len(names), class_count, f"trees[{i}]") for i, t in enumerate(trees)
    )
    if kind == "tree":
        if len(roots) != 1:
            raise SchemaViolation("a tree model holds exactly one tree")
        return TreeModel(roots[0], config, tuple(names), class_count)
    if len(roots) != config.n_trees:
        raise SchemaViolation(f"forest declares {config.n_trees} trees but holds {len(roots)}")
    return ForestModel(roots, config, tuple(names), class_count)


def deserialize_model(text: str) -> Union[TreeModel, ForestModel]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"not valid JSON: {exc}") from exc
    return model_from_dict(obj)
