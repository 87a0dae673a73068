import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from breathsim import evaluation as ev
from breathsim.channel import ChannelConfig
from breathsim.dataset import WaveformOptions
from breathsim.errors import ClassTooSmall, InvalidK
from breathsim.ml import Dataset, TrainConfig

FAST = {"DT": TrainConfig.for_tree(), "RF": TrainConfig.for_forest(n_trees=10)}


def test_balanced_folds_exact():
    labels = np.repeat(np.arange(8), 10)
    plan = ev.stratified_kfold(labels, 10, seed=3)
    for fold in range(10):
        assert sorted(labels[plan.test_rows(fold)].tolist()) == list(range(8))


def test_single_class_folds():
    plan = ev.stratified_kfold(np.zeros(100, dtype=int), 10, seed=0)
    assert np.all(np.bincount(plan.assignments) == 10)


@pytest.mark.parametrize("k", [1, 0, 2.5])
def test_invalid_k(k):
    with pytest.raises(InvalidK):
        ev.stratified_kfold(np.zeros(20, dtype=int), k)


def test_class_too_small():
    labels = np.array([0] * 20 + [3] * 4)
    with pytest.raises(ClassTooSmall) as err:
        ev.stratified_kfold(labels, 5)
    assert err.value.class_id == 3
    assert "ClassTooSmall" in str(err.value)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 7), min_size=1, max_size=8, unique=True), st.integers(2, 6), st.integers(0, 9), st.integers(0, 2**32))
def test_fold_plan_partition_and_balance(classes, k, extra, seed):
    rng = np.random.default_rng(seed)
    labels = np.concatenate([np.full(k + int(rng.integers(0, extra + 1)), c) for c in classes])
    rng.shuffle(labels)
    plan = ev.stratified_kfold(labels, k, seed)
    assert plan.assignments.shape == labels.shape
    assert set(plan.assignments.tolist()) == set(range(k))
    for c in classes:
        per_fold = np.bincount(plan.assignments[labels == c], minlength=k)
        assert per_fold.max() - per_fold.min() <= 1
    sizes = np.bincount(plan.assignments, minlength=k)
    assert sizes.max() - sizes.min() <= 1
    assert np.array_equal(plan.assignments, ev.stratified_kfold(labels, k, seed).assignments)


def test_cross_validate_perfect_feature():
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(8), 20)
    X = np.column_stack([labels.astype(float), rng.normal(size=(160, 3))])
    result = ev.cross_validate(Dataset(X, labels), TrainConfig.for_tree(), 10, seed=1, kind="tree")
    assert result.mean_accuracy == 1.0
    assert result.confusion.sum() == 160


def test_cross_validate_chance_level_with_shuffled_labels():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(160, 12))
    labels = np.repeat(np.arange(8), 20)
    accs = []
    for rep in range(10):
        shuffled = rng.permutation(labels)
        accs.append(ev.cross_validate(Dataset(X, shuffled), TrainConfig.for_tree(), 10, seed=rep, kind="tree").mean_accuracy)
    assert abs(np.mean(accs) - 0.125) <= 0.05


def test_pooled_confusion_matches_fold_accuracies():
    rng = np.random.default_rng(2)
    labels = np.repeat(np.arange(8), 13)
    X = rng.normal(size=(104, 4)) + labels[:, None] * 0.3
    result = ev.cross_validate(Dataset(X, labels), TrainConfig.for_forest(n_trees=5), 10, seed=4)
    plan = ev.stratified_kfold(labels, 10, 4)
    sizes = np.array([plan.test_rows(f).size for f in range(10)])
    weighted = np.dot(result.fold_accuracies, sizes) / sizes.sum()
    assert result.mean_accuracy == pytest.approx(weighted, abs=1e-12)
    assert result.confusion.sum() == 104
    assert np.array_equal(result.confusion.sum(axis=1), np.bincount(labels, minlength=8))


@pytest.fixture(scope="module")
def small_report():
    return ev.distance_sweep([0.5, 1.5], per_class_count=10, train_configs=FAST, seed=3)


def test_sweep_rows_and_invariants(small_report):
    assert len(small_report.rows) == 4
    assert [(r.distance_m, r.model_kind) for r in small_report.rows] == [
        (0.5, "DT"), (0.5, "RF"), (1.5, "DT"), (1.5, "RF")
    ]
    for row in small_report.rows:
        conf = np.array(row.confusion)
        assert conf.shape == (8, 8)
        assert np.all(conf.sum(axis=1) == 10)
        assert row.mean_accuracy == pytest.approx(np.trace(conf) / conf.sum(), abs=1e-12)
        assert len(row.fold_accuracies) == 10


def test_sweep_is_byte_deterministic(small_report):
    again = ev.distance_sweep([0.5, 1.5], per_class_count=10, train_configs=FAST, seed=3)
    assert again.to_json() == small_report.to_json()


def test_report_json_round_trip(small_report):
    back = ev.EvalReport.from_json(small_report.to_json())
    assert back.to_json() == small_report.to_json()
    assert json.loads(small_report.to_json())["format"] == "breathsim-report-v1"


def test_render_table_layout():
    conf = np.diag([10] * 8)
    half = np.diag([10] * 8)
    half[0, 0], half[0, 1] = 0, 10
    rows = [
        ev.EvalRow(0.5, "DT", [1.0], conf), ev.EvalRow(0.5, "RF", [1.0], conf),
        ev.EvalRow(1.0, "DT", [0.9], half), ev.EvalRow(1.0, "RF", [1.0], conf),
    ]
    text = ev.render_table(ev.EvalReport(rows))
    lines = text.strip().splitlines()
    assert len(lines) == 3
    assert lines[0].split() == ["0.5m", "1m"]
    assert lines[1].split() == ["DT", "100.0%", "87.5%"]
    assert lines[2].split() == ["RF", "100.0%", "100.0%"]


def test_percent_formatting_matches_table_style():
    conf = np.zeros((8, 8), dtype=int)
    conf[0, 0], conf[0, 1] = 966, 34
    text = ev.render_table(ev.EvalReport([ev.EvalRow(0.5, "DT", [0.966], conf)]))
    assert "96.6%" in text


def test_noiseless_small_sweep_is_separable():
    quiet = ChannelConfig(noise_sigma=0.0, drift_amplitude=0.0)
    report = ev.distance_sweep(
        [1.5], per_class_count=15, channel_config_base=quiet, train_configs=FAST, seed=1,
        k=5, options=WaveformOptions(period_jitter=0.0, amplitude_jitter=0.0),
    )
    for row in report.rows:
        # small training folds; the full-size ablation lives in test_acceptance
        assert row.mean_accuracy >= 0.9
