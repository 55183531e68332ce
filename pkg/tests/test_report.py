import json

import numpy as np
import pytest

from maskgrad import (AttackConfig, AttributionResult, Mlp, RngStream,
                      attack_confusion, emit_report, global_importance,
                      predict_classes, run_attack, select_attack_rows,
                      success_rate, sweep_features)
from maskgrad.attack import AdversarialBatch
from maskgrad.report import read_sweep_csv, write_sweep_csv


def identity_model(d=3):
    return Mlp([np.eye(d) * 10.0], [np.zeros(d)])


def batch_from(x_adv, target, true_labels=None, x_original=None):
    x_adv = np.asarray(x_adv, dtype=np.float64)
    config = AttackConfig(method="fgsm", norm="l2", epsilon=1.0,
                          target_class=target,
                          feature_mask=tuple(range(x_adv.shape[1])))
    return AdversarialBatch(
        x_original=x_adv if x_original is None else x_original,
        x_adv=x_adv,
        true_labels=None if true_labels is None else np.asarray(true_labels),
        target_class=target,
        perturbation_norms=np.zeros(len(x_adv)),
        config=config, n_grad_evals=1)


def test_success_rate_saturated():
    net = identity_model()
    rows = np.tile([0.0, 5.0, 0.0], (4, 1))
    assert success_rate(net, batch_from(rows, target=1)) == 1.0


def test_success_rate_hand_labeled_fixture():
    net = identity_model()
    hit = [0.0, 5.0, 0.0]
    miss = [5.0, 0.0, 0.0]
    rows = np.array([hit, hit, hit, miss, miss])
    assert success_rate(net, batch_from(rows, target=1)) == 0.6


def test_success_rate_empty_batch_rejected():
    net = identity_model()
    with pytest.raises(ValueError):
        success_rate(net, batch_from(np.zeros((0, 3)), target=0))


def test_zero_epsilon_reduces_to_clean_rate():
    net = Mlp.initialize(4, (8,), 3, rng=RngStream(1, "init"))
    X = RngStream(1, "x").standard_normal(160).reshape(40, 4)
    labels = predict_classes(net, X)
    rows = select_attack_rows(labels, target_class=2)
    config = AttackConfig(method="fgsm", norm="l2", epsilon=0.0, step_size=0.0,
                          target_class=2, feature_mask=(0, 1, 2, 3))
    batch = run_attack(net, X[rows], config, true_labels=labels[rows])
    clean_rate = float(np.mean(predict_classes(net, X[rows]) == 2))
    assert success_rate(net, batch) == clean_rate
    assert clean_rate == 0.0  # target rows were excluded


def test_attack_confusion_perfect_targeting_single_column():
    net = identity_model()
    rows = np.tile([0.0, 0.0, 5.0], (6, 1))
    batch = batch_from(rows, target=2, true_labels=[0, 0, 1, 1, 0, 1])
    confusion = attack_confusion(net, batch, n_classes=3)
    assert confusion[:, 2].sum() == 6
    assert confusion.sum() == 6
    assert np.all(confusion[:, :2] == 0)


def test_attack_confusion_recount_oracle():
    net = identity_model()
    rng = RngStream(2, "adv")
    rows = rng.standard_normal(60).reshape(20, 3)
    true = np.asarray(rng.integers(0, 3, 20))
    batch = batch_from(rows, target=1, true_labels=true)
    confusion = attack_confusion(net, batch, n_classes=3)
    predictions = predict_classes(net, rows)
    for t in range(3):
        for p in range(3):
            assert confusion[t, p] == int(np.sum((true == t) & (predictions == p)))


def test_attack_confusion_diagonal_for_clean_perfect_model():
    net = identity_model()
    rows = np.vstack([np.eye(3) * 5.0, np.eye(3) * 5.0])
    true = [0, 1, 2, 0, 1, 2]
    confusion = attack_confusion(net, batch_from(rows, 0, true), n_classes=3)
    assert np.array_equal(confusion, 2 * np.eye(3, dtype=int))


def test_success_rate_equals_target_column_share():
    net = identity_model()
    rng = RngStream(3, "adv")
    rows = rng.standard_normal(90).reshape(30, 3)
    true = np.asarray(rng.integers(0, 3, 30))
    batch = batch_from(rows, target=0, true_labels=true)
    confusion = attack_confusion(net, batch, n_classes=3)
    assert success_rate(net, batch) == confusion[:, 0].sum() / confusion.sum()


@pytest.fixture(scope="module")
def sweep_setup(trained_blob_model, blob_data):
    train, test = blob_data
    importance = global_importance(AttributionResult(
        phi=RngStream(4, "phi").standard_normal(
            6 * test.n_features * 5).reshape(6, test.n_features, 5),
        output_units=(0, 1, 2, 3, 4)))
    rows = select_attack_rows(test.labels, 0)
    X = test.features[rows]
    labels = test.labels[rows]
    base = {
        "fgsm": AttackConfig(method="fgsm", norm="l2", epsilon=1.0,
                             step_size=0.5, target_class=0, feature_mask=(0,)),
        "pgd": AttackConfig(method="pgd", norm="linf", epsilon=1.0,
                            step_size=0.5, max_iter=10, target_class=0,
                            feature_mask=(0,)),
    }
    return trained_blob_model, X, labels, base, importance


def test_sweep_row_structure(sweep_setup):
    model, X, labels, base, importance = sweep_setup
    result = sweep_features(model, X, base, importance, range(1, 6),
                            true_labels=labels)
    assert len(result.rows) == 10
    for method in ("fgsm", "pgd"):
        ks = [r.k for r in result.rows if r.method == method]
        assert ks == [1, 2, 3, 4, 5]
    assert all(0.0 <= r.success_rate <= 1.0 for r in result.rows)
    assert all(r.target_class == 0 for r in result.rows)


def test_sweep_full_width_equals_unmasked(sweep_setup):
    model, X, labels, base, importance = sweep_setup
    d = X.shape[1]
    result = sweep_features(model, X, base, importance, [d], true_labels=labels)
    from dataclasses import replace
    for row in result.rows:
        full = replace(base[row.method], feature_mask=tuple(range(d)))
        batch = run_attack(model, X, full)
        assert row.success_rate == success_rate(model, batch)


def test_sweep_rows_match_rerun_oracle(sweep_setup):
    model, X, labels, base, importance = sweep_setup
    from dataclasses import replace
    from maskgrad import top_k_features
    result = sweep_features(model, X, base, importance, [2, 4], true_labels=labels)
    for row in result.rows:
        config = replace(base[row.method],
                         feature_mask=tuple(top_k_features(importance, row.k)))
        batch = run_attack(model, X, config)
        assert success_rate(model, batch) == row.success_rate


def test_sweep_deterministic_and_worker_independent(sweep_setup, tmp_path):
    model, X, labels, base, importance = sweep_setup
    a = sweep_features(model, X, base, importance, range(1, 4))
    b = sweep_features(model, X, base, importance, range(1, 4))
    c = sweep_features(model, X, base, importance, range(1, 4), workers=3)
    assert a == b == c
    path_a = write_sweep_csv(tmp_path / "a.csv", a.rows)
    path_c = write_sweep_csv(tmp_path / "c.csv", c.rows)
    assert path_a.read_bytes() == path_c.read_bytes()


def test_sweep_csv_round_trip(tmp_path, sweep_setup):
    model, X, labels, base, importance = sweep_setup
    result = sweep_features(model, X, base, importance, [1, 3])
    path = write_sweep_csv(tmp_path / "sweep.csv", result.rows)
    back = read_sweep_csv(path)
    assert [(r.k, r.method, r.target_class) for r in back] == \
        [(r.k, r.method, r.target_class) for r in result.rows]
    for parsed, original in zip(back, result.rows):
        assert abs(parsed.success_rate - original.success_rate) < 1e-4


def test_emit_report_empty_sweep(tmp_path):
    written = emit_report(tmp_path / "report", {"note": "empty"})
    names = {p.name for p in written}
    assert {"summary.json", "metrics.csv", "sweep.csv", "grid.csv",
            "success_vs_k.svg"} <= names
    chart = (tmp_path / "report" / "success_vs_k.svg").read_text()
    assert "<line" in chart           # axes present
    assert "polyline" not in chart    # no series


def test_emit_report_summary_round_trips(tmp_path):
    summary = {"seed": 7, "rates": [0.25, 0.5], "nested": {"a": 1}}
    emit_report(tmp_path / "report", summary)
    parsed = json.loads((tmp_path / "report" / "summary.json").read_text())
    assert parsed == summary


def test_emit_report_heatmap_has_c_by_c_cells(tmp_path):
    confusion = np.arange(16).reshape(4, 4)
    emit_report(tmp_path / "report", {}, confusions={("pgd", "classA"): confusion},
                class_names=["a", "b", "c", "d"])
    heat = (tmp_path / "report" / "confusion_pgd_classA.svg").read_text()
    assert heat.count('class="cell"') == 16


def test_emit_report_byte_identical(tmp_path, sweep_setup):
    model, X, labels, base, importance = sweep_setup
    from maskgrad import metrics_from_confusion
    metrics = metrics_from_confusion([[5, 1], [0, 9]])
    sweep = sweep_features(model, X, base, importance, [1, 2]).rows
    kwargs = dict(
        summary={"seed": 1}, metrics=metrics, sweep_rows=sweep,
        grid_table=[{"method": "fgsm", "target_class": 0, "epsilon": 1.0,
                     "step_size": 0.5, "norm": "l2", "max_iter": None,
                     "success_rate": 0.5}],
        confusions={("fgsm", "x"): np.eye(2, dtype=int)},
        class_names=["neg", "pos"])
    a = emit_report(tmp_path / "r1", **kwargs)
    b = emit_report(tmp_path / "r2", **kwargs)
    for pa, pb in zip(sorted(a), sorted(b)):
        assert pa.read_bytes() == pb.read_bytes()


def test_rates_written_with_four_decimals(tmp_path):
    from maskgrad.report import SweepRow
    path = write_sweep_csv(tmp_path / "s.csv",
                           [SweepRow(k=1, method="fgsm", target_class=0,
                                     success_rate=1 / 3)])
    assert "0.3333" in path.read_text()
