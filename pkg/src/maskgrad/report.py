"""Attack evaluation: success rates, confusions, top-k sweeps, report files."""

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import svg
from .attack import run_attack
from .explain import top_k_features
from .metrics import confusion_matrix
from .network import as_network, predict_classes
from .parallel import parallel_map

RATE_DECIMALS = 4


def success_rate(model, batch):
    """Fraction of adversarial rows the model assigns to the target class."""
    if batch.x_adv.shape[0] == 0:
        raise ValueError("batch is empty")
    predictions = predict_classes(model, batch.x_adv)
    return float(np.mean(predictions == batch.target_class))


def attack_confusion(model, batch, n_classes=None):
    """Confusion of true labels (rows) vs predictions on adversarial rows."""
    if batch.true_labels is None:
        raise ValueError("batch carries no true labels")
    if n_classes is None:
        n_classes = as_network(model).output_dim
    predictions = predict_classes(model, batch.x_adv)
    return confusion_matrix(batch.true_labels, predictions, n_classes)


@dataclass
class SweepRow:
    k: int
    method: str
    target_class: int
    success_rate: float


@dataclass
class SweepResult:
    rows: list
    k_values: tuple


def sweep_features(model, X, base_configs, importance, k_values,
                   true_labels=None, rng=None, workers=1):
    """Success rate per (k, method) with the mask set to the top-k features.

    ``base_configs`` maps method name to its AttackConfig; only the mask is
    replaced per cell. Cells run independently and merge in (k, method)
    order, so the result is the same for any worker count.
    """
    k_values = tuple(sorted(set(int(k) for k in k_values)))
    if not k_values:
        raise ValueError("k_values must be non-empty")
    methods = sorted(base_configs)
    jobs = [(k, method) for k in k_values for method in methods]

    def run_cell(job):
        k, method = job
        config = replace(base_configs[method], feature_mask=tuple(top_k_features(importance, k)))
        cell_rng = rng.child(f"sweep/{method}/k={k}") if rng is not None else None
        batch = run_attack(model, X, config, true_labels=true_labels, rng=cell_rng)
        return SweepRow(k=k, method=method, target_class=config.target_class,
                        success_rate=success_rate(model, batch))

    rows = parallel_map(run_cell, jobs, workers=workers)
    return SweepResult(rows=rows, k_values=k_values)


def _fmt_rate(value):
    return f"{value:.{RATE_DECIMALS}f}"


def write_sweep_csv(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "method", "target_class", "success_rate"])
        for row in rows:
            writer.writerow([row.k, row.method, row.target_class,
                             _fmt_rate(row.success_rate)])
    return path


def read_sweep_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for rec in reader:
            rows.append(SweepRow(k=int(rec["k"]), method=rec["method"],
                                 target_class=int(rec["target_class"]),
                                 success_rate=float(rec["success_rate"])))
    return rows


def read_grid_csv(path):
    table = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        for rec in reader:
            table.append({
                "method": rec["method"],
                "target_class": int(rec["target_class"]) if rec["target_class"] else None,
                "epsilon": float(rec["epsilon"]),
                "step_size": float(rec["step_size"]),
                "norm": rec["norm"],
                "max_iter": int(rec["max_iter"]) if rec["max_iter"] else None,
                "success_rate": float(rec["success_rate"]),
            })
    return table


def write_grid_csv(path, table):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["method", "target_class", "epsilon", "step_size",
                         "norm", "max_iter", "success_rate"])
        for rec in table:
            writer.writerow([
                rec["method"], rec.get("target_class", ""), rec["epsilon"],
                rec["step_size"], rec["norm"],
                "" if rec["max_iter"] is None else rec["max_iter"],
                _fmt_rate(rec["success_rate"]),
            ])
    return path


def write_metrics_csv(path, metrics, class_names):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["class", "precision", "recall", "f1", "support"])
        if metrics is not None:
            for c, name in enumerate(class_names):
                writer.writerow([
                    name,
                    _fmt_rate(metrics.per_class_precision[c]),
                    _fmt_rate(metrics.per_class_recall[c]),
                    _fmt_rate(metrics.per_class_f1[c]),
                    int(metrics.support[c]),
                ])
            writer.writerow(["weighted", _fmt_rate(metrics.precision),
                             _fmt_rate(metrics.recall), _fmt_rate(metrics.f1),
                             int(metrics.support.sum())])
    return path


def _sweep_chart(rows, class_names):
    grouped = {}
    for row in rows:
        name = class_names[row.target_class] if class_names else str(row.target_class)
        grouped.setdefault((row.method, name), []).append((row.k, row.success_rate))
    series = [
        (f"{method} -> {target}", sorted(points))
        for (method, target), points in sorted(grouped.items())
    ]
    return svg.line_chart(series, title="Targeted success rate vs. masked features",
                          x_label="top-k features perturbed", y_label="success rate")


def emit_report(out_dir, summary, metrics=None, sweep_rows=None, grid_table=None,
                confusions=None, class_names=None):
    """Write the report bundle; identical inputs give identical bytes.

    confusions maps (method, target_name) to a confusion matrix.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    written.append(summary_path)

    written.append(write_metrics_csv(out_dir / "metrics.csv", metrics, class_names or ()))
    written.append(write_sweep_csv(out_dir / "sweep.csv", sweep_rows or []))
    written.append(write_grid_csv(out_dir / "grid.csv", grid_table or []))

    chart_path = out_dir / "success_vs_k.svg"
    chart_path.write_text(_sweep_chart(sweep_rows or [], class_names), encoding="utf-8")
    written.append(chart_path)

    for (method, target_name), matrix in sorted((confusions or {}).items()):
        safe_target = str(target_name).replace(" ", "_").replace("/", "_")
        path = out_dir / f"confusion_{method}_{safe_target}.svg"
        labels = list(class_names) if class_names else [str(i) for i in range(len(matrix))]
        path.write_text(
            svg.heatmap(np.asarray(matrix).tolist(), labels, labels,
                        title=f"{method} targeting {target_name}"),
            encoding="utf-8",
        )
        written.append(path)
    return written
