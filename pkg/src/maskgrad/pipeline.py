"""Stage orchestration: artifact layout, prerequisites, resumable stamps.

Stage chain for ``all``: synth (when the source is synthetic), train,
explain, attack, sweep, report. Each stage writes its artifacts under the
output directory plus a stamp hashing the configuration slice it depends
on; re-running a completed stage with an identical configuration is a
no-op unless forced. The grid stage is run explicitly.
"""

import csv
import hashlib
import json
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from .attack import AttackConfig, grid_search, run_attack, select_attack_rows
from .config import per_class_counts
from .data import (LabeledDataset, load_csv, save_csv, stratified_split,
                   synth_dataset, write_sidecar)
from .errors import ConfigError, PrerequisiteError
from .explain import (DeepShapExplainer, GlobalImportance, global_importance,
                      select_background, top_k_features)
from .metrics import evaluate_classifier, metrics_from_confusion
from .model import MlpClassifier, load_checkpoint, save_checkpoint
from .numerics import RngStream
from .preprocessing import Standardizer, smote_balance
from . import report as report_mod
from . import svg

STAGES = ("synth", "train", "explain", "attack", "grid", "sweep", "report")

_SYNTH_FIELDS = ("seed", "source", "n_classes", "n_features", "n_per_class", "spread")
_TRAIN_FIELDS = _SYNTH_FIELDS + (
    "csv_path", "label_column", "drop_columns", "train_fraction",
    "smote", "smote_k", "smote_target", "smote_before_split",
    "hidden_dims", "dropout_rate", "dropout_after", "epochs", "batch_size",
    "learning_rate", "optimizer",
)
_EXPLAIN_FIELDS = _TRAIN_FIELDS + (
    "background_size", "explained_size", "shap_target", "aggregate",
)
_ATTACK_FIELDS = _EXPLAIN_FIELDS + (
    "target_classes", "fgsm_epsilon", "fgsm_step_size", "fgsm_norm",
    "pgd_epsilon", "pgd_step_size", "pgd_norm", "pgd_max_iter",
    "clip", "include_target_class", "random_start", "sample_cap", "sweep_k",
)
_GRID_FIELDS = _EXPLAIN_FIELDS + (
    "target_classes", "clip", "include_target_class", "random_start",
    "grid_epsilons", "grid_step_sizes", "grid_norms", "grid_max_iters",
    "grid_tuning_size", "sweep_k",
)
_STAGE_FIELDS = {
    "synth": _SYNTH_FIELDS,
    "train": _TRAIN_FIELDS,
    "explain": _EXPLAIN_FIELDS,
    "attack": _ATTACK_FIELDS,
    "grid": _GRID_FIELDS,
    "sweep": _ATTACK_FIELDS,
    "report": _ATTACK_FIELDS + _GRID_FIELDS,
}


def _safe_name(name):
    return str(name).replace(" ", "_").replace("/", "_")


class Pipeline:
    def __init__(self, cfg, out_dir, force=False):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.force = force
        self.timings = {}

    # ---- artifact paths -------------------------------------------------

    @property
    def raw_csv(self):
        return self.out / "data" / "raw.csv"

    @property
    def train_csv(self):
        return self.out / "data" / "train.csv"

    @property
    def test_csv(self):
        return self.out / "data" / "test.csv"

    @property
    def meta_json(self):
        return self.out / "data" / "meta.json"

    @property
    def checkpoint_path(self):
        return self.out / "model" / "checkpoint.json"

    @property
    def metrics_json(self):
        return self.out / "model" / "metrics.json"

    @property
    def importance_json(self):
        return self.out / "explain" / "importance.json"

    @property
    def results_json(self):
        return self.out / "attack" / "results.json"

    @property
    def grid_csv(self):
        return self.out / "grid" / "grid.csv"

    @property
    def sweep_csv(self):
        return self.out / "sweep" / "sweep.csv"

    @property
    def report_dir(self):
        return self.out / "report"

    # ---- stamps ----------------------------------------------------------

    def _stage_hash(self, stage):
        payload = {name: getattr(self.cfg, name) for name in _STAGE_FIELDS[stage]}
        canonical = json.dumps(payload, sort_keys=True, default=list)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def _stamp_path(self, stage):
        return self.out / "stamps" / f"{stage}.json"

    def _is_current(self, stage, artifacts):
        if self.force:
            return False
        stamp = self._stamp_path(stage)
        if not stamp.exists():
            return False
        try:
            recorded = json.loads(stamp.read_text(encoding="utf-8")).get("hash")
        except (OSError, json.JSONDecodeError):
            return False
        return recorded == self._stage_hash(stage) and all(
            Path(p).exists() for p in artifacts
        )

    def _write_stamp(self, stage):
        path = self._stamp_path(stage)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"hash": self._stage_hash(stage)}) + "\n",
                        encoding="utf-8")

    def _require(self, path, stage, producer):
        if not Path(path).exists():
            raise PrerequisiteError(
                f"{stage}: missing {Path(path).relative_to(self.out)}; "
                f"run `maskgrad {producer}` first"
            )

    # ---- shared loading --------------------------------------------------

    def _meta(self):
        return json.loads(self.meta_json.read_text(encoding="utf-8"))

    def _load_canonical(self, path):
        """Load a persisted split with the canonical class order from meta."""
        meta = self._meta()
        ds = load_csv(path, meta["label_column"])
        canonical = meta["class_names"]
        mapping = {name: i for i, name in enumerate(canonical)}
        relabeled = np.asarray([mapping[ds.class_names[l]] for l in ds.labels],
                               dtype=np.int64)
        return LabeledDataset(ds.features, relabeled, tuple(canonical),
                              ds.feature_names)

    def _load_importance(self):
        payload = json.loads(self.importance_json.read_text(encoding="utf-8"))
        return GlobalImportance(
            class_scores=np.asarray(payload["class_scores"]),
            overall=np.asarray(payload["overall"]),
            ranking=np.asarray(payload["ranking"], dtype=np.int64),
            aggregate=payload["aggregate"],
        )

    def _target_indices(self, class_names):
        targets = self.cfg.target_classes or tuple(class_names[:2])
        indices = []
        for name in targets:
            if name not in class_names:
                raise ConfigError(
                    f"target class {name!r} not among classes {list(class_names)}"
                )
            indices.append(class_names.index(name))
        return list(dict.fromkeys(indices))

    def _clip_bounds(self, train_features):
        if not self.cfg.clip:
            return None, None
        return (tuple(train_features.min(axis=0)), tuple(train_features.max(axis=0)))

    def _eligible_rows(self, labels, target_index, target_name):
        rows = select_attack_rows(labels, target_index,
                                  self.cfg.include_target_class)
        cap = self.cfg.sample_cap
        if cap is not None and len(rows) > cap:
            stream = RngStream(self.cfg.seed, f"attack-cap/{target_name}")
            rows = rows[np.sort(stream.choice(len(rows), cap, replace=False))]
        return rows

    def _base_attack_config(self, method, target_index, mask, clip_min, clip_max):
        if method == "fgsm":
            return AttackConfig(
                method="fgsm", norm=self.cfg.fgsm_norm,
                epsilon=self.cfg.fgsm_epsilon, step_size=self.cfg.fgsm_step_size,
                target_class=target_index, feature_mask=mask,
                clip_min=clip_min, clip_max=clip_max,
            )
        return AttackConfig(
            method="pgd", norm=self.cfg.pgd_norm,
            epsilon=self.cfg.pgd_epsilon, step_size=self.cfg.pgd_step_size,
            max_iter=self.cfg.pgd_max_iter, target_class=target_index,
            feature_mask=mask, clip_min=clip_min, clip_max=clip_max,
            random_start=self.cfg.random_start,
        )

    # ---- stages ------------------------------------------------------------

    def run(self, stage):
        if stage == "all":
            return self.run_all()
        if stage not in STAGES:
            raise ConfigError(f"unknown stage {stage!r}")
        started = time.perf_counter()
        getattr(self, f"_stage_{stage}")()
        self.timings[stage] = time.perf_counter() - started
        return 0

    def run_all(self):
        stages = ["train", "explain", "attack", "sweep", "report"]
        if self.cfg.source == "synth":
            stages.insert(0, "synth")
        for stage in stages:
            self.run(stage)
        return 0

    def _skip(self, stage):
        print(f"[{stage}] up to date, skipping (use --force to rerun)")

    def _stage_synth(self):
        if self.cfg.source != "synth":
            raise ConfigError("the synth stage requires [data] source = synth")
        if self._is_current("synth", [self.raw_csv]):
            return self._skip("synth")
        cfg = self.cfg
        ds = synth_dataset(cfg.n_classes, cfg.n_features, per_class_counts(cfg),
                           cfg.spread, RngStream(cfg.seed, "synth"))
        save_csv(ds, self.raw_csv)
        self._write_stamp("synth")
        print(f"[synth] wrote {ds.n_samples} rows x {ds.n_features} features "
              f"to {self.raw_csv}")

    def _stage_train(self):
        artifacts = [self.train_csv, self.test_csv, self.meta_json,
                     self.checkpoint_path, self.metrics_json]
        if self._is_current("train", artifacts):
            return self._skip("train")
        cfg = self.cfg
        if cfg.source == "csv":
            source_path = Path(cfg.csv_path)
            if not source_path.exists():
                raise ConfigError(f"csv_path does not exist: {source_path}")
            label_column = cfg.label_column
        else:
            self._require(self.raw_csv, "train", "synth")
            source_path = self.raw_csv
            label_column = "label"
        ds = load_csv(source_path, label_column, cfg.drop_columns)

        if cfg.smote and cfg.smote_before_split:
            scaler = Standardizer().fit(ds.features)
            ds = ds.with_features(scaler.transform(ds.features))
            ds = smote_balance(ds, cfg.smote_k, cfg.smote_target,
                               RngStream(cfg.seed, "smote"))
            train, test = stratified_split(ds, cfg.train_fraction,
                                           RngStream(cfg.seed, "split"))
        else:
            train, test = stratified_split(ds, cfg.train_fraction,
                                           RngStream(cfg.seed, "split"))
            scaler = Standardizer().fit(train.features)
            train = train.with_features(scaler.transform(train.features))
            test = test.with_features(scaler.transform(test.features))
            if cfg.smote:
                train = smote_balance(train, cfg.smote_k, cfg.smote_target,
                                      RngStream(cfg.seed, "smote"))

        clf = MlpClassifier(
            hidden_dims=cfg.hidden_dims, dropout_rate=cfg.dropout_rate,
            dropout_after=cfg.dropout_after, epochs=cfg.epochs,
            batch_size=cfg.batch_size, learning_rate=cfg.learning_rate,
            optimizer=cfg.optimizer, seed=cfg.seed,
        )
        clf.fit(train.features, train.labels)
        metrics = evaluate_classifier(clf, test.features, test.labels,
                                      n_classes=ds.n_classes)

        save_csv(train, self.train_csv)
        save_csv(test, self.test_csv)
        write_sidecar(self.meta_json, train, scaler=scaler, seed=cfg.seed)
        save_checkpoint(clf, self.checkpoint_path, class_names=ds.class_names,
                        feature_names=ds.feature_names, scaler=scaler)
        payload = {"class_names": list(ds.class_names)} | metrics.as_dict()
        self.metrics_json.write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self._write_stamp("train")
        print(f"[train] test accuracy {metrics.accuracy:.2f}% "
              f"({train.n_samples} train / {test.n_samples} test rows)")

    def _stage_explain(self):
        artifacts = [self.importance_json, self.out / "explain" / "ranking.csv"]
        if self._is_current("explain", artifacts):
            return self._skip("explain")
        self._require(self.checkpoint_path, "explain", "train")
        self._require(self.train_csv, "explain", "train")
        self._require(self.test_csv, "explain", "train")
        cfg = self.cfg
        clf, _ = load_checkpoint(self.checkpoint_path)
        train = self._load_canonical(self.train_csv)
        test = self._load_canonical(self.test_csv)

        n_bg = min(cfg.background_size, train.n_samples)
        background = select_background(train.features, n_bg,
                                       RngStream(cfg.seed, "background"))
        n_explained = min(cfg.explained_size, test.n_samples)
        picked = np.sort(RngStream(cfg.seed, "explained").choice(
            test.n_samples, n_explained, replace=False))
        explained = test.features[picked]

        explainer = DeepShapExplainer(clf, background,
                                      target_output=cfg.shap_target)
        result = explainer.shap_values(explained, workers=cfg.workers)
        result.explained_indices = picked
        importance = global_importance(result, n_classes=len(train.class_names),
                                       aggregate=cfg.aggregate)

        explain_dir = self.out / "explain"
        explain_dir.mkdir(parents=True, exist_ok=True)
        with open(explain_dir / "shap_values.csv", "w", newline="",
                  encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["sample_index", "output_class"]
                            + list(train.feature_names))
            for ui, unit in enumerate(result.output_units):
                for i, sample_idx in enumerate(picked):
                    writer.writerow([int(sample_idx), int(unit)]
                                    + [repr(float(v)) for v in result.phi[i, :, ui]])
        with open(explain_dir / "ranking.csv", "w", newline="",
                  encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["rank", "feature_index", "feature_name", "overall"]
                            + [f"score_{name}" for name in train.class_names])
            for rank, fi in enumerate(importance.ranking):
                writer.writerow(
                    [rank, int(fi), train.feature_names[fi],
                     repr(float(importance.overall[fi]))]
                    + [repr(float(v)) for v in importance.class_scores[:, fi]])
        self.importance_json.write_text(json.dumps({
            "aggregate": importance.aggregate,
            "background": {"description": background.description,
                           "seed": background.seed},
            "class_scores": [[float(v) for v in row]
                             for row in importance.class_scores],
            "explained_indices": [int(i) for i in picked],
            "overall": [float(v) for v in importance.overall],
            "ranking": [int(i) for i in importance.ranking],
            "target_output": result.target_output,
        }, indent=2, sort_keys=True) + "\n", encoding="utf-8")

        top_k = min(cfg.sweep_k, train.n_features)
        top = list(importance.ranking[:top_k])
        chart = svg.stacked_bars(
            [train.feature_names[i] for i in top],
            [[float(importance.class_scores[c, i]) for i in top]
             for c in range(len(train.class_names))],
            list(train.class_names),
            title=f"Top {top_k} features by mean |attribution|",
            x_label="summed mean |attribution| across classes",
        )
        (explain_dir / "top_features.svg").write_text(chart, encoding="utf-8")
        self._write_stamp("explain")
        print(f"[explain] attributed {n_explained} rows against {n_bg} baselines; "
              f"top feature: {train.feature_names[importance.ranking[0]]}")

    def _stage_attack(self):
        artifacts = [self.results_json]
        if self._is_current("attack", artifacts):
            return self._skip("attack")
        for path, producer in ((self.checkpoint_path, "train"),
                               (self.importance_json, "explain"),
                               (self.test_csv, "train")):
            self._require(path, "attack", producer)
        cfg = self.cfg
        clf, _ = load_checkpoint(self.checkpoint_path)
        train = self._load_canonical(self.train_csv)
        test = self._load_canonical(self.test_csv)
        importance = self._load_importance()
        mask_k = min(cfg.sweep_k, test.n_features)
        mask = tuple(top_k_features(importance, mask_k))
        clip_min, clip_max = self._clip_bounds(train.features)

        attack_dir = self.out / "attack"
        attack_dir.mkdir(parents=True, exist_ok=True)
        results = {}
        for target_index in self._target_indices(list(test.class_names)):
            target_name = test.class_names[target_index]
            rows = self._eligible_rows(test.labels, target_index, target_name)
            excluded = np.setdiff1d(np.arange(test.n_samples), rows)
            X_sel = test.features[rows]
            y_sel = test.labels[rows]
            for method in ("fgsm", "pgd"):
                config = self._base_attack_config(method, target_index, mask,
                                                  clip_min, clip_max)
                rng = (RngStream(cfg.seed, f"attack/{target_name}/{method}")
                       if config.random_start else None)
                batch = run_attack(clf, X_sel, config, true_labels=y_sel,
                                   rng=rng, workers=cfg.workers)
                rate = report_mod.success_rate(clf, batch)
                confusion = report_mod.attack_confusion(clf, batch,
                                                        test.n_classes)
                safe = _safe_name(target_name)
                with open(attack_dir / f"adv_{method}_{safe}.csv", "w",
                          newline="", encoding="utf-8") as handle:
                    writer = csv.writer(handle)
                    writer.writerow(list(test.feature_names))
                    for row in batch.x_adv:
                        writer.writerow([repr(float(v)) for v in row])
                manifest = {
                    "config": config.as_dict(),
                    "excluded_rows": [int(i) for i in excluded],
                    "n_grad_evals": batch.n_grad_evals,
                    "per_row_norms": [float(v) for v in batch.perturbation_norms],
                    "seed": cfg.seed,
                    "source_rows": [int(i) for i in rows],
                    "success_rate": rate,
                }
                (attack_dir / f"manifest_{method}_{safe}.json").write_text(
                    json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
                results[f"{method}:{target_name}"] = {
                    "confusion": [[int(v) for v in row] for row in confusion],
                    "k": mask_k,
                    "success_rate": rate,
                    "target_class": int(target_index),
                }
                print(f"[attack] {method} -> {target_name}: "
                      f"success {rate:.4f} over {len(rows)} rows")
        self.results_json.write_text(
            json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self._write_stamp("attack")

    def _stage_grid(self):
        if self._is_current("grid", [self.grid_csv]):
            return self._skip("grid")
        for path, producer in ((self.checkpoint_path, "train"),
                               (self.importance_json, "explain"),
                               (self.test_csv, "train")):
            self._require(path, "grid", producer)
        cfg = self.cfg
        clf, _ = load_checkpoint(self.checkpoint_path)
        train = self._load_canonical(self.train_csv)
        test = self._load_canonical(self.test_csv)
        importance = self._load_importance()
        mask = tuple(top_k_features(importance, min(cfg.sweep_k, test.n_features)))
        clip_min, clip_max = self._clip_bounds(train.features)

        table = []
        best = {}
        for target_index in self._target_indices(list(test.class_names)):
            target_name = test.class_names[target_index]
            rows = select_attack_rows(test.labels, target_index,
                                      cfg.include_target_class)
            if len(rows) > cfg.grid_tuning_size:
                stream = RngStream(cfg.seed, f"grid/{target_name}")
                rows = rows[np.sort(stream.choice(len(rows),
                                                  cfg.grid_tuning_size,
                                                  replace=False))]
            X_tune = test.features[rows]
            for method in ("fgsm", "pgd"):
                rng = (RngStream(cfg.seed, f"grid-start/{target_name}/{method}")
                       if cfg.random_start else None)
                result = grid_search(
                    clf, X_tune, method=method, target_class=target_index,
                    feature_mask=mask, epsilons=cfg.grid_epsilons,
                    step_sizes=cfg.grid_step_sizes, norms=cfg.grid_norms,
                    max_iters=cfg.grid_max_iters, clip_min=clip_min,
                    clip_max=clip_max, random_start=cfg.random_start,
                    rng=rng, workers=cfg.workers)
                for rec in result.table:
                    table.append(rec | {"target_class": int(target_index)})
                best[f"{method}:{target_name}"] = result.best_config.as_dict()
                print(f"[grid] {method} -> {target_name}: best "
                      f"eps={result.best_config.epsilon} "
                      f"step={result.best_config.step_size} "
                      f"norm={result.best_config.norm}")
        report_mod.write_grid_csv(self.grid_csv, table)
        (self.out / "grid" / "best.json").write_text(
            json.dumps(best, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self._write_stamp("grid")

    def _stage_sweep(self):
        if self._is_current("sweep", [self.sweep_csv]):
            return self._skip("sweep")
        for path, producer in ((self.checkpoint_path, "train"),
                               (self.importance_json, "explain"),
                               (self.test_csv, "train")):
            self._require(path, "sweep", producer)
        cfg = self.cfg
        clf, _ = load_checkpoint(self.checkpoint_path)
        train = self._load_canonical(self.train_csv)
        test = self._load_canonical(self.test_csv)
        importance = self._load_importance()
        clip_min, clip_max = self._clip_bounds(train.features)
        k_values = range(1, min(cfg.sweep_k, test.n_features) + 1)

        all_rows = []
        placeholder = (0,)
        for target_index in self._target_indices(list(test.class_names)):
            target_name = test.class_names[target_index]
            rows = self._eligible_rows(test.labels, target_index, target_name)
            base = {
                method: self._base_attack_config(method, target_index,
                                                 placeholder, clip_min, clip_max)
                for method in ("fgsm", "pgd")
            }
            rng = (RngStream(cfg.seed, f"sweep-start/{target_name}")
                   if cfg.random_start else None)
            result = report_mod.sweep_features(
                clf, test.features[rows], base, importance, k_values,
                true_labels=test.labels[rows], rng=rng, workers=cfg.workers)
            all_rows.extend(result.rows)
            print(f"[sweep] {target_name}: {len(result.rows)} cells")
        report_mod.write_sweep_csv(self.sweep_csv, all_rows)
        self._write_stamp("sweep")

    def _stage_report(self):
        report_files = [self.report_dir / "summary.json",
                        self.report_dir / "sweep.csv"]
        if self._is_current("report", report_files):
            return self._skip("report")
        for path, producer in ((self.metrics_json, "train"),
                               (self.results_json, "attack"),
                               (self.sweep_csv, "sweep")):
            self._require(path, "report", producer)
        metrics_payload = json.loads(self.metrics_json.read_text(encoding="utf-8"))
        class_names = metrics_payload["class_names"]
        metrics = metrics_from_confusion(np.asarray(metrics_payload["confusion"]))
        attack_results = json.loads(self.results_json.read_text(encoding="utf-8"))
        sweep_rows = report_mod.read_sweep_csv(self.sweep_csv)
        grid_table = (report_mod.read_grid_csv(self.grid_csv)
                      if self.grid_csv.exists() else [])
        confusions = {}
        for key, rec in attack_results.items():
            method, target_name = key.split(":", 1)
            confusions[(method, target_name)] = rec["confusion"]
        summary = {
            "attacks": attack_results,
            "class_names": class_names,
            "clean_metrics": {k: v for k, v in metrics_payload.items()
                              if k != "class_names"},
            "grid_cells": len(grid_table),
            "seed": self.cfg.seed,
            "sweep": {
                "k_max": max((r.k for r in sweep_rows), default=0),
                "n_rows": len(sweep_rows),
            },
        }
        written = report_mod.emit_report(
            self.report_dir, summary, metrics=metrics, sweep_rows=sweep_rows,
            grid_table=grid_table, confusions=confusions,
            class_names=class_names)
        self._write_stamp("report")
        print(f"[report] wrote {len(written)} files under {self.report_dir}")
