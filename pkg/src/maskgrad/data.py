"""Dataset container, CSV ingestion, stratified splitting, synthetic blobs."""

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import IngestionError, ShapeError, StratificationError
from .numerics import as_matrix, coerce_rng


@dataclass
class LabeledDataset:
    """Feature matrix plus integer class labels and name tables.

    Labels index into ``class_names``; class order is fixed at ingestion
    (first appearance in the source file) and every downstream report uses
    this canonical order.
    """

    features: np.ndarray
    labels: np.ndarray
    class_names: tuple
    feature_names: tuple

    def __post_init__(self):
        self.features = as_matrix(self.features, "features")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_names = tuple(str(c) for c in self.class_names)
        self.feature_names = tuple(str(f) for f in self.feature_names)
        if self.labels.ndim != 1 or len(self.labels) != self.features.shape[0]:
            raise ShapeError(
                f"labels length {self.labels.shape} does not match "
                f"{self.features.shape[0]} feature rows"
            )
        if len(self.feature_names) != self.features.shape[1]:
            raise ShapeError(
                f"{len(self.feature_names)} feature names for "
                f"{self.features.shape[1]} columns"
            )
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.class_names)
        ):
            raise ValueError("labels must index into class_names")

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return replace(self, features=self.features[indices], labels=self.labels[indices])

    def with_features(self, features):
        return replace(self, features=features)


def load_csv(path, label_column, drop_columns=()):
    """Read a headered CSV into a LabeledDataset.

    Every retained column except ``label_column`` must be numeric and
    finite. Class names are the distinct label values in first-appearance
    order.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"dataset file not found: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise IngestionError(f"{path}: label column {label_column!r} not in header")
        for col in drop_columns:
            if col not in header:
                raise IngestionError(f"{path}: drop column {col!r} not in header")
        skip = set(drop_columns) | {label_column}
        label_idx = header.index(label_column)
        feature_idx = [i for i, name in enumerate(header) if name not in skip]
        feature_names = [header[i] for i in feature_idx]

        rows = []
        labels = []
        class_order = {}
        for row_num, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise IngestionError(
                    f"{path}: row {row_num} has {len(row)} cells, expected {len(header)}"
                )
            try:
                values = [float(row[i]) for i in feature_idx]
            except ValueError:
                values = None
            if values is None or not all(np.isfinite(values)):
                for i in feature_idx:
                    try:
                        v = float(row[i])
                    except ValueError:
                        v = float("nan")
                    if not np.isfinite(v):
                        raise IngestionError(
                            f"{path}: row {row_num}, column {header[i]!r}: "
                            f"non-numeric value {row[i]!r}"
                        ) from None
            label = row[label_idx].strip()
            if label not in class_order:
                class_order[label] = len(class_order)
            rows.append(values)
            labels.append(class_order[label])

    if not rows:
        raise IngestionError(f"{path}: header only, no data rows")
    features = np.asarray(rows, dtype=np.float64)
    return LabeledDataset(
        features=features,
        labels=np.asarray(labels, dtype=np.int64),
        class_names=tuple(class_order),
        feature_names=tuple(feature_names),
    )


def save_csv(ds, path, label_column="label"):
    """Persist a dataset as a headered CSV (features plus one label column)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(ds.feature_names) + [label_column])
        for row, label in zip(ds.features, ds.labels):
            writer.writerow([repr(float(v)) for v in row] + [ds.class_names[label]])
    return path


def write_sidecar(path, ds, scaler=None, seed=None, label_column="label"):
    """Write the JSON sidecar describing a persisted dataset."""
    payload = {
        "class_names": list(ds.class_names),
        "feature_names": list(ds.feature_names),
        "label_column": label_column,
        "scaler": None
        if scaler is None
        else {"mean": list(scaler.mean_), "scale": list(scaler.scale_)},
        "seed": seed,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def stratified_split(ds, train_fraction, rng):
    """Split per class: floor(fraction * count) rows to train, rest to test.

    Row order within each partition follows the original dataset order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = coerce_rng(rng, "split")
    counts = ds.class_counts()
    for c, count in enumerate(counts):
        if count < 2:
            raise StratificationError(
                f"class {ds.class_names[c]!r} has {count} sample(s); need at least 2"
            )
    train_idx = []
    test_idx = []
    for c in range(ds.n_classes):
        class_rows = np.flatnonzero(ds.labels == c)
        perm = rng.permutation(len(class_rows))
        n_train = int(np.floor(train_fraction * len(class_rows)))
        train_idx.append(class_rows[perm[:n_train]])
        test_idx.append(class_rows[perm[n_train:]])
    train_idx = np.sort(np.concatenate(train_idx))
    test_idx = np.sort(np.concatenate(test_idx))
    return ds.subset(train_idx), ds.subset(test_idx)


def synth_dataset(n_classes, n_features, n_per_class, spread, rng,
                  class_prefix="class_", feature_prefix="f"):
    """Gaussian blobs: one mean per class from 3 * standard normal, isotropic
    per-class covariance spread**2. Per-class counts may be imbalanced."""
    if isinstance(n_per_class, int):
        n_per_class = [n_per_class] * n_classes
    n_per_class = [int(c) for c in n_per_class]
    if len(n_per_class) != n_classes:
        raise ValueError(
            f"{len(n_per_class)} class counts given for {n_classes} classes"
        )
    if any(c <= 0 for c in n_per_class) or n_classes <= 0 or n_features <= 0:
        raise ValueError("counts must be positive")
    rng = coerce_rng(rng, "synth")
    means = 3.0 * rng.standard_normal(n_classes * n_features).reshape(n_classes, n_features)
    blocks = []
    labels = []
    for c, count in enumerate(n_per_class):
        noise = rng.standard_normal(count * n_features).reshape(count, n_features)
        blocks.append(means[c] + float(spread) * noise)
        labels.append(np.full(count, c, dtype=np.int64))
    return LabeledDataset(
        features=np.vstack(blocks),
        labels=np.concatenate(labels),
        class_names=tuple(f"{class_prefix}{c}" for c in range(n_classes)),
        feature_names=tuple(f"{feature_prefix}{j}" for j in range(n_features)),
    )
