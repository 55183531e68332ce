"""Feature standardization and minority-class oversampling."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import SmoteError
from .numerics import coerce_rng
from .validation import check_is_fitted, check_labels, check_matrix

STD_FLOOR = 1e-12


class Standardizer(TransformerMixin, BaseEstimator):
    """Per-feature z-scoring fitted on training data only.

    Zero-variance features keep a scale of 1 instead of being dropped, so
    the column contract of the dataset stays stable.
    """

    def fit(self, X, y=None):
        X = check_matrix(X)
        if X.shape[0] == 0:
            raise ValueError("cannot fit Standardizer on an empty matrix")
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.floored_ = std <= STD_FLOOR
        self.scale_ = np.where(self.floored_, 1.0, std)
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_matrix(X)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_matrix(X)
        return X * self.scale_ + self.mean_


def smote_plan(class_counts, target_per_class=None):
    """Return (target, synthetic count per class) for a balancing run."""
    counts = np.asarray(class_counts, dtype=np.int64)
    majority = int(counts.max())
    target = majority if target_per_class is None else int(target_per_class)
    if target < majority:
        raise ValueError(
            f"target_per_class {target} is below the majority class size {majority}"
        )
    return target, target - counts


def _k_nearest_same_class(X, k, block=1024):
    """Exact k nearest neighbors (self excluded) within one class.

    Brute-force blocked distance computation; each row of the result is
    ordered by (distance, index).
    """
    n = X.shape[0]
    sq = np.einsum("ij,ij->i", X, X)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (X[start:stop] @ X.T)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        part_d = np.take_along_axis(d2, part, axis=1)
        order = np.lexsort((part, part_d), axis=1)
        out[start:stop] = np.take_along_axis(part, order, axis=1)
    return out


class SmoteOversampler(BaseEstimator):
    """SMOTE balancing: synthesize minority rows on segments between a class
    member and one of its k nearest same-class neighbors (Euclidean).

    Original rows are preserved verbatim at the front of the output;
    synthetic rows are appended grouped by ascending class index, with
    random draws consumed in that same order so results do not depend on
    any parallel execution of the neighbor search.
    """

    def __init__(self, k_neighbors=5, target_per_class=None, rng=None):
        self.k_neighbors = k_neighbors
        self.target_per_class = target_per_class
        self.rng = rng

    def fit_resample(self, X, y):
        X = check_matrix(X)
        y = check_labels(y, n_rows=X.shape[0])
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        counts = np.bincount(y)
        target, synth_counts = smote_plan(counts, self.target_per_class)
        rng = coerce_rng(self.rng, "smote")

        new_blocks = [X]
        new_labels = [y]
        for c, n_synth in enumerate(synth_counts):
            if n_synth == 0:
                continue
            class_rows = X[y == c]
            n_c = class_rows.shape[0]
            if n_c < 2:
                raise SmoteError(
                    f"class {c} has {n_c} sample(s); SMOTE needs at least 2"
                )
            if self.k_neighbors >= n_c:
                raise SmoteError(
                    f"class {c} has {n_c} samples; cannot use "
                    f"k_neighbors={self.k_neighbors}"
                )
            neighbors = _k_nearest_same_class(class_rows, self.k_neighbors)
            bases = rng.integers(0, n_c, int(n_synth))
            slots = rng.integers(0, self.k_neighbors, int(n_synth))
            u = rng.uniform01(int(n_synth))
            picked = class_rows[neighbors[bases, slots]]
            synth = class_rows[bases] + u[:, None] * (picked - class_rows[bases])
            new_blocks.append(synth)
            new_labels.append(np.full(int(n_synth), c, dtype=np.int64))

        return np.vstack(new_blocks), np.concatenate(new_labels)


def smote_balance(ds, k_neighbors=5, target_per_class=None, rng=None):
    """Dataset-level SMOTE wrapper; returns a new LabeledDataset."""
    sampler = SmoteOversampler(
        k_neighbors=k_neighbors, target_per_class=target_per_class, rng=rng
    )
    X, y = sampler.fit_resample(ds.features, ds.labels)
    return type(ds)(
        features=X,
        labels=y,
        class_names=ds.class_names,
        feature_names=ds.feature_names,
    )
