"""Input validation helpers used by the estimator-style classes."""

import numpy as np
from sklearn.exceptions import NotFittedError

from .errors import ShapeError
from .numerics import as_matrix


def check_matrix(X, name="X"):
    return as_matrix(X, name)


def check_labels(y, n_rows=None, n_classes=None, name="y"):
    y = np.asarray(y)
    if y.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {y.shape}")
    y = y.astype(np.int64)
    if n_rows is not None and len(y) != n_rows:
        raise ShapeError(f"{name} has {len(y)} entries for {n_rows} rows")
    if y.size and y.min() < 0:
        raise ValueError(f"{name} contains negative class indices")
    if n_classes is not None and y.size and y.max() >= n_classes:
        raise ValueError(f"{name} contains class index {y.max()} >= {n_classes}")
    return y


def check_is_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit first"
        )
