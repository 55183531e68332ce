"""Multiclass confusion matrices and support-weighted metrics."""

from dataclasses import dataclass

import numpy as np

from .validation import check_labels


def confusion_matrix(y_true, y_pred, n_classes):
    """Counts of (true class, predicted class) pairs, true along rows."""
    y_true = check_labels(y_true, n_classes=n_classes, name="y_true")
    y_pred = check_labels(y_pred, n_rows=len(y_true), n_classes=n_classes, name="y_pred")
    flat = y_true * n_classes + y_pred
    return np.bincount(flat, minlength=n_classes * n_classes).reshape(n_classes, n_classes)


@dataclass
class EvalMetrics:
    """Weighted and per-class classification metrics, in percent.

    Weighted recall always equals accuracy: both are trace / total under
    support weighting.
    """

    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    per_class_f1: np.ndarray
    support: np.ndarray
    confusion: np.ndarray

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_class_precision": [float(v) for v in self.per_class_precision],
            "per_class_recall": [float(v) for v in self.per_class_recall],
            "per_class_f1": [float(v) for v in self.per_class_f1],
            "support": [int(v) for v in self.support],
            "confusion": [[int(v) for v in row] for row in self.confusion],
        }


def metrics_from_confusion(confusion):
    confusion = np.asarray(confusion, dtype=np.int64)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise ValueError(f"confusion matrix must be square, got {confusion.shape}")
    total = confusion.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")
    diag = np.diag(confusion).astype(np.float64)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    recall = np.divide(diag, support, out=np.zeros_like(diag), where=support > 0)
    precision = np.divide(diag, predicted, out=np.zeros_like(diag), where=predicted > 0)
    pr_sum = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr_sum,
                   out=np.zeros_like(diag), where=pr_sum > 0)
    weights = support / total
    accuracy = 100.0 * float(diag.sum() / total)
    return EvalMetrics(
        accuracy=accuracy,
        precision=100.0 * float((weights * precision).sum()),
        # support-weighted recall is trace/total, i.e. accuracy, exactly
        recall=accuracy,
        f1=100.0 * float((weights * f1).sum()),
        per_class_precision=100.0 * precision,
        per_class_recall=100.0 * recall,
        per_class_f1=100.0 * f1,
        support=support,
        confusion=confusion,
    )


def evaluate_classifier(model, X, y, n_classes=None):
    """Predict on (X, y) and summarize (requires a fitted classifier)."""
    y = check_labels(y, name="y")
    if n_classes is None:
        n_classes = len(getattr(model, "classes_", [])) or int(y.max()) + 1
    predictions = model.predict(X)
    return metrics_from_confusion(confusion_matrix(y, predictions, n_classes))
