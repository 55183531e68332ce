"""Scikit-learn style classifier around the numpy network, plus checkpoints."""

import base64
import json
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .network import Mlp, predict_classes, train_network
from .numerics import RngStream
from .validation import check_is_fitted, check_matrix

CHECKPOINT_VERSION = 1


class MlpClassifier(ClassifierMixin, BaseEstimator):
    """Feed-forward ReLU classifier trained with softmax cross-entropy.

    Dropout is active only inside fit. predict, predict_proba,
    decision_function and input_gradients always run the deterministic
    eval-mode network, so adversarial gradients are reproducible.
    """

    def __init__(self, hidden_dims=(64, 32), dropout_rate=0.2, dropout_after=None,
                 epochs=12, batch_size=64, learning_rate=1e-3, optimizer="adam",
                 seed=0):
        self.hidden_dims = hidden_dims
        self.dropout_rate = dropout_rate
        self.dropout_after = dropout_after
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.seed = seed

    def fit(self, X, y):
        X = check_matrix(X)
        y = np.asarray(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        hidden = tuple(int(d) for d in self.hidden_dims)
        dropout = self.dropout_rate if hidden else 0.0
        self.network_ = Mlp.initialize(
            X.shape[1], hidden, len(self.classes_),
            dropout_rate=dropout, dropout_after=self.dropout_after,
            rng=RngStream(self.seed, "init"),
        )
        self.history_ = train_network(
            self.network_, X, encoded,
            epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, optimizer=self.optimizer,
            shuffle_rng=RngStream(self.seed, "shuffle"),
            dropout_rng=RngStream(self.seed, "dropout"),
        )
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "network_")
        return self.network_.forward(check_matrix(X)).logits

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        return self.network_.forward(check_matrix(X)).probs

    def predict(self, X):
        check_is_fitted(self, "network_")
        return self.classes_[predict_classes(self.network_, check_matrix(X))]

    def input_gradients(self, X, target_labels):
        """Per-row cross-entropy gradient toward the given target labels."""
        check_is_fitted(self, "network_")
        targets = np.searchsorted(self.classes_, np.asarray(target_labels))
        return self.network_.input_gradients(check_matrix(X), targets)


def _encode_array(arr):
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")


def _decode_array(text, shape):
    return np.frombuffer(base64.b64decode(text), dtype="<f8").reshape(shape).copy()


def save_checkpoint(clf, path, class_names=None, feature_names=None, scaler=None):
    """Write a fitted classifier to a single self-describing JSON file."""
    check_is_fitted(clf, "network_")
    net = clf.network_
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "params": {
            "hidden_dims": [int(d) for d in clf.hidden_dims],
            "dropout_rate": clf.dropout_rate,
            "dropout_after": clf.dropout_after,
            "epochs": clf.epochs,
            "batch_size": clf.batch_size,
            "learning_rate": clf.learning_rate,
            "optimizer": clf.optimizer,
            "seed": clf.seed,
        },
        "classes": [int(c) for c in clf.classes_],
        "n_features": int(clf.n_features_in_),
        "class_names": None if class_names is None else list(class_names),
        "feature_names": None if feature_names is None else list(feature_names),
        "scaler": None if scaler is None else {
            "mean": list(scaler.mean_),
            "scale": list(scaler.scale_),
        },
        "layers": [
            {
                "shape": list(w.shape),
                "weights": _encode_array(w),
                "bias": _encode_array(b),
            }
            for w, b in zip(net.weights, net.biases)
        ],
        "history": clf.history_,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_checkpoint(path):
    """Rebuild a fitted MlpClassifier; returns (classifier, metadata)."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    params = payload["params"]
    clf = MlpClassifier(
        hidden_dims=tuple(params["hidden_dims"]),
        dropout_rate=params["dropout_rate"],
        dropout_after=params["dropout_after"],
        epochs=params["epochs"],
        batch_size=params["batch_size"],
        learning_rate=params["learning_rate"],
        optimizer=params["optimizer"],
        seed=params["seed"],
    )
    weights = []
    biases = []
    for layer in payload["layers"]:
        shape = tuple(layer["shape"])
        weights.append(_decode_array(layer["weights"], shape))
        biases.append(_decode_array(layer["bias"], (shape[1],)))
    dropout = params["dropout_rate"] if len(weights) > 1 else 0.0
    clf.network_ = Mlp(weights, biases, dropout_rate=dropout,
                       dropout_after=params["dropout_after"])
    clf.classes_ = np.asarray(payload["classes"], dtype=np.int64)
    clf.n_features_in_ = payload["n_features"]
    clf.history_ = payload["history"]
    metadata = {
        "class_names": payload["class_names"],
        "feature_names": payload["feature_names"],
        "scaler": payload["scaler"],
    }
    return clf, metadata
