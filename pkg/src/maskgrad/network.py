"""Feed-forward network core: He init, softmax cross-entropy, backprop.

Everything here works on plain float64 numpy arrays. Dropout is only ever
applied when a dropout stream is passed in, so evaluation and gradient
computation outside of training are fully deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .numerics import coerce_rng


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits):
    return np.exp(_log_softmax(logits))


@dataclass
class ForwardPass:
    logits: np.ndarray
    probs: np.ndarray
    preacts: list        # hidden pre-activations, one per hidden layer
    acts: list           # inputs to each linear layer; acts[0] is X
    dropout_masks: list  # scaled keep masks, None where no dropout applied


class Mlp:
    """Fully connected ReLU net with a softmax head.

    weights[l] has shape (fan_in, fan_out); biases[l] has shape (fan_out,).
    ``hidden_activation`` may be "identity" to build purely linear stacks
    (useful for closed-form checks); the default is ReLU.
    """

    def __init__(self, weights, biases, dropout_rate=0.0, dropout_after=None,
                 hidden_activation="relu"):
        if len(weights) != len(biases) or not weights:
            raise ShapeError("need one bias vector per weight matrix")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[1]:
                raise ShapeError(f"layer {l} weight/bias shapes do not chain")
            if l > 0 and w.shape[0] != self.weights[l - 1].shape[1]:
                raise ShapeError(f"layer {l} input width does not chain")
        if not 0.0 <= dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")
        n_hidden = len(weights) - 1
        if dropout_rate > 0.0 and n_hidden == 0:
            raise ValueError("dropout requires at least one hidden layer")
        if dropout_after is None:
            dropout_after = n_hidden - 1 if n_hidden else None
        if dropout_rate > 0.0 and not 0 <= dropout_after < n_hidden:
            raise ValueError(f"dropout_after must index a hidden layer, got {dropout_after}")
        if hidden_activation not in ("relu", "identity"):
            raise ValueError(f"unknown hidden_activation {hidden_activation!r}")
        self.dropout_rate = float(dropout_rate)
        self.dropout_after = dropout_after
        self.hidden_activation = hidden_activation

    @classmethod
    def initialize(cls, input_dim, hidden_dims, output_dim, dropout_rate=0.0,
                   dropout_after=None, hidden_activation="relu", rng=None):
        """He-normal weights (std sqrt(2 / fan_in)) and zero biases."""
        dims = [int(input_dim)] + [int(d) for d in hidden_dims] + [int(output_dim)]
        if any(d < 1 for d in dims):
            raise ValueError("all layer widths must be >= 1")
        rng = coerce_rng(rng, "init")
        weights = []
        biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            std = np.sqrt(2.0 / fan_in)
            w = std * rng.standard_normal(fan_in * fan_out).reshape(fan_in, fan_out)
            weights.append(w)
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, dropout_rate=dropout_rate,
                   dropout_after=dropout_after, hidden_activation=hidden_activation)

    @property
    def input_dim(self):
        return self.weights[0].shape[0]

    @property
    def output_dim(self):
        return self.weights[-1].shape[1]

    @property
    def n_hidden(self):
        return len(self.weights) - 1

    @property
    def dims(self):
        return tuple([self.input_dim] + [w.shape[1] for w in self.weights])

    def copy(self):
        return Mlp(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            dropout_rate=self.dropout_rate,
            dropout_after=self.dropout_after,
            hidden_activation=self.hidden_activation,
        )

    def parameters(self):
        """Flat parameter list [W0, b0, W1, b1, ...] sharing storage."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def _activate(self, z):
        if self.hidden_activation == "relu":
            return np.maximum(z, 0.0)
        return z

    def _activation_deriv(self, z):
        if self.hidden_activation == "relu":
            return (z > 0.0).astype(np.float64)
        return np.ones_like(z)

    def forward(self, X, dropout_rng=None):
        """Run the network; pass a dropout stream only during training."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ShapeError(
                f"input has shape {X.shape}, expected (*, {self.input_dim})"
            )
        acts = [X]
        preacts = []
        masks = []
        a = X
        n_layers = len(self.weights)
        for l in range(n_layers):
            z = a @ self.weights[l] + self.biases[l]
            if l == n_layers - 1:
                logits = z
                break
            preacts.append(z)
            a = self._activate(z)
            mask = None
            if dropout_rng is not None and self.dropout_rate > 0.0 and l == self.dropout_after:
                keep = 1.0 - self.dropout_rate
                mask = (dropout_rng.uniform01(a.size).reshape(a.shape) < keep) / keep
                a = a * mask
            masks.append(mask)
            acts.append(a)
        probs = softmax(logits)
        return ForwardPass(logits=logits, probs=probs, preacts=preacts,
                           acts=acts, dropout_masks=masks)

    def loss_and_grads(self, X, labels, dropout_rng=None):
        """Mean cross-entropy plus parameter and input gradients.

        Returns (loss, param_grads, input_grads, probs) where param_grads
        aligns with parameters() and input_grads is the gradient of the
        mean loss with respect to X.
        """
        labels = np.asarray(labels, dtype=np.int64)
        fwd = self.forward(X, dropout_rng=dropout_rng)
        n = X.shape[0]
        log_probs = _log_softmax(fwd.logits)
        loss = -log_probs[np.arange(n), labels].mean()

        delta = fwd.probs.copy()
        delta[np.arange(n), labels] -= 1.0
        delta /= n

        param_grads = [None] * (2 * len(self.weights))
        for l in range(len(self.weights) - 1, -1, -1):
            param_grads[2 * l] = fwd.acts[l].T @ delta
            param_grads[2 * l + 1] = delta.sum(axis=0)
            upstream = delta @ self.weights[l].T
            if l > 0:
                if fwd.dropout_masks[l - 1] is not None:
                    upstream = upstream * fwd.dropout_masks[l - 1]
                delta = upstream * self._activation_deriv(fwd.preacts[l - 1])
            else:
                input_grads = upstream
        return loss, param_grads, input_grads, fwd.probs

    def input_gradients(self, X, labels):
        """Per-row gradient of that row's own cross-entropy, dropout off."""
        X = np.asarray(X, dtype=np.float64)
        _, _, grads, _ = self.loss_and_grads(X, labels)
        return grads * X.shape[0]


def as_network(model):
    """Accept a raw Mlp or any fitted estimator exposing ``network_``."""
    net = getattr(model, "network_", model)
    if not isinstance(net, Mlp):
        raise TypeError(f"expected an Mlp or fitted classifier, got {type(model).__name__}")
    return net


def predict_classes(model, X):
    """Argmax class indices; ties resolve to the lowest index."""
    net = as_network(model)
    return np.argmax(net.forward(X).probs, axis=1)


class AdamOptimizer:
    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._m = None
        self._v = None
        self._t = 0

    def update(self, params, grads):
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self._t += 1
        correction1 = 1.0 - self.beta1 ** self._t
        correction2 = 1.0 - self.beta2 ** self._t
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.learning_rate * (m / correction1) / (
                np.sqrt(v / correction2) + self.eps
            )


class SgdOptimizer:
    def __init__(self, learning_rate=1e-3):
        self.learning_rate = learning_rate

    def update(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


def make_optimizer(name, learning_rate):
    if name == "adam":
        return AdamOptimizer(learning_rate=learning_rate)
    if name == "sgd":
        return SgdOptimizer(learning_rate=learning_rate)
    raise ValueError(f"unknown optimizer {name!r}")


def train_network(net, X, y, epochs, batch_size, learning_rate=1e-3,
                  optimizer="adam", shuffle_rng=None, dropout_rng=None):
    """Mini-batch training loop; mutates ``net`` in place.

    Each epoch reshuffles with the dedicated shuffle stream. History rows
    carry the mean batch loss and the running train-mode accuracy.
    """
    if epochs < 0 or batch_size < 1:
        raise ValueError("epochs must be >= 0 and batch_size >= 1")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    shuffle_rng = coerce_rng(shuffle_rng, "shuffle")
    if net.dropout_rate > 0.0 and dropout_rng is None:
        dropout_rng = coerce_rng(None, "dropout")
    opt = make_optimizer(optimizer, learning_rate)
    params = net.parameters()
    n = X.shape[0]
    history = []
    for epoch in range(int(epochs)):
        order = shuffle_rng.permutation(n)
        losses = []
        correct = 0
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            loss, grads, _, probs = net.loss_and_grads(
                X[batch], y[batch],
                dropout_rng=dropout_rng if net.dropout_rate > 0.0 else None,
            )
            opt.update(params, grads)
            losses.append(loss)
            correct += int((np.argmax(probs, axis=1) == y[batch]).sum())
        history.append({
            "epoch": epoch,
            "loss": float(np.mean(losses)),
            "accuracy": correct / n,
        })
    return history
