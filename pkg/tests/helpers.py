"""Shared oracles: finite differences, exhaustive Shapley, error measures,
randomized attack instances."""

from itertools import combinations
from math import factorial

import numpy as np

from maskgrad import AttackConfig, Mlp, RngStream, run_attack


def random_attack_instance(seed, n_rows=25):
    """A random small model, batch, and attack config for constraint checks."""
    rng = RngStream(seed, "attack-rand")
    d = int(rng.integers(3, 9))
    n_classes = int(rng.integers(2, 5))
    net = Mlp.initialize(d, (int(rng.integers(4, 10)),), n_classes,
                         rng=rng.child("init"))
    X = rng.standard_normal(n_rows * d).reshape(n_rows, d)
    method = "fgsm" if seed % 2 == 0 else "pgd"
    norm = "l2" if (seed // 2) % 2 == 0 else "linf"
    epsilon = 0.05 + 2.0 * float(rng.uniform01(1)[0])
    mask_size = int(rng.integers(1, d + 1))
    mask = tuple(int(i) for i in rng.choice(d, mask_size, replace=False))
    clipped = seed % 3 == 0
    config = AttackConfig(
        method=method, norm=norm, epsilon=epsilon,
        step_size=epsilon / 3.0, max_iter=8 if method == "pgd" else None,
        target_class=int(rng.integers(0, n_classes)), feature_mask=mask,
        clip_min=-1.5 if clipped else None, clip_max=1.5 if clipped else None,
    )
    return net, X, config


def run_random_attack(seed, n_rows=25):
    net, X, config = random_attack_instance(seed, n_rows)
    return net, X, config, run_attack(net, X, config)


def finite_diff_param_grads(net, X, y, h=1e-5):
    """Central finite differences of the mean loss for every parameter."""
    grads = []
    for p in net.parameters():
        flat = p.ravel()
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            loss_plus = net.loss_and_grads(X, y)[0]
            flat[i] = orig - h
            loss_minus = net.loss_and_grads(X, y)[0]
            flat[i] = orig
            g[i] = (loss_plus - loss_minus) / (2.0 * h)
        grads.append(g.reshape(p.shape))
    return grads


def finite_diff_input_grads(net, X, y, h=1e-5):
    """Central finite differences of the mean loss for every input entry."""
    X = np.array(X, dtype=np.float64)
    g = np.zeros_like(X)
    for i in range(X.shape[0]):
        for j in range(X.shape[1]):
            orig = X[i, j]
            X[i, j] = orig + h
            loss_plus = net.loss_and_grads(X, y)[0]
            X[i, j] = orig - h
            loss_minus = net.loss_and_grads(X, y)[0]
            X[i, j] = orig
            g[i, j] = (loss_plus - loss_minus) / (2.0 * h)
    return g


def random_differentiable_net(rng, max_hidden_layers=3, max_units=16,
                              n_rows=4, margin=1e-3, attempts=50):
    """Random small net plus inputs kept away from ReLU kinks.

    Biases are drawn nonzero so a dead layer cannot pin downstream
    pre-activations to exactly zero, and inputs are redrawn until every
    hidden pre-activation clears ``margin``; central differences are only
    a valid oracle at differentiable points.
    """
    n_hidden = int(rng.integers(0, max_hidden_layers + 1))
    hidden = [int(d) for d in rng.integers(2, max_units + 1, size=n_hidden)]
    input_dim = int(rng.integers(2, 9))
    n_classes = int(rng.integers(2, 5))
    net = Mlp.initialize(input_dim, hidden, n_classes, rng=rng.child("init"))
    for bias in net.biases:
        bias[:] = 0.2 * rng.standard_normal(bias.size)
    for _ in range(attempts):
        X = rng.standard_normal(n_rows * input_dim).reshape(n_rows, input_dim)
        preacts = net.forward(X).preacts
        if all(np.abs(z).min() > margin for z in preacts):
            y = np.asarray(rng.integers(0, n_classes, n_rows))
            return net, X, y
    raise AssertionError("no differentiable sample point found")


def max_rel_err(analytic, numeric, floor=1e-3):
    """Relative error with a magnitude floor so finite-difference roundoff on
    near-zero entries does not dominate the denominator."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def exact_shapley(value_fn, x, baseline):
    """Shapley values by full subset enumeration.

    value_fn takes a single feature vector; coalition S uses x's entries on
    S and the baseline's elsewhere.
    """
    x = np.asarray(x, dtype=np.float64)
    baseline = np.asarray(baseline, dtype=np.float64)
    d = x.shape[0]
    phi = np.zeros(d)
    others = lambda i: [j for j in range(d) if j != i]
    for i in range(d):
        for size in range(d):
            for subset in combinations(others(i), size):
                weight = (factorial(size) * factorial(d - size - 1)) / factorial(d)
                with_s = baseline.copy()
                with_s[list(subset)] = x[list(subset)]
                with_si = with_s.copy()
                with_si[i] = x[i]
                phi[i] += weight * (value_fn(with_si) - value_fn(with_s))
    return phi
