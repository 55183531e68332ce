"""Targeted FGSM and PGD evasion attacks restricted to a feature mask.

Both attacks minimize the cross-entropy toward the target class, so the
perturbation direction is the negative input gradient. All gradients are
taken in eval mode; with random_start off every attack is bit-reproducible.
"""

from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .errors import ShapeError
from .network import as_network
from .parallel import parallel_map
from .validation import check_matrix

METHODS = ("fgsm", "pgd")
NORMS = ("l2", "linf")
ROW_CHUNK = 1024


@dataclass(frozen=True)
class AttackConfig:
    """Hyperparameters of one attack run.

    epsilon and step_size are in standardized-feature units. FGSM moves by
    epsilon in a single step; its step_size is carried (and logged) for
    grid compatibility but never used. clip bounds may be None, scalar, or
    per-feature sequences.
    """

    method: str
    norm: str
    epsilon: float
    target_class: int
    feature_mask: tuple
    step_size: float = 0.0
    max_iter: int = None
    clip_min: object = None
    clip_max: object = None
    random_start: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not np.isfinite(self.step_size) or self.step_size < 0:
            raise ValueError(f"step_size must be finite and >= 0, got {self.step_size}")
        mask = tuple(sorted(int(i) for i in self.feature_mask))
        if not mask:
            raise ValueError("feature_mask must not be empty")
        if len(set(mask)) != len(mask) or mask[0] < 0:
            raise ValueError("feature_mask must hold unique non-negative indices")
        object.__setattr__(self, "feature_mask", mask)
        if self.method == "pgd":
            if self.max_iter is None or int(self.max_iter) < 1:
                raise ValueError("pgd requires max_iter >= 1")
            object.__setattr__(self, "max_iter", int(self.max_iter))
        for name in ("clip_min", "clip_max"):
            value = getattr(self, name)
            if value is not None and not np.isscalar(value):
                object.__setattr__(self, name, tuple(float(v) for v in value))

    def as_dict(self):
        out = {
            "method": self.method,
            "norm": self.norm,
            "epsilon": self.epsilon,
            "step_size": self.step_size,
            "max_iter": self.max_iter,
            "target_class": self.target_class,
            "feature_mask": list(self.feature_mask),
            "clip_min": self.clip_min if (self.clip_min is None or np.isscalar(self.clip_min)) else list(self.clip_min),
            "clip_max": self.clip_max if (self.clip_max is None or np.isscalar(self.clip_max)) else list(self.clip_max),
            "random_start": self.random_start,
        }
        if self.method == "fgsm":
            out["fgsm_step_size_unused"] = True
        return out


@dataclass
class AdversarialBatch:
    """Original rows, their adversarial counterparts, and bookkeeping."""

    x_original: np.ndarray
    x_adv: np.ndarray
    true_labels: np.ndarray
    target_class: int
    perturbation_norms: np.ndarray
    config: AttackConfig
    n_grad_evals: int
    source_indices: np.ndarray = None


def select_attack_rows(y, target_class, include_target_class=False):
    """Indices of rows eligible for attack toward target_class."""
    y = np.asarray(y)
    if include_target_class:
        return np.arange(len(y))
    return np.flatnonzero(y != target_class)


def perturbation_norms(delta, norm):
    if norm == "linf":
        return np.abs(delta).max(axis=1) if delta.shape[1] else np.zeros(len(delta))
    return np.sqrt((delta ** 2).sum(axis=1))


def _mask_vector(config, n_features):
    mask = np.zeros(n_features, dtype=bool)
    idx = np.asarray(config.feature_mask, dtype=np.int64)
    if idx.max() >= n_features:
        raise ShapeError(
            f"feature_mask index {idx.max()} out of range for {n_features} features"
        )
    mask[idx] = True
    return mask


def _bounds(X, config):
    """Per-sample clip bounds, widened to include each original row.

    Widening keeps off-mask coordinates exactly untouched and the norm
    budget intact even when a row lies outside the configured envelope.
    """
    if config.clip_min is None and config.clip_max is None:
        return None, None
    lo = np.full(X.shape[1], -np.inf) if config.clip_min is None else np.broadcast_to(
        np.asarray(config.clip_min, dtype=np.float64), (X.shape[1],))
    hi = np.full(X.shape[1], np.inf) if config.clip_max is None else np.broadcast_to(
        np.asarray(config.clip_max, dtype=np.float64), (X.shape[1],))
    return np.minimum(lo, X), np.maximum(hi, X)


def _masked_gradients(net, X, config, mask):
    targets = np.full(X.shape[0], int(config.target_class), dtype=np.int64)
    grads = net.input_gradients(X, targets)
    if not np.all(np.isfinite(grads)):
        raise ValueError("non-finite attack gradient")
    grads = grads * mask
    return grads


def _step_direction(grads, norm, magnitude):
    """Perturbation of the given magnitude against the gradient; zero-gradient
    rows stay put."""
    if norm == "linf":
        return -magnitude * np.sign(grads)
    row_norms = np.sqrt((grads ** 2).sum(axis=1))
    out = np.zeros_like(grads)
    moving = row_norms > 0
    out[moving] = -magnitude * grads[moving] / row_norms[moving, None]
    return out


def _project_ball(delta, norm, epsilon):
    if norm == "linf":
        return np.clip(delta, -epsilon, epsilon)
    row_norms = np.sqrt((delta ** 2).sum(axis=1))
    factor = np.ones_like(row_norms)
    over = row_norms > epsilon
    factor[over] = epsilon / row_norms[over]
    return delta * factor[:, None]


def _random_start_delta(n, mask, config, rng):
    """Uniform draw inside the masked epsilon-ball."""
    d_mask = int(mask.sum())
    if config.norm == "linf":
        vals = rng.uniform01(n * d_mask).reshape(n, d_mask)
        masked = (2.0 * vals - 1.0) * config.epsilon
    else:
        direction = rng.standard_normal(n * d_mask).reshape(n, d_mask)
        row_norms = np.sqrt((direction ** 2).sum(axis=1))
        row_norms[row_norms == 0] = 1.0
        radius = config.epsilon * rng.uniform01(n) ** (1.0 / d_mask)
        masked = direction / row_norms[:, None] * radius[:, None]
    delta = np.zeros((n, mask.shape[0]))
    delta[:, mask] = masked
    return _project_ball(delta, config.norm, config.epsilon)


def _fgsm_core(net, X, config, mask, lo, hi):
    grads = _masked_gradients(net, X, config, mask)
    delta = _step_direction(grads, config.norm, config.epsilon)
    x_adv = X + delta
    if lo is not None:
        x_adv = np.clip(x_adv, lo, hi)
    x_adv[:, ~mask] = X[:, ~mask]
    return x_adv, 1


def _pgd_core(net, X, config, mask, lo, hi, start_delta=None):
    delta = np.zeros_like(X) if start_delta is None else start_delta.copy()
    x = X + delta
    if lo is not None:
        x = np.clip(x, lo, hi)
        delta = x - X
        delta[:, ~mask] = 0.0
    for _ in range(config.max_iter):
        grads = _masked_gradients(net, x, config, mask)
        delta = delta + _step_direction(grads, config.norm, config.step_size)
        delta[:, ~mask] = 0.0
        delta = _project_ball(delta, config.norm, config.epsilon)
        x = X + delta
        if lo is not None:
            x = np.clip(x, lo, hi)
            delta = x - X
            delta[:, ~mask] = 0.0
    x_adv = x
    x_adv[:, ~mask] = X[:, ~mask]
    return x_adv, config.max_iter


def run_attack(model, X, config, true_labels=None, rng=None, workers=1):
    """Generate an adversarial batch with the configured method.

    Rows are independent; with workers > 1 they are processed in fixed-size
    blocks and reassembled in order, so results match the serial run.
    """
    net = as_network(model)
    X = check_matrix(X)
    if X.shape[1] != net.input_dim:
        raise ShapeError(f"input width {X.shape[1]} != model input {net.input_dim}")
    if X.shape[0] == 0:
        raise ValueError("attack batch is empty")
    mask = _mask_vector(config, X.shape[1])
    lo, hi = _bounds(X, config)
    start_delta = None
    if config.method == "pgd" and config.random_start:
        if rng is None:
            raise ValueError("random_start requires an rng stream")
        start_delta = _random_start_delta(X.shape[0], mask, config, rng)

    def run_rows(rows):
        sub_lo = lo[rows] if lo is not None else None
        sub_hi = hi[rows] if hi is not None else None
        sub_start = start_delta[rows] if start_delta is not None else None
        if config.method == "fgsm":
            return _fgsm_core(net, X[rows], config, mask, sub_lo, sub_hi)
        return _pgd_core(net, X[rows], config, mask, sub_lo, sub_hi, sub_start)

    blocks = [np.arange(start, min(start + ROW_CHUNK, X.shape[0]))
              for start in range(0, X.shape[0], ROW_CHUNK)]
    results = parallel_map(run_rows, blocks, workers=workers)
    x_adv = np.vstack([r[0] for r in results])
    evals = results[0][1]
    return AdversarialBatch(
        x_original=X,
        x_adv=x_adv,
        true_labels=None if true_labels is None else np.asarray(true_labels, dtype=np.int64),
        target_class=int(config.target_class),
        perturbation_norms=perturbation_norms(x_adv - X, config.norm),
        config=config,
        n_grad_evals=evals,
    )


def fgsm_targeted(model, X, config, true_labels=None, workers=1):
    if config.method != "fgsm":
        raise ValueError(f"config.method is {config.method!r}, expected 'fgsm'")
    return run_attack(model, X, config, true_labels=true_labels, workers=workers)


def pgd_targeted(model, X, config, true_labels=None, rng=None, workers=1):
    if config.method != "pgd":
        raise ValueError(f"config.method is {config.method!r}, expected 'pgd'")
    return run_attack(model, X, config, true_labels=true_labels, rng=rng, workers=workers)


@dataclass
class GridSearchResult:
    best_config: AttackConfig
    table: list = field(default_factory=list)


def grid_search(model, X, *, method, target_class, feature_mask, epsilons,
                step_sizes, norms=NORMS, max_iters=(50,), clip_min=None,
                clip_max=None, random_start=False, rng=None, workers=1):
    """Evaluate every grid cell on the given tuning rows.

    Returns the argmax-success configuration; ties prefer smaller epsilon,
    then smaller step size (cells are scanned in sorted order).
    """
    from .network import predict_classes

    if not (len(epsilons) and len(step_sizes) and len(norms)):
        raise ValueError("grid axes must be non-empty")
    iter_axis = tuple(sorted(set(int(i) for i in max_iters))) if method == "pgd" else (None,)
    cells = list(product(
        sorted(set(float(e) for e in epsilons)),
        sorted(set(float(s) for s in step_sizes)),
        sorted(set(norms)),
        iter_axis,
    ))
    table = []
    best = None
    best_rate = -1.0
    for epsilon, step, norm, iters in cells:
        config = AttackConfig(
            method=method, norm=norm, epsilon=epsilon, step_size=step,
            max_iter=iters, target_class=target_class, feature_mask=feature_mask,
            clip_min=clip_min, clip_max=clip_max, random_start=random_start,
        )
        cell_rng = rng.child(f"grid/eps={epsilon}/step={step}/{norm}/{iters}") if rng else None
        batch = run_attack(model, X, config, rng=cell_rng, workers=workers)
        rate = float(np.mean(predict_classes(model, batch.x_adv) == config.target_class))
        table.append({
            "method": method, "epsilon": epsilon, "step_size": step,
            "norm": norm, "max_iter": iters, "success_rate": rate,
        })
        if rate > best_rate:
            best_rate = rate
            best = config
    return GridSearchResult(best_config=best, table=table)
