"""DeepLIFT-rescale attributions averaged over a background set, global
per-class feature importance, and top-k feature selection.

Attributions are computed per (explained sample, baseline) pair by
propagating multipliers backward through the network: dense layers pass
their weights, ReLU layers apply the rescale rule (delta-output over
delta-input, falling back to the local derivative at the interval midpoint
when the input difference is tiny). Averaging the per-baseline results
over the background gives the reported values. The default attribution
target is the pre-softmax logit of the requested class, for which the sum
of attributions matches the logit difference to the baseline exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .network import as_network, softmax
from .numerics import coerce_rng
from .parallel import parallel_map
from .validation import check_matrix

BASELINE_CHUNK = 8


@dataclass
class BackgroundSet:
    """Reference samples defining the baseline expectation."""

    samples: np.ndarray
    description: str = ""
    seed: int = None


@dataclass
class AttributionResult:
    """Per-sample, per-feature attributions for one or more output units.

    ``phi`` has shape (n_explained, n_features, len(output_units)).
    """

    phi: np.ndarray
    output_units: tuple
    target_output: str = "logit"
    explained_indices: np.ndarray = None


@dataclass
class GlobalImportance:
    """Mean-|attribution| scores per (class, feature) and the derived ranking.

    ``ranking`` sorts features by descending overall score with ties broken
    by ascending feature index.
    """

    class_scores: np.ndarray   # (n_classes, n_features)
    overall: np.ndarray        # (n_features,)
    ranking: np.ndarray        # (n_features,) feature indices
    aggregate: str = "sum"


def select_background(X, n_bg, rng):
    """Uniform subsample without replacement from the training features."""
    X = check_matrix(X)
    n_bg = int(n_bg)
    if n_bg < 1:
        raise ValueError("background size must be >= 1")
    if n_bg > X.shape[0]:
        raise ValueError(f"background size {n_bg} exceeds {X.shape[0]} rows")
    rng = coerce_rng(rng, "background")
    idx = np.sort(rng.choice(X.shape[0], n_bg, replace=False))
    return BackgroundSet(
        samples=X[idx],
        description=f"{n_bg} of {X.shape[0]} training rows, uniform without replacement",
        seed=rng.seed,
    )


class DeepShapExplainer:
    """Attribution engine for a trained network and a fixed background set."""

    def __init__(self, model, background, delta_tol=1e-7, target_output="logit"):
        self.network = as_network(model)
        samples = background.samples if isinstance(background, BackgroundSet) else background
        self.background = check_matrix(samples, "background")
        if self.background.shape[0] < 1:
            raise ValueError("background must contain at least one sample")
        if self.background.shape[1] != self.network.input_dim:
            raise ShapeError(
                f"background width {self.background.shape[1]} != model input "
                f"{self.network.input_dim}"
            )
        if target_output not in ("logit", "prob"):
            raise ValueError(f"target_output must be 'logit' or 'prob', got {target_output!r}")
        self.delta_tol = float(delta_tol)
        self.target_output = target_output

    def _rescale_multipliers(self, fx, fb):
        rescales = []
        for z_x, z_b in zip(fx.preacts, fb.preacts):
            dz = z_x - z_b
            if self.network.hidden_activation == "relu":
                da = np.maximum(z_x, 0.0) - np.maximum(z_b, 0.0)
                midpoint_deriv = (0.5 * (z_x + z_b) > 0.0).astype(np.float64)
            else:
                da = dz
                midpoint_deriv = np.ones_like(dz)
            stable = np.abs(dz) > self.delta_tol
            safe = np.where(stable, dz, 1.0)
            rescales.append(np.where(stable, da / safe, midpoint_deriv))
        return rescales

    def _attribute_baseline(self, X, fx, baseline, output_units):
        net = self.network
        fb = net.forward(baseline[None, :])
        rescales = self._rescale_multipliers(fx, fb)
        diff = X - baseline
        n = X.shape[0]
        phi = np.empty((n, net.input_dim, len(output_units)))
        for ui, unit in enumerate(output_units):
            if self.target_output == "logit":
                m = np.zeros((n, net.output_dim))
                m[:, unit] = 1.0
            else:
                p_mid = softmax(0.5 * (fx.logits + fb.logits))
                m = -p_mid[:, [unit]] * p_mid
                m[:, unit] += p_mid[:, unit]
            for l in range(len(net.weights) - 1, -1, -1):
                m = m @ net.weights[l].T
                if l > 0:
                    m = m * rescales[l - 1]
            phi[:, :, ui] = m * diff
        return phi

    def shap_values(self, X, output_units=None, workers=1):
        """Attribute each explained row against the background average.

        Baselines are processed in fixed-size chunks and reduced in chunk
        order, so the result does not depend on the worker count.
        """
        X = check_matrix(X)
        if X.shape[1] != self.network.input_dim:
            raise ShapeError(
                f"explained width {X.shape[1]} != model input {self.network.input_dim}"
            )
        if output_units is None:
            output_units = tuple(range(self.network.output_dim))
        else:
            output_units = tuple(int(u) for u in output_units)
            for u in output_units:
                if not 0 <= u < self.network.output_dim:
                    raise ValueError(f"output unit {u} out of range")
        fx = self.network.forward(X)
        if not np.all(np.isfinite(fx.logits)):
            raise ValueError("non-finite activations in explained forward pass")

        chunks = [
            self.background[start:start + BASELINE_CHUNK]
            for start in range(0, self.background.shape[0], BASELINE_CHUNK)
        ]

        def chunk_sum(chunk):
            total = np.zeros((X.shape[0], self.network.input_dim, len(output_units)))
            for baseline in chunk:
                total += self._attribute_baseline(X, fx, baseline, output_units)
            return total

        partials = parallel_map(chunk_sum, chunks, workers=workers)
        phi = partials[0]
        for part in partials[1:]:
            phi = phi + part
        phi /= self.background.shape[0]
        return AttributionResult(phi=phi, output_units=output_units,
                                 target_output=self.target_output)

    def completeness_delta(self, X, result):
        """|sum of attributions - (target(x) - mean target(background))|."""
        X = check_matrix(X)
        fx = self.network.forward(X)
        fb = self.network.forward(self.background)
        if result.target_output == "logit":
            out_x, out_b = fx.logits, fb.logits
        else:
            out_x, out_b = fx.probs, fb.probs
        units = list(result.output_units)
        expected = out_x[:, units] - out_b[:, units].mean(axis=0)
        return np.abs(result.phi.sum(axis=1) - expected)


def global_importance(results, n_classes=None, aggregate="sum"):
    """Combine per-class attributions into one global feature ranking.

    Accepts a single AttributionResult covering several classes or a list
    of results; together they must cover every class exactly once over the
    same explained set.
    """
    if isinstance(results, AttributionResult):
        results = [results]
    if aggregate not in ("sum", "mean", "max"):
        raise ValueError(f"aggregate must be sum, mean or max, got {aggregate!r}")
    n_rows = results[0].phi.shape[0]
    n_features = results[0].phi.shape[1]
    per_unit = {}
    for result in results:
        if result.phi.shape[0] != n_rows or result.phi.shape[1] != n_features:
            raise ShapeError("attribution results cover different explained sets")
        for ui, unit in enumerate(result.output_units):
            if unit in per_unit:
                raise ValueError(f"class {unit} attributed more than once")
            per_unit[unit] = np.abs(result.phi[:, :, ui]).mean(axis=0)
    if n_classes is None:
        n_classes = max(per_unit) + 1
    missing = sorted(set(range(n_classes)) - set(per_unit))
    if missing:
        raise ValueError(f"attributions missing for classes {missing}")
    class_scores = np.vstack([per_unit[c] for c in range(n_classes)])
    if aggregate == "sum":
        overall = class_scores.sum(axis=0)
    elif aggregate == "mean":
        overall = class_scores.mean(axis=0)
    else:
        overall = class_scores.max(axis=0)
    ranking = np.lexsort((np.arange(n_features), -overall))
    return GlobalImportance(class_scores=class_scores, overall=overall,
                            ranking=ranking, aggregate=aggregate)


def top_k_features(importance, k):
    """First k entries of the global ranking."""
    n_features = importance.ranking.shape[0]
    k = int(k)
    if not 1 <= k <= n_features:
        raise ValueError(f"k must be in [1, {n_features}], got {k}")
    return [int(i) for i in importance.ranking[:k]]
