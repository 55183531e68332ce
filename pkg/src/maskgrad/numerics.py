"""Dense float64 matrix helpers and labeled, reproducible random streams."""

import hashlib

import numpy as np

from .errors import ShapeError


def as_matrix(values, name="matrix"):
    """Coerce ``values`` to a 2-D float64 array, rejecting non-finite entries."""
    out = np.asarray(values, dtype=np.float64)
    if out.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {out.shape}")
    if out.size and not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite values")
    return out


def matmul(a, b):
    """Matrix product with shape validation and a finiteness guarantee."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}"
        )
    out = a @ b
    if out.size and not np.all(np.isfinite(out)):
        raise ValueError("matrix product overflowed to non-finite values")
    return out


def transpose(a):
    return as_matrix(a).T.copy()


def identity(n):
    return np.eye(int(n), dtype=np.float64)


def _label_entropy(label):
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


class RngStream:
    """Deterministic random stream keyed by (seed, label).

    The same (seed, label) pair always replays the same value sequence,
    while distinct labels derived from one root seed give statistically
    independent streams. Every stochastic stage of the pipeline owns its
    own labeled stream, so any stage can be re-run in isolation and
    reproduce its draws exactly.
    """

    def __init__(self, seed, label="root"):
        self.seed = int(seed)
        self.label = str(label)
        entropy = (self.seed % (1 << 64), _label_entropy(self.label))
        self._generator = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy))
        )

    def __repr__(self):
        return f"RngStream(seed={self.seed}, label={self.label!r})"

    def child(self, label):
        """Derive an independent stream labeled under this one."""
        return RngStream(self.seed, f"{self.label}/{label}")

    def uniform01(self, n):
        return self._generator.random(int(n))

    def standard_normal(self, n):
        return self._generator.standard_normal(int(n))

    def integers(self, low, high, size=None):
        return self._generator.integers(low, high, size=size)

    def permutation(self, n):
        return self._generator.permutation(int(n))

    def choice(self, n, size, replace=False):
        return self._generator.choice(int(n), size=int(size), replace=replace)


def coerce_rng(rng, label="root"):
    """Accept an RngStream, an integer seed, or None (seed 0)."""
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0, label)
    return RngStream(int(rng), label)
