"""Random ReLU feature lifting: h = relu(P x) with a fixed Gaussian embedding P."""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


@dataclass(frozen=True)
class RandomEmbedding:
    """A fixed E x d Gaussian embedding, reproducible from (seed, E, d)."""

    P: np.ndarray = field(repr=False)
    seed: int
    E: int
    d: int

    def config(self):
        """Serializable description; regenerating from it is bit-identical."""
        return {"seed": self.seed, "E": self.E, "d": self.d, "generator": "numpy-PCG64"}


def make_embedding(d, E, seed, allow_small_e=False):
    """Draw P in R^{ExD} with i.i.d. standard normal entries from a seeded PCG64.

    E >= d is required (the lifting regime); pass allow_small_e=True for
    ablations on raw or down-projected features.
    """
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    if E < d and not allow_small_e:
        raise InvalidInputError(f"E={E} < d={d}; pass allow_small_e=True to override")
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((E, d))
    return RandomEmbedding(P=P, seed=seed, E=E, d=d)


def lift(embedding, X):
    """Map raw features X (d x m) to random ReLU features relu(P X) (E x m)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != embedding.d:
        raise InvalidInputError(
            f"X must have {embedding.d} rows, got shape {X.shape}"
        )
    return np.maximum(embedding.P @ X, 0.0)


@dataclass
class FeatureBlock:
    """One task's features: H is (dim x m), labels are per-column class ids."""

    H: np.ndarray
    labels: np.ndarray
    task_id: int = 0

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.H.ndim != 2 or self.H.shape[1] < 1:
            raise InvalidInputError(f"feature block must have >= 1 column, got {self.H.shape}")
        if self.labels.shape != (self.H.shape[1],):
            raise InvalidInputError("labels must have one entry per feature column")
        if np.any(self.labels < 0):
            raise InvalidInputError("labels must be non-negative class ids")

    @property
    def dim(self):
        return self.H.shape[0]

    @property
    def m(self):
        return self.H.shape[1]
