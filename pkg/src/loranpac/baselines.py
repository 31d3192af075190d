"""Reference solvers evaluated on the same lifted features: offline min-norm,
incremental min-norm (zeta=0 path), ridge with cross-validated lambda,
offline truncated least squares, and nearest-class-mean."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .errors import InvalidInputError, NumericError
from .solver import ClassifierWeights, ContinualLearner, TruncationPolicy

PINV_FLOOR = 1e-12

DEFAULT_LAMBDA_GRID = tuple(10.0**p for p in range(-8, 9))


def minnorm_offline(H, Y):
    """Minimum-Frobenius-norm W with W H = Y (pseudoinverse of H)."""
    H = np.asarray(H, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    U, S, V = linalg.svd(H)
    keep = S > PINV_FLOOR * S[0]
    W = (Y @ (V[:, keep] / S[keep])) @ U[:, keep].T
    return ClassifierWeights(W=W, t=1)


def minnorm_continual(blocks, E):
    """Run the continual solver with zeta=0 and no rank cap (the unstable path
    whose instability the diagnostics reproduce). Returns the learner; the
    classifier call may raise IllConditionedStateError on bad streams."""
    learner = ContinualLearner(E=E, policy=TruncationPolicy(zeta=0.0, r_max=10**9))
    for block in blocks:
        learner.observe_task(block)
    return learner


def truncated_offline(H, Y, k):
    """W = Y H^T (U_k S_k^-2 U_k^T) via the top-k batch SVD of H."""
    H = np.asarray(H, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if not 1 <= k <= min(H.shape):
        raise InvalidInputError(f"k={k} out of range [1, {min(H.shape)}]")
    U, S, _ = linalg.truncated_svd(H, k, compute_v=False)
    positive = S > 0
    U, S = U[:, positive], S[positive]
    W = ((Y @ H.T) @ (U * S**-2)) @ U.T
    return ClassifierWeights(W=W, t=1)


@dataclass(frozen=True)
class RidgeConfig:
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    holdout_fraction: float = 0.1
    fixed_lambda: Optional[float] = None
    split_seed: int = 0

    def __post_init__(self):
        if self.fixed_lambda is None and len(self.lambda_grid) == 0:
            raise InvalidInputError("lambda grid is empty and no fixed lambda given")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise InvalidInputError("holdout_fraction must be in (0, 1)")


def _ridge_solve(G, J, lam):
    """Solve W (G + lam I) = J for W given the feature Gram G = H H^T."""
    A = G + lam * np.eye(G.shape[0])
    try:
        return np.linalg.solve(A, J.T).T
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"ridge solve failed at lambda={lam}") from exc


def _stratified_split(labels, fraction, seed):
    rng = np.random.default_rng(seed)
    holdout = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        n_hold = max(1, int(round(fraction * len(idx)))) if len(idx) > 1 else 0
        holdout.extend(rng.permutation(idx)[:n_hold])
    mask = np.zeros(len(labels), dtype=bool)
    mask[holdout] = True
    return ~mask, mask


def ridge_fit(H, Y, cfg=RidgeConfig(), labels=None):
    """Ridge via the normal equations W (H H^T + lam I) = Y H^T.

    Without a fixed lambda, selects the grid point with the best top-1
    accuracy on a deterministic stratified holdout, then refits on all data.
    Ties go to the smallest lambda. Returns (weights, chosen_lambda).
    """
    H = np.asarray(H, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if cfg.fixed_lambda is not None:
        lam = float(cfg.fixed_lambda)
        if lam <= 0:
            raise InvalidInputError("lambda must be positive")
        W = _ridge_solve(H @ H.T, Y @ H.T, lam)
        return ClassifierWeights(W=W, t=1), lam
    if any(lam <= 0 for lam in cfg.lambda_grid):
        raise InvalidInputError("lambda grid entries must be positive")

    if labels is None:
        labels = np.argmax(Y, axis=0)
    train_mask, hold_mask = _stratified_split(labels, cfg.holdout_fraction, cfg.split_seed)
    Htr, Ytr = H[:, train_mask], Y[:, train_mask]
    Hho, yho = H[:, hold_mask], labels[hold_mask]
    G, J = Htr @ Htr.T, Ytr @ Htr.T

    best_lam, best_acc = None, -1.0
    for lam in sorted(cfg.lambda_grid):
        W = _ridge_solve(G, J, lam)
        acc = float(np.mean(np.argmax(W @ Hho, axis=0) == yho)) if len(yho) else 0.0
        if acc > best_acc:
            best_lam, best_acc = lam, acc
    W = _ridge_solve(H @ H.T, Y @ H.T, best_lam)
    return ClassifierWeights(W=W, t=1), best_lam


@dataclass
class RidgeLearner:
    """Continual ridge baseline: maintains the feature Gram H H^T and the
    label-feature covariance, holds out a per-task validation slice, and
    selects lambda by holdout accuracy at classifier time.

    A recursive Woodbury-style update of the inverse is deliberately not used
    (numerically unstable); each classifier call solves the normal equations
    from the maintained covariances.
    """

    E: int
    cfg: RidgeConfig = field(default_factory=RidgeConfig)

    def __post_init__(self):
        self.G = np.zeros((self.E, self.E))
        self.J = np.zeros((0, self.E))
        self.class_map = {}
        self._holdout_H = []
        self._holdout_y = []
        self._task_counter = 0

    def _rows_for(self, labels):
        rows = np.empty(len(labels), dtype=np.int64)
        for i, lab in enumerate(labels):
            lab = int(lab)
            if lab not in self.class_map:
                self.class_map[lab] = len(self.class_map)
            rows[i] = self.class_map[lab]
        return rows

    def observe_task(self, block):
        if block.dim != self.E:
            raise InvalidInputError(f"block dim {block.dim} != {self.E}")
        rows = self._rows_for(block.labels)
        if self.cfg.fixed_lambda is None:
            train_mask, hold_mask = _stratified_split(
                rows, self.cfg.holdout_fraction, self.cfg.split_seed + self._task_counter
            )
            self._holdout_H.append(block.H[:, hold_mask])
            self._holdout_y.append(rows[hold_mask])
        else:
            train_mask = np.ones(block.m, dtype=bool)
        H, r = block.H[:, train_mask], rows[train_mask]
        self.G += H @ H.T
        c_new = max(self.J.shape[0], int(rows.max()) + 1)
        self.J = np.vstack([self.J, np.zeros((c_new - self.J.shape[0], self.E))])
        np.add.at(self.J, r, H.T)
        self._task_counter += 1
        return self

    def classifier(self):
        if self.cfg.fixed_lambda is not None:
            return ClassifierWeights(W=_ridge_solve(self.G, self.J, self.cfg.fixed_lambda), t=self._task_counter)
        Hho = np.hstack(self._holdout_H)
        yho = np.concatenate(self._holdout_y)
        best_lam, best_acc = None, -1.0
        for lam in sorted(self.cfg.lambda_grid):
            W = _ridge_solve(self.G, self.J, lam)
            acc = float(np.mean(np.argmax(W @ Hho, axis=0) == yho)) if len(yho) else 0.0
            if acc > best_acc:
                best_lam, best_acc = lam, acc
        self.chosen_lambda = best_lam
        return ClassifierWeights(W=_ridge_solve(self.G, self.J, best_lam), t=self._task_counter)

    def row_to_label(self):
        out = np.empty(len(self.class_map), dtype=np.int64)
        for lab, r in self.class_map.items():
            out[r] = lab
        return out


@dataclass
class NearestClassMean:
    """Running per-class feature means; prediction is max cosine similarity."""

    dim: int
    sums: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def observe_task(self, block):
        if block.dim != self.dim:
            raise InvalidInputError(f"block dim {block.dim} != {self.dim}")
        for cls in np.unique(block.labels):
            cols = block.H[:, block.labels == cls]
            self.sums[int(cls)] = self.sums.get(int(cls), np.zeros(self.dim)) + cols.sum(axis=1)
            self.counts[int(cls)] = self.counts.get(int(cls), 0) + cols.shape[1]
        return self

    def means(self):
        classes = sorted(self.sums)
        M = np.stack([self.sums[c] / self.counts[c] for c in classes], axis=0)
        return classes, M

    def predict(self, h):
        classes, M = self.means()
        h = np.asarray(h, dtype=np.float64)
        single = h.ndim == 1
        cols = h[:, None] if single else h  # dim x n
        norms = np.linalg.norm(M, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        hn = np.linalg.norm(cols, axis=0, keepdims=True)
        hn[hn == 0] = 1.0
        sims = (M / norms) @ (cols / hn)
        picks = np.argmax(sims, axis=0)  # ties -> lowest index -> lowest class id
        out = np.asarray([classes[p] for p in picks])
        return int(out[0]) if single else out
