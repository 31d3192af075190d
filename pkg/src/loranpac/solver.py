"""Continual least-squares learner over truncated incremental SVD factors.

The learner consumes lifted feature blocks task by task, maintains the
truncated factor state and the label-feature covariance J = Y H^T, and forms
the classifier W = J U diag(S^-2) U^T on demand. Prediction is the row-argmax
of W h.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import itsvd
from .errors import IllConditionedStateError, InvalidInputError
from .theory import TheoryLedger

SINGULAR_FLOOR = 1e-14


@dataclass(frozen=True)
class TruncationPolicy:
    """zeta is the truncation percentage, r_max the hard rank cap."""

    zeta: float = 0.25
    r_max: int = 10000

    def __post_init__(self):
        if not 0.0 <= self.zeta < 1.0:
            raise InvalidInputError(
                f"zeta must be in [0, 1); zeta={self.zeta} would truncate everything"
            )
        if self.r_max < 1:
            raise InvalidInputError(f"r_max must be >= 1, got {self.r_max}")


def schedule_k(policy, E, M):
    """Number of SVD factors to preserve after M total samples."""
    if M < 1:
        raise InvalidInputError(f"M must be >= 1, got {M}")
    k = math.ceil((1.0 - policy.zeta) * min(E, M))
    return max(1, min(policy.r_max, k))


@dataclass
class LabelFeatureCovariance:
    """J = sum over samples of onehot(label) h^T, with rows appended per new class."""

    J: np.ndarray
    n_classes: int

    @classmethod
    def empty(cls, dim):
        return cls(J=np.zeros((0, dim)), n_classes=0)


def accumulate_covariance(cov, H, rows):
    """Add each column of H to the covariance row given by rows (padded with zeros
    for rows beyond the current class count)."""
    H = np.asarray(H, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    if H.shape[0] != cov.J.shape[1]:
        raise InvalidInputError(
            f"feature dim {H.shape[0]} != covariance dim {cov.J.shape[1]}"
        )
    c_new = max(cov.n_classes, int(rows.max()) + 1)
    J = np.vstack([cov.J, np.zeros((c_new - cov.n_classes, cov.J.shape[1]))])
    np.add.at(J, rows, H.T)
    return LabelFeatureCovariance(J=J, n_classes=c_new)


@dataclass(frozen=True)
class ClassifierWeights:
    W: np.ndarray  # c x E
    t: int

    def predict(self, h):
        h = np.asarray(h, dtype=np.float64)
        if h.shape[0] != self.W.shape[1]:
            raise InvalidInputError(
                f"feature length {h.shape[0]} != classifier dim {self.W.shape[1]}"
            )
        scores = self.W @ h
        # argmax breaks ties by lowest class id along axis 0
        return np.argmax(scores, axis=0) if scores.ndim > 1 else int(np.argmax(scores))


@dataclass
class ContinualLearner:
    """The continual solver: feed observe_task per task, ask classifier() on demand."""

    E: int
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    record_diagnostics: bool = False

    def __post_init__(self):
        self.state = None
        self.cov = LabelFeatureCovariance.empty(self.E)
        self.class_map = {}  # global label -> row index (first-seen order)
        self.ledger = TheoryLedger()
        self.task_log = []  # (H_t, k_t) when diagnostics on
        self.tail_log = []  # per-step discarded factors when diagnostics on

    @property
    def M(self):
        return 0 if self.state is None else self.state.M

    @property
    def t(self):
        return 0 if self.state is None else self.state.t

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
            raise InvalidInputError(f"block dim {block.dim} != learner dim {self.E}")
        m = block.m
        k = schedule_k(self.policy, self.E, self.M + m)
        if self.state is None:
            k = min(k, min(self.E, m))
            self.state, info = itsvd.init(block.H, k, capture_tail=self.record_diagnostics)
        else:
            k = min(k, self.state.k + m)
            self.state, info = itsvd.update(
                self.state, block.H, k, capture_tail=self.record_diagnostics
            )
        self.ledger.record_truncation(info.spectrum, self.state.k, self.state.M)
        if self.record_diagnostics:
            self.task_log.append((block.H.copy(), self.state.k))
            self.tail_log.append((info.tail_u, info.tail_s))
        rows = self._rows_for(block.labels)
        self.cov = accumulate_covariance(self.cov, block.H, rows)
        return self

    def classifier(self):
        if self.state is None:
            raise InvalidInputError("no task observed yet")
        S = self.state.S
        if S[-1] < SINGULAR_FLOOR * S[0]:
            raise IllConditionedStateError(
                f"singular value {S[-1]:.3e} below floor {SINGULAR_FLOOR:.0e} * {S[0]:.3e}; "
                "state is numerically unusable (typically zeta=0 misuse)"
            )
        W = (self.cov.J @ self.state.U) * S**-2 @ self.state.U.T
        return ClassifierWeights(W=W, t=self.state.t)

    def label_of_row(self, row):
        for lab, r in self.class_map.items():
            if r == row:
                return lab
        raise KeyError(row)

    def row_to_label(self):
        out = np.empty(len(self.class_map), dtype=np.int64)
        for lab, r in self.class_map.items():
            out[r] = lab
        return out
