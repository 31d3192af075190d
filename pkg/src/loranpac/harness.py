"""Class-incremental experiment driver: B-q1/Inc-q2 stream construction,
per-task evaluation, accuracy matrix, and the two summary metrics."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, LoRanPacError
from .features import FeatureBlock

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Protocol:
    q1: int = 0  # first-task class count; 0 means uniform q2 everywhere
    q2: int = 1
    order_seed: int = 0
    mode: str = "CIL"

    def __post_init__(self):
        if self.q2 < 1:
            raise InvalidInputError("q2 must be >= 1")
        if self.q1 < 0:
            raise InvalidInputError("q1 must be >= 0")
        if self.mode not in ("CIL", "DIL"):
            raise InvalidInputError(f"unknown mode {self.mode!r}")

    @classmethod
    def parse(cls, text, order_seed=0, mode="CIL"):
        """Parse the 'B<q1>-Inc<q2>' shorthand."""
        try:
            b, inc = text.split("-")
            return cls(q1=int(b[1:]), q2=int(inc[3:]), order_seed=order_seed, mode=mode)
        except (ValueError, IndexError) as exc:
            raise InvalidInputError(f"cannot parse protocol {text!r}") from exc


@dataclass
class TaskData:
    """One task's train and test features (already lifted)."""

    train: FeatureBlock
    test: FeatureBlock


def class_partition(n_classes, protocol):
    """Deterministic class-id groups per task under the protocol's seed."""
    first = protocol.q1 if protocol.q1 > 0 else protocol.q2
    if n_classes < first + protocol.q2:
        raise InvalidInputError(
            f"{n_classes} classes cannot fill a first task of {first} plus one of {protocol.q2}"
        )
    order = np.random.default_rng(protocol.order_seed).permutation(n_classes)
    groups = [order[:first]]
    pos = first
    while pos < n_classes:
        groups.append(order[pos : pos + protocol.q2])
        pos += protocol.q2
    return [np.sort(g) for g in groups]


def build_stream(train_labels, train_X, test_labels, test_X, protocol):
    """Split a labeled dataset into an ordered CIL task list."""
    classes = np.unique(train_labels)
    groups = class_partition(len(classes), protocol)
    tasks = []
    for task_id, group in enumerate(groups):
        group_classes = classes[group]
        tr = np.isin(train_labels, group_classes)
        te = np.isin(test_labels, group_classes)
        tasks.append(
            TaskData(
                train=FeatureBlock(train_X[:, tr], train_labels[tr], task_id=task_id),
                test=FeatureBlock(test_X[:, te], test_labels[te], task_id=task_id),
            )
        )
    return tasks


def build_dil_stream(domains):
    """Domain-incremental stream: each (train, test) FeatureBlock pair is one
    task; classes repeat across domains. Evaluation still walks all seen tasks,
    which pools every seen domain's test split."""
    return [TaskData(train=tr, test=te) for tr, te in domains]


@dataclass
class AccuracyMatrix:
    A: np.ndarray  # T x T, upper triangular; A[i, t] = accuracy on task i after task t
    errors: list = field(default_factory=list)

    @property
    def T(self):
        return self.A.shape[0]

    def final_accuracy(self):
        col = self.A[:, -1]
        if np.any(np.isnan(col)):
            raise InvalidInputError("accuracy matrix incomplete")
        return float(np.mean(col))

    def total_accuracy(self):
        """Mean over all filled upper-triangular entries."""
        iu = np.triu_indices(self.T)
        vals = self.A[iu]
        if np.any(np.isnan(vals)):
            raise InvalidInputError("accuracy matrix incomplete")
        return float(np.mean(vals))


def _evaluate(learner, block):
    """Top-1 accuracy of the learner on one test block; batch prediction."""
    if hasattr(learner, "classifier"):
        weights = learner.classifier()
        rows = weights.predict(block.H)
        predicted = learner.row_to_label()[rows] if hasattr(learner, "row_to_label") else rows
    else:
        predicted = learner.predict(block.H)
    return float(np.mean(predicted == block.labels))


def run(stream, learner, evaluate=None):
    """Learn the stream task by task, evaluating all seen tasks after each one.

    Learner failures (e.g. ill-conditioned classifier formation with zeta=0)
    are recorded and the corresponding column filled with zeros, so unstable
    configurations still produce a complete accuracy matrix.
    """
    evaluate = evaluate or _evaluate
    T = len(stream)
    A = np.full((T, T), np.nan)
    errors = []
    for t, task in enumerate(stream):
        learner.observe_task(task.train)
        for i in range(t + 1):
            try:
                A[i, t] = evaluate(learner, stream[i].test)
            except LoRanPacError as exc:
                log.warning("evaluation failed at task %d (after task %d): %s", i, t, exc)
                errors.append({"task": i, "after": t, "error": str(exc)})
                A[i, t] = 0.0
    return AccuracyMatrix(A=A, errors=errors)


def final_accuracy(matrix):
    return matrix.final_accuracy()


def total_accuracy(matrix):
    return matrix.total_accuracy()
