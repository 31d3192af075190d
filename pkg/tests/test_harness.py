import numpy as np
import pytest

from loranpac import harness
from loranpac.baselines import NearestClassMean
from loranpac.errors import InvalidInputError
from loranpac.features import FeatureBlock
from loranpac.harness import AccuracyMatrix, Protocol, build_stream, class_partition, run
from loranpac.solver import ContinualLearner, TruncationPolicy


def test_protocol_parse():
    p = Protocol.parse("B16-Inc20")
    assert (p.q1, p.q2) == (16, 20)
    p = Protocol.parse("B0-Inc1", order_seed=3)
    assert (p.q1, p.q2, p.order_seed) == (0, 1, 3)
    for bad in ("B16", "Inc20", "B-Inc", "16-20"):
        with pytest.raises(InvalidInputError):
            Protocol.parse(bad)


def test_partition_196_classes():
    # 196 classes, first task 16, then 20 per task -> 10 tasks total
    groups = class_partition(196, Protocol(q1=16, q2=20))
    assert len(groups) == 10
    assert len(groups[0]) == 16
    assert all(len(g) == 20 for g in groups[1:])
    seen = np.concatenate(groups)
    assert sorted(seen) == list(range(196))


def test_partition_uniform_and_remainder():
    groups = class_partition(20, Protocol(q1=0, q2=1))
    assert len(groups) == 20 and all(len(g) == 1 for g in groups)
    # remainder classes form a smaller final task
    groups = class_partition(11, Protocol(q1=5, q2=3))
    assert [len(g) for g in groups] == [5, 3, 3]
    with pytest.raises(InvalidInputError):
        class_partition(3, Protocol(q1=2, q2=2))


def test_partition_seed_determinism():
    a = class_partition(30, Protocol(q1=10, q2=5, order_seed=1))
    b = class_partition(30, Protocol(q1=10, q2=5, order_seed=1))
    c = class_partition(30, Protocol(q1=10, q2=5, order_seed=2))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert any(not np.array_equal(x, y) for x, y in zip(a, c))


def test_build_stream_partitions_samples():
    rng = np.random.default_rng(0)
    train_labels = np.repeat(np.arange(6), 10)
    test_labels = np.repeat(np.arange(6), 4)
    stream = build_stream(
        train_labels,
        rng.standard_normal((5, 60)),
        test_labels,
        rng.standard_normal((5, 24)),
        Protocol(q1=0, q2=2),
    )
    assert len(stream) == 3
    total = sum(task.train.m for task in stream)
    assert total == 60
    # each task's train and test splits hold the same class set
    for task in stream:
        assert set(np.unique(task.train.labels)) == set(np.unique(task.test.labels))


def test_metrics_match_enumeration():
    A = np.array(
        [
            [0.9, 0.8, 0.7],
            [np.nan, 0.6, 0.5],
            [np.nan, np.nan, 0.4],
        ]
    )
    m = AccuracyMatrix(A=A)
    assert m.final_accuracy() == pytest.approx((0.7 + 0.5 + 0.4) / 3)
    assert m.total_accuracy() == pytest.approx((0.9 + 0.8 + 0.7 + 0.6 + 0.5 + 0.4) / 6)
    assert harness.final_accuracy(m) == m.final_accuracy()
    with pytest.raises(InvalidInputError):
        AccuracyMatrix(A=np.full((2, 2), np.nan)).total_accuracy()


def test_run_fills_upper_triangle():
    rng = np.random.default_rng(1)
    train_labels = np.repeat(np.arange(4), 15)
    test_labels = np.repeat(np.arange(4), 5)
    stream = build_stream(
        train_labels,
        rng.standard_normal((30, 60)) + train_labels,  # class-shifted features
        test_labels,
        rng.standard_normal((30, 20)) + test_labels,
        Protocol(q1=0, q2=2),
    )
    learner = ContinualLearner(E=30, policy=TruncationPolicy(zeta=0.25))
    matrix = run(stream, learner)
    assert matrix.T == 2
    assert not np.isnan(matrix.A[np.triu_indices(2)]).any()
    assert np.isnan(matrix.A[1, 0])


def test_run_with_predict_only_learner():
    rng = np.random.default_rng(2)
    train_labels = np.repeat(np.arange(4), 10)
    test_labels = np.repeat(np.arange(4), 5)
    # class means along distinct axes so cosine similarity separates them
    train_X = rng.standard_normal((8, 40)) * 0.1
    train_X[train_labels, np.arange(40)] += 5.0
    test_X = rng.standard_normal((8, 20)) * 0.1
    test_X[test_labels, np.arange(20)] += 5.0
    stream = build_stream(train_labels, train_X, test_labels, test_X, Protocol(q1=0, q2=2))
    matrix = run(stream, NearestClassMean(dim=8))
    assert matrix.final_accuracy() > 0.8


def test_dil_stream():
    rng = np.random.default_rng(3)
    domains = []
    for i in range(2):
        tr = FeatureBlock(rng.standard_normal((5, 8)), np.arange(8) % 2, task_id=i)
        te = FeatureBlock(rng.standard_normal((5, 4)), np.arange(4) % 2, task_id=i)
        domains.append((tr, te))
    stream = harness.build_dil_stream(domains)
    assert len(stream) == 2
    assert set(np.unique(stream[1].train.labels)) == {0, 1}
