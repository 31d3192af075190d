import numpy as np
import pytest

from loranpac.errors import IllConditionedStateError, InvalidInputError
from loranpac.features import FeatureBlock
from loranpac.solver import (
    ClassifierWeights,
    ContinualLearner,
    LabelFeatureCovariance,
    TruncationPolicy,
    accumulate_covariance,
    schedule_k,
)


def block(rng, E, labels, task_id=0):
    labels = np.asarray(labels)
    return FeatureBlock(H=rng.standard_normal((E, len(labels))), labels=labels, task_id=task_id)


def test_policy_validation():
    TruncationPolicy(zeta=0.0)
    TruncationPolicy(zeta=0.999)
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(InvalidInputError):
            TruncationPolicy(zeta=bad)
    with pytest.raises(InvalidInputError):
        TruncationPolicy(r_max=0)


def test_schedule_k_values():
    # hand-computed: k = max(1, min(r_max, ceil((1 - zeta) min(E, M))))
    p = TruncationPolicy(zeta=0.25, r_max=10000)
    assert schedule_k(p, E=1000, M=40) == 30
    assert schedule_k(p, E=1000, M=41) == 31  # ceil(30.75)
    assert schedule_k(p, E=20, M=500) == 15  # E caps min(E, M)
    assert schedule_k(TruncationPolicy(zeta=0.0, r_max=7), E=100, M=50) == 7
    assert schedule_k(TruncationPolicy(zeta=0.99), E=10, M=10) == 1
    with pytest.raises(InvalidInputError):
        schedule_k(p, E=10, M=0)


def test_covariance_matches_dense_onehot_product():
    rng = np.random.default_rng(0)
    H = rng.standard_normal((6, 40))
    rows = rng.integers(0, 5, size=40)
    cov = accumulate_covariance(LabelFeatureCovariance.empty(6), H, rows)
    Y = np.zeros((5, 40))
    Y[rows, np.arange(40)] = 1.0
    assert np.allclose(cov.J, Y @ H.T)


def test_covariance_grows_by_zero_rows():
    rng = np.random.default_rng(1)
    cov = LabelFeatureCovariance.empty(4)
    cov = accumulate_covariance(cov, rng.standard_normal((4, 5)), np.zeros(5, dtype=int))
    assert cov.n_classes == 1
    cov2 = accumulate_covariance(cov, rng.standard_normal((4, 3)), np.full(3, 2))
    assert cov2.n_classes == 3
    assert np.allclose(cov2.J[0], cov.J[0])  # old rows untouched
    assert np.allclose(cov2.J[1], 0.0)  # unseen class stays zero


def test_classifier_matches_minnorm_without_truncation():
    # zeta=0 over a stream with M <= E and well-conditioned features
    # reproduces the batch minimum-norm solution exactly
    rng = np.random.default_rng(2)
    E = 50
    learner = ContinualLearner(E=E, policy=TruncationPolicy(zeta=0.0, r_max=10**9))
    blocks = [block(rng, E, rng.integers(0, 4, size=10), task_id=i) for i in range(3)]
    for b in blocks:
        learner.observe_task(b)
    W = learner.classifier().W

    H = np.hstack([b.H for b in blocks])
    labels = np.concatenate([b.labels for b in blocks])
    rows = np.array([learner.class_map[int(x)] for x in labels])
    Y = np.zeros((learner.cov.n_classes, H.shape[1]))
    Y[rows, np.arange(H.shape[1])] = 1.0
    W_ref = Y @ np.linalg.pinv(H)
    assert np.linalg.norm(W - W_ref) <= 1e-8 * np.linalg.norm(W_ref)


def test_class_rows_first_seen_order():
    rng = np.random.default_rng(3)
    learner = ContinualLearner(E=8, policy=TruncationPolicy(zeta=0.0, r_max=10**9))
    learner.observe_task(block(rng, 8, [7, 7, 3]))
    learner.observe_task(block(rng, 8, [3, 1], task_id=1))
    assert learner.class_map == {7: 0, 3: 1, 1: 2}
    assert list(learner.row_to_label()) == [7, 3, 1]


def test_ill_conditioned_state_raises():
    # near-duplicate columns at zeta=0 leave a ~0 singular value in the state
    rng = np.random.default_rng(4)
    h = rng.standard_normal((10, 1))
    H = np.hstack([h, h * (1 + 1e-16), rng.standard_normal((10, 1))])
    learner = ContinualLearner(E=10, policy=TruncationPolicy(zeta=0.0, r_max=10**9))
    learner.observe_task(FeatureBlock(H=H, labels=np.array([0, 0, 1]), task_id=0))
    with pytest.raises(IllConditionedStateError):
        learner.classifier()


def test_predict_single_and_batch():
    W = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    clf = ClassifierWeights(W=W, t=1)
    assert clf.predict(np.array([2.0, 0.0])) == 0
    assert clf.predict(np.array([0.0, 2.0])) == 1
    out = clf.predict(np.array([[2.0, 0.0], [0.0, 2.0]]).T)
    assert list(out) == [0, 1]
    # tie goes to the lowest row index
    assert clf.predict(np.array([1.0, 1.0])) == 0
