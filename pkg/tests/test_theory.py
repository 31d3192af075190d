import math

import numpy as np
import pytest

from loranpac import itsvd, theory
from loranpac.errors import InvalidInputError, SizeCapError
from loranpac.features import FeatureBlock
from loranpac.solver import ContinualLearner, TruncationPolicy


def diagnostic_run(rng, E, sizes, zeta, r_max=10**6):
    learner = ContinualLearner(
        E=E, policy=TruncationPolicy(zeta=zeta, r_max=r_max), record_diagnostics=True
    )
    for i, m in enumerate(sizes):
        H = rng.standard_normal((E, m))
        learner.observe_task(FeatureBlock(H=H, labels=np.zeros(m, dtype=int), task_id=i))
    return learner


def test_make_report_semantics():
    assert theory.make_report("x", 1.0, 2.0).satisfied
    assert not theory.make_report("x", 2.0, 1.0).satisfied
    # exact equality passes via the relative slack
    assert theory.make_report("x", 1.0, 1.0).satisfied
    # roundoff-scale actual against a zero bound needs the atol escape hatch
    assert not theory.make_report("x", 1e-18, 0.0).satisfied
    assert theory.make_report("x", 1e-18, 0.0, atol=1e-12).satisfied
    # MC stderr widens the acceptance band by 3 standard errors
    assert theory.make_report("x", 1.25, 1.0, mc_stderr=0.1).satisfied
    assert not theory.make_report("x", 1.35, 1.0, mc_stderr=0.1).satisfied


def test_ledger_hand_computed():
    led = theory.TheoryLedger()
    led.record_truncation(np.array([9.0, 4.0, 1.0]), k=2, M=3)
    led.record_truncation(np.array([10.0, 6.0, 3.0, 0.5]), k=2, M=6)
    # a_t sums the largest truncated eigenvalue per task
    assert led.a(0) == 0.0
    assert led.a(1) == 1.0
    assert led.a(2) == 4.0
    # gamma_1 = 1; gamma_2 = min-preserved(2) / max past increment = 6 / 1
    assert led.gamma(1) == 1.0
    assert led.gamma(2) == 6.0
    # cross term: min{M_1 - k_1, 1 * k_2} = min{1, 2}
    assert led.cross_term(1) == 0
    assert led.cross_term(2) == 1
    rows = led.rows()
    assert rows[1]["a"] == 4.0 and rows[1]["gamma"] == 6.0


def test_ledger_gamma_infinite_when_nothing_truncated():
    led = theory.TheoryLedger()
    led.record_truncation(np.array([4.0, 2.0]), k=2, M=2)  # nothing truncated
    led.record_truncation(np.array([5.0, 3.0, 0.0]), k=3, M=4)  # zero truncated
    led.record_truncation(np.array([6.0, 1.0]), k=1, M=6)
    assert math.isinf(led.gamma(2))
    assert math.isinf(led.gamma(3))
    assert led.a(2) == 0.0
    assert led.a(3) == 1.0  # task 3 truncates a nonzero eigenvalue


def test_ledger_rejects_unsorted_spectrum():
    with pytest.raises(InvalidInputError):
        theory.TheoryLedger().record_truncation(np.array([1.0, 2.0]), k=1, M=2)


def test_lemma1_identity_random_stream():
    rng = np.random.default_rng(0)
    learner = diagnostic_run(rng, E=40, sizes=[10, 12, 8], zeta=0.4)
    H_blocks = [h for h, _ in learner.task_log]
    res = theory.lemma1_residual(H_blocks, learner.state, learner.tail_log)
    assert res <= 1e-6


def test_projection_bound_exact_equality_at_t1():
    # single task with truncation: LHS equals M_1 - k_1 exactly
    rng = np.random.default_rng(1)
    learner = diagnostic_run(rng, E=30, sizes=[20], zeta=0.5)
    H_blocks = [h for h, _ in learner.task_log]
    report = theory.eval_projection_bound(learner.state, H_blocks, learner.ledger)
    M, k = learner.state.M, learner.state.k
    assert report.satisfied
    assert report.actual_value == pytest.approx(M - k, rel=1e-6)


def test_materialization_cap():
    state = itsvd.init(np.random.default_rng(2).standard_normal((10, 4)), 2)[0]
    big = type(state)(U=np.zeros((5000, 1)), S=np.ones(1), M=1, t=1, k_history=(1,))
    with pytest.raises(SizeCapError):
        theory.lemma1_residual([np.zeros((5000, 1))], big, [])


def test_gaussian_bounds_reject_negative_nu():
    rng = np.random.default_rng(3)
    learner = diagnostic_run(rng, E=20, sizes=[10], zeta=0.25)
    H = learner.task_log[0][0]
    with pytest.raises(InvalidInputError):
        theory.eval_gaussian_bounds(
            "thm3", np.zeros((2, 20)), -0.1, learner.ledger, H, learner.state, rng
        )


def test_training_bound_zero_actual_without_truncation():
    # zeta=0, M < E, noiseless: the continual solution interpolates, so the
    # actual training MSE is roundoff and the bound terms are all zero
    rng = np.random.default_rng(4)
    learner = diagnostic_run(rng, E=50, sizes=[10, 10], zeta=0.0)
    H = np.hstack([h for h, _ in learner.task_log])
    W_star = rng.standard_normal((3, 50))
    Y = W_star @ H
    report = theory.eval_training_bound(
        W_star, np.zeros((3, 0)), learner.ledger, H, Y, learner.state
    )
    assert report.satisfied
    assert report.actual_value < 1e-12
    assert report.bound_value == 0.0


def test_batch_gap_and_effective_ranks():
    H = np.diag([3.0, 2.0, 1.0])
    assert theory.batch_gap(H, 1) == pytest.approx(9.0 - 4.0)
    assert theory.batch_gap(H, 3) == pytest.approx(1.0)
    eig = np.array([4.0, 2.0, 0.0])
    ranks = theory.effective_ranks(eig)
    assert ranks[0] == pytest.approx(6.0 / 4.0)
    assert ranks[1] == pytest.approx(2.0 / 2.0)
    assert np.isnan(ranks[2])
    rows = theory.spectrum_rows(eig)
    assert rows[0][0] == 1 and rows[0][1] == 4.0


def test_gram_spectrum_zero_pads():
    rng = np.random.default_rng(5)
    H = rng.standard_normal((4, 9))
    eig = theory.gram_spectrum(H)
    assert len(eig) == 9
    assert np.all(eig[4:] == 0.0)
    assert np.allclose(eig[:4], np.linalg.svd(H, compute_uv=False) ** 2)
