"""Diagnostics for the truncated continual solver.

Tracks, per task, the spectrum slice discarded by truncation and derives the
two scalars the error bounds are built from: the accumulative error a_t (sum
of the largest truncated eigenvalue per task) and the eigengap ratio gamma_t
(minimum preserved eigenvalue over the largest eigenvalue ever truncated).
All bound evaluators compare a densely computed actual value against the
closed-form right-hand side and return a BoundReport.

Desk scale only: evaluators that materialize E x E or M x M matrices refuse
to run above the materialization cap.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError, SizeCapError

MATERIALIZATION_CAP = 4000
REL_SLACK = 1e-9
# the principal-angle computation sqrt(1 - sigma_min^2) cannot resolve angles
# below sqrt(machine eps) ~ 1.5e-8; subspace-drift reports use this floor
ANGLE_RESOLUTION = 1e-6


@dataclass(frozen=True)
class BoundReport:
    which: str
    actual_value: float
    bound_value: float
    satisfied: bool
    slack: float
    mc_stderr: float = 0.0
    note: str = ""


def make_report(which, actual, bound, mc_stderr=0.0, atol=0.0, note=""):
    tolerance = bound * (1.0 + REL_SLACK) + 3.0 * mc_stderr + atol
    return BoundReport(
        which=which,
        actual_value=float(actual),
        bound_value=float(bound),
        satisfied=bool(actual <= tolerance),
        slack=float(bound - actual),
        mc_stderr=float(mc_stderr),
        note=note,
    )


@dataclass
class TheoryLedger:
    """Per-task truncation record. Index 0 is task 1."""

    increments: list = field(default_factory=list)  # largest truncated eigenvalue
    min_preserved: list = field(default_factory=list)  # smallest kept eigenvalue
    truncated_slices: list = field(default_factory=list)
    ks: list = field(default_factory=list)
    Ms: list = field(default_factory=list)

    @property
    def t(self):
        return len(self.ks)

    def record_truncation(self, spectrum, k, M):
        """spectrum: eigenvalues of B_t B_t^T, descending (zeros implied beyond)."""
        spectrum = np.asarray(spectrum, dtype=np.float64)
        if np.any(np.diff(spectrum) > 0):
            raise InvalidInputError("spectrum must be sorted descending")
        inc = float(spectrum[k]) if k < len(spectrum) else 0.0
        self.increments.append(inc)
        self.min_preserved.append(float(spectrum[k - 1]) if k >= 1 else 0.0)
        self.truncated_slices.append(spectrum[k:].copy())
        self.ks.append(int(k))
        self.Ms.append(int(M))
        return self

    def a(self, t):
        """Accumulative error after t tasks (a_0 = 0)."""
        if t < 0 or t > self.t:
            raise InvalidInputError(f"t={t} outside [0, {self.t}]")
        return float(sum(self.increments[:t]))

    def gamma(self, t):
        """Eigengap ratio; 1 at t=1, +inf if nothing nonzero was ever truncated."""
        if not 1 <= t <= self.t:
            raise InvalidInputError(f"t={t} outside [1, {self.t}]")
        if t == 1:
            return 1.0
        denom = max(self.increments[: t - 1])
        if denom <= 0.0:
            return math.inf
        return self.min_preserved[t - 1] / denom

    def k(self, t):
        return self.ks[t - 1] if t >= 1 else 0

    def M(self, t):
        return self.Ms[t - 1] if t >= 1 else 0

    def cross_term(self, t):
        """min{M_{t-1} - k_{t-1}, (t-1) k_t}; zero at t=1 (M_0 = k_0 = 0)."""
        return min(self.M(t - 1) - self.k(t - 1), (t - 1) * self.k(t))

    def rows(self):
        """Flat per-task rows for CSV emission."""
        out = []
        for i in range(self.t):
            t = i + 1
            g = self.gamma(t)
            out.append(
                {
                    "task": t,
                    "M": self.Ms[i],
                    "k": self.ks[i],
                    "truncated_top": self.increments[i],
                    "min_preserved": self.min_preserved[i],
                    "a": self.a(t),
                    "gamma": g if math.isfinite(g) else float("inf"),
                }
            )
        return out


def _check_cap(E):
    if E > MATERIALIZATION_CAP:
        raise SizeCapError(f"E={E} exceeds dense-diagnostics cap {MATERIALIZATION_CAP}")


def _inv_gamma(g):
    return 0.0 if math.isinf(g) else 1.0 / g


def lemma1_residual(H_blocks, state, tails):
    """Relative Frobenius gap between H H^T - U S^2 U^T and the summed per-step
    truncated remainders (the exact-recurrence identity)."""
    H = np.hstack(H_blocks)
    _check_cap(H.shape[0])
    gram = H @ H.T
    lhs = gram - (state.U * state.S**2) @ state.U.T
    rhs = np.zeros_like(gram)
    for tail_u, tail_s in tails:
        if tail_u is not None and tail_u.shape[1] > 0:
            rhs += (tail_u * tail_s**2) @ tail_u.T
    denom = np.linalg.norm(gram, "fro")
    return float(np.linalg.norm(lhs - rhs, "fro") / denom) if denom > 0 else 0.0


def _solution_operator(state):
    """U diag(S^-2) U^T as an E x k, k x E factored pair (avoid E x E)."""
    return state.U * state.S**-2, state.U.T


def classifier_from(Y, H, state):
    """W = Y H^T U S^-2 U^T for densely known Y (the theory-side classifier)."""
    left, right = _solution_operator(state)
    return (Y @ (H.T @ left)) @ right


def eval_training_bound(W_star, E_noise, ledger, H, Y, state, atol=1e-12):
    """Training-MSE bound with deterministic (known) noise matrix."""
    t, M, k = state.t, state.M, state.k
    g = ledger.gamma(t)
    a_t, a_prev = ledger.a(t), ledger.a(t - 1)
    ig = _inv_gamma(g)
    cross = ledger.cross_term(t)
    Wt = classifier_from(Y, H, state)
    actual = np.linalg.norm(Wt @ H - Y, "fro") ** 2 / M
    w2 = np.linalg.norm(W_star, "fro") ** 2
    e2 = np.linalg.norm(E_noise, 2) ** 2 if E_noise.size else 0.0
    bound = 4.0 * w2 * (a_t / M + a_prev * (t - 1) * ig / M + a_prev * (t - 1) ** 2 * ig**2 / M)
    bound += 2.0 * e2 * ((M - k) / M + (t - 1) * cross * ig**2 / M)
    return make_report("thm1", actual, bound, atol=atol)


def _bias_variance_terms(ledger, H, state, Lambda):
    t, M, k = state.t, state.M, state.k
    g = ledger.gamma(t)
    ig = _inv_gamma(g)
    a_t, a_prev = ledger.a(t), ledger.a(t - 1)
    cross = ledger.cross_term(t)
    cov_err = np.linalg.norm(Lambda - (H @ H.T) / M, 2)
    mu_min = ledger.min_preserved[t - 1]
    bias = cov_err * (1.0 + (t - 1) ** 2 * ig**2)
    bias += a_t / M + a_prev * (t - 1) * ig / M + a_prev * (t - 1) ** 2 * ig**2 / M
    var = cov_err * (ig * cross + k) / mu_min
    var += k / M + ((t - 1) * ig**2 / M + 2.0 * ig / M) * cross
    return bias, var


def eval_test_bound(W_star, E_noise, ledger, H, Y, state, pool_h, pool_eps, atol=1e-12):
    """Test-MSE bound: Monte-Carlo actual over a held-out pool vs the
    bias/variance right-hand side with Lambda estimated from the same pool."""
    if pool_h.size == 0:
        raise InvalidInputError("empty holdout pool")
    _check_cap(H.shape[0])
    n = pool_h.shape[1]
    Lambda = pool_h @ pool_h.T / n
    bias, var = _bias_variance_terms(ledger, H, state, Lambda)
    Wt = classifier_from(Y, H, state)
    errs = Wt @ pool_h - (W_star @ pool_h + pool_eps)
    sq = np.sum(errs**2, axis=0)
    actual = float(np.mean(sq))
    stderr = float(np.std(sq, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    w2 = np.linalg.norm(W_star, "fro") ** 2
    e2 = np.linalg.norm(E_noise, 2) ** 2 if E_noise.size else 0.0
    eps2 = float(np.mean(np.sum(pool_eps**2, axis=0)))
    bound = 4.0 * w2 * bias + 4.0 * e2 * var + 2.0 * eps2
    return make_report("thm2", actual, bound, mc_stderr=stderr, atol=atol, note="estimate-vs-bound")


def eval_gaussian_bounds(which, W_star, nu, ledger, H, state, rng, n_draws=20,
                         pool_h=None, atol=1e-12):
    """Gaussian-noise bound variants (analytic noise expectation on the RHS).

    which: 'thm3' (training MSE vs Y), 'thm4' (training MSE vs W* H),
    'thm5' (test MSE; requires pool_h).
    """
    if nu < 0:
        raise InvalidInputError("nu must be >= 0")
    t, M, k = state.t, state.M, state.k
    c = W_star.shape[0]
    g = ledger.gamma(t)
    ig = _inv_gamma(g)
    a_t, a_prev = ledger.a(t), ledger.a(t - 1)
    cross = ledger.cross_term(t)
    w2 = np.linalg.norm(W_star, "fro") ** 2
    a_terms = a_t / M + a_prev * (t - 1) * ig / M + a_prev * (t - 1) ** 2 * ig**2 / M

    left, right = _solution_operator(state)
    HtK_left = H.T @ left  # M x k
    clean = W_star @ H

    draws = []
    for _ in range(n_draws):
        E = nu * rng.standard_normal((c, M)) if nu > 0 else np.zeros((c, M))
        Y = clean + E
        Wt = (Y @ HtK_left) @ right
        if which == "thm3":
            draws.append(np.linalg.norm(Wt @ H - Y, "fro") ** 2 / M)
        elif which == "thm4":
            draws.append(np.linalg.norm(Wt @ H - clean, "fro") ** 2 / M)
        elif which == "thm5":
            if pool_h is None or pool_h.size == 0:
                raise InvalidInputError("thm5 requires a holdout pool")
            n = pool_h.shape[1]
            eps = nu * rng.standard_normal((c, n)) if nu > 0 else np.zeros((c, n))
            errs = Wt @ pool_h - (W_star @ pool_h + eps)
            draws.append(float(np.mean(np.sum(errs**2, axis=0))))
        else:
            raise InvalidInputError(f"unknown bound id {which!r}")
    draws = np.asarray(draws)
    actual = float(np.mean(draws))
    stderr = float(np.std(draws, ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else 0.0

    if which == "thm3":
        bound = 2.0 * w2 * a_terms
        bound += c * nu**2 * ((M - k) / M + (t - 1) * cross * ig**2 / M)
    elif which == "thm4":
        bound = 2.0 * w2 * a_terms
        bound += c * nu**2 * (k / M + ((t - 1) * ig**2 / M + 2.0 * ig / M) * cross)
    else:  # thm5
        n = pool_h.shape[1]
        Lambda = pool_h @ pool_h.T / n
        bias, var = _bias_variance_terms(ledger, H, state, Lambda)
        bound = 2.0 * w2 * bias + c * nu**2 * var + c * nu**2
    return make_report(which, actual, bound, mc_stderr=stderr, atol=atol)


def eval_projection_bound(state, H_blocks, ledger, atol=1e-9):
    """|| H^T U S^-2 U^T H - I ||_F^2 against M_t - k_t + (t-1)/gamma^2 * cross."""
    H = np.hstack(H_blocks)
    _check_cap(H.shape[0])
    t, M, k = state.t, state.M, state.k
    ig = _inv_gamma(ledger.gamma(t))
    G = H.T @ (state.U * state.S**-2) @ (state.U.T @ H)
    actual = np.linalg.norm(G - np.eye(M), "fro") ** 2
    bound = M - k + (t - 1) * ig**2 * ledger.cross_term(t)
    return make_report("prop1", actual, bound, atol=atol)


class FactorDriftReport(NamedTuple):
    sigma: BoundReport
    subspace: Optional[BoundReport]
    hypothesis_met: bool
    gap: float


def batch_gap(H, k):
    """gap_t = mu_k(H H^T) - mu_{k+1}(H H^T) from the batch spectrum."""
    s = np.linalg.svd(H, compute_uv=False)
    eig = np.zeros(max(k + 1, len(s)))
    eig[: len(s)] = s**2
    return float(eig[k - 1] - eig[k])


def eval_factor_drift(state, H_blocks, ledger, atol=1e-9):
    """Eigenvalue drift (Weyl, always) and subspace drift (Davis-Kahan, only
    when its hypothesis a_{t-1} < (1 - 1/sqrt(2)) gap_t holds)."""
    H = np.hstack(H_blocks)
    _check_cap(H.shape[0])
    t, k = state.t, state.k
    a_prev = ledger.a(t - 1)
    U_bar, s_bar, _ = np.linalg.svd(H, full_matrices=False)
    eig_bar = np.zeros(max(k + 1, len(s_bar)))
    eig_bar[: len(s_bar)] = s_bar**2
    sigma_actual = float(np.max(np.abs(eig_bar[:k] - state.S**2)))
    scale = eig_bar[0] if eig_bar[0] > 0 else 1.0
    sigma_report = make_report("thm6-sigma", sigma_actual, a_prev, atol=atol * scale)

    gap = float(eig_bar[k - 1] - eig_bar[k])
    hypothesis_met = a_prev < (1.0 - 1.0 / math.sqrt(2.0)) * gap
    subspace_report = None
    if hypothesis_met:
        # || Ubar Ubar^T - U U^T ||_2 via principal angles (equal ranks)
        sv = np.linalg.svd(U_bar[:, :k].T @ state.U, compute_uv=False)
        actual = math.sqrt(max(0.0, 1.0 - float(np.min(sv)) ** 2))
        bound = math.sqrt(2.0) * a_prev / gap if gap > 0 else math.inf
        subspace_report = make_report("thm6-u", actual, bound, atol=max(atol, ANGLE_RESOLUTION))
    return FactorDriftReport(sigma_report, subspace_report, hypothesis_met, gap)


def eval_offline_online_distance(W_offline, W_online, ledger, W_star, gap, atol=1e-10):
    """|| W_offline - W_online ||_F against the Davis-Kahan-style bound
    (noiseless planted model; hypothesis a_{t-1} < (1 - 1/sqrt(2)) gap_t)."""
    t = ledger.t
    a_prev = ledger.a(t - 1)
    if not a_prev < (1.0 - 1.0 / math.sqrt(2.0)) * gap:
        return BoundReport(
            which="thm7",
            actual_value=float(np.linalg.norm(W_offline - W_online, "fro")),
            bound_value=math.nan,
            satisfied=False,
            slack=math.nan,
            note="hypothesis-not-met",
        )
    ig = _inv_gamma(ledger.gamma(t))
    actual = np.linalg.norm(W_offline - W_online, "fro")
    w_norm = np.linalg.norm(W_star, "fro")
    bound = w_norm * (math.sqrt(2.0) * a_prev / gap + (t - 1) * ig)
    return make_report("thm7", actual, bound, atol=atol)


def gram_spectrum(H):
    """Eigenvalues of H^T H, descending (squared singular values, zero padded)."""
    H = np.asarray(H, dtype=np.float64)
    s = np.linalg.svd(H, compute_uv=False)
    eig = np.zeros(H.shape[1])
    eig[: len(s)] = s**2
    return eig


def effective_ranks(eigenvalues):
    """r_k = sum_{j >= k} mu_j / mu_k for each index k (nan once mu_k = 0)."""
    eig = np.asarray(eigenvalues, dtype=np.float64)
    tails = np.cumsum(eig[::-1])[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(eig > 0, tails / eig, np.nan)
    return r


def spectrum_rows(eigenvalues):
    """(index, eigenvalue, effective_rank) rows for CSV emission; 1-based index."""
    ranks = effective_ranks(eigenvalues)
    return [
        (i + 1, float(ev), float(rk))
        for i, (ev, rk) in enumerate(zip(eigenvalues, ranks))
    ]
