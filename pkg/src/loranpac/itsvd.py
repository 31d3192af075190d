"""Incremental truncated SVD of a growing column block.

The state tracks (U, S): the top-k left singular vectors and singular values
of the recurrence matrix B_t = [U_{t-1} diag(S_{t-1}), H_t] (B_1 = H_1). Each
update projects the new block out of span(U), takes a thin QR of the residual,
runs a full SVD on the small (k+m)-square assembled matrix, maps the top-k
factors back, and re-orthogonalizes U to keep ||U^T U - I|| at roundoff level.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import linalg
from .errors import InvalidInputError, SizeCapError

ORTHONORMALITY_TOL = 1e-8


@dataclass(frozen=True)
class TruncatedFactorState:
    U: np.ndarray  # E x k, orthonormal columns
    S: np.ndarray  # k singular values, descending, > 0
    M: int  # total samples seen
    t: int  # tasks seen
    k_history: tuple = field(default=())

    @property
    def E(self):
        return self.U.shape[0]

    @property
    def k(self):
        return self.S.shape[0]


class StepInfo(NamedTuple):
    """Per-step diagnostics.

    spectrum: squared singular values of B_t (all of them, descending).
    tail_u/tail_s: discarded factors of B_t, so that the truncated remainder
    is tail_u @ diag(tail_s**2) @ tail_u.T; only captured on request.
    """

    spectrum: np.ndarray
    tail_u: Optional[np.ndarray]
    tail_s: Optional[np.ndarray]


def _keep_positive(U, S, k):
    """Retain at most k factors, dropping exactly-zero singular values."""
    nnz = int(np.count_nonzero(S > 0.0))
    k = min(k, nnz)
    return U[:, :k], S[:k].copy()


def init(H1, k1, capture_tail=False):
    """State from the first block: top-k1 SVD factors of H_1."""
    H1 = np.asarray(H1, dtype=np.float64)
    if H1.ndim != 2:
        raise InvalidInputError("H_1 must be a matrix")
    E, m1 = H1.shape
    if not 1 <= k1 <= min(E, m1):
        raise InvalidInputError(f"k_1={k1} out of range [1, {min(E, m1)}]")
    U, S, _ = linalg.svd(H1, compute_v=False)
    Uk, Sk = _keep_positive(U, S, k1)
    state = TruncatedFactorState(U=Uk, S=Sk, M=m1, t=1, k_history=(Uk.shape[1],))
    info = StepInfo(
        spectrum=S**2,
        tail_u=U[:, Uk.shape[1] :].copy() if capture_tail else None,
        tail_s=S[Uk.shape[1] :].copy() if capture_tail else None,
    )
    return state, info


def update(state, Ht, kt, capture_tail=False):
    """Fold the block H_t into the state, keeping the top-k_t factors of B_t."""
    Ht = np.asarray(Ht, dtype=np.float64)
    if Ht.ndim != 2 or Ht.shape[0] != state.E:
        raise InvalidInputError(f"H_t must have {state.E} rows, got shape {Ht.shape}")
    m = Ht.shape[1]
    k_prev = state.k
    n = k_prev + m
    if not 1 <= kt <= n:
        raise InvalidInputError(f"k_t={kt} out of range [1, {n}]")

    proj = state.U.T @ Ht
    residual = Ht - state.U @ proj
    Q, R = linalg.qr_thin(residual)
    q = Q.shape[1]  # min(E, m); fewer basis columns than m when E < k_prev + m

    # (k_prev + q) x (k_prev + m) matrix whose SVD matches B_t through [U, Q]
    small = np.zeros((k_prev + q, n))
    small[:k_prev, :k_prev] = np.diag(state.S)
    small[:k_prev, k_prev:] = proj
    small[k_prev:, k_prev:] = R

    U_tmp, S_tmp, _ = linalg.svd(small, compute_v=False)
    basis = np.hstack([state.U, Q])
    U_new, S_new = _keep_positive(U_tmp, S_tmp, kt)
    k_eff = U_new.shape[1]
    U_new = basis @ U_new
    # re-orthogonalize; repeated multiplications erode orthonormality otherwise
    U_new, _ = linalg.qr_thin(U_new)

    info = StepInfo(
        spectrum=S_tmp**2,
        tail_u=basis @ U_tmp[:, k_eff:] if capture_tail else None,
        tail_s=S_tmp[k_eff:].copy() if capture_tail else None,
    )
    new_state = TruncatedFactorState(
        U=U_new,
        S=S_new,
        M=state.M + m,
        t=state.t + 1,
        k_history=state.k_history + (k_eff,),
    )
    return new_state, info


def lowrank_gram(state, max_dim=4000):
    """Materialize U diag(S^2) U^T. Refused above max_dim (dense E x E)."""
    if state.E > max_dim:
        raise SizeCapError(f"E={state.E} exceeds materialization cap {max_dim}")
    return (state.U * state.S**2) @ state.U.T


def orthonormality_defect(state):
    k = state.k
    return float(np.linalg.norm(state.U.T @ state.U - np.eye(k), "fro"))
