"""Dense real-matrix kernels: thin QR, SVD, truncated SVD, norms, symmetric eigen.

All routines work on float64 numpy arrays (column j of a feature matrix is
sample j). LAPACK via numpy does the heavy lifting; the test suite validates
results against independent oracles (A^T A eigenvalues, Eckart-Young residuals)
rather than trusting the backend.
"""

from typing import NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError

SYMMETRY_TOL = 1e-10


class SvdFactors(NamedTuple):
    """Compact SVD factors. ``V`` is None when right vectors were not requested."""

    U: np.ndarray
    S: np.ndarray
    V: Optional[np.ndarray]


def _as_matrix(A, name="A"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return A


def qr_thin(A):
    """Thin QR of A: Q has orthonormal columns, R is upper-triangular, QR = A.

    Rank-deficient input is fine (R may have zero diagonal entries). Signs are
    fixed so the diagonal of R is non-negative.
    """
    A = _as_matrix(A)
    Q, R = np.linalg.qr(A, mode="reduced")
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs, signs[:, None] * R


def svd(A, compute_v=True):
    """Full (compact) SVD of A with singular values sorted descending."""
    A = _as_matrix(A)
    try:
        U, S, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        from .errors import NumericError

        raise NumericError(f"SVD did not converge on {A.shape} input: {exc}") from exc
    return SvdFactors(U, S, Vt.T if compute_v else None)


def truncated_svd(A, r, compute_v=True):
    """Top-r SVD factors of A."""
    A = _as_matrix(A)
    if not 1 <= r <= min(A.shape):
        raise InvalidInputError(f"rank r={r} out of range [1, {min(A.shape)}]")
    U, S, V = svd(A, compute_v=compute_v)
    return SvdFactors(U[:, :r], S[:r], V[:, :r] if compute_v else None)


def spectral_norm(A):
    """Largest singular value of A."""
    A = _as_matrix(A)
    return float(np.linalg.norm(A, 2))


def frobenius_norm(A):
    A = _as_matrix(A)
    return float(np.linalg.norm(A, "fro"))


def sym_eigvals(A):
    """Eigenvalues of a symmetric matrix, sorted descending."""
    A = _as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError("sym_eigvals requires a square matrix")
    if np.linalg.norm(A - A.T, "fro") > SYMMETRY_TOL * max(1.0, np.linalg.norm(A, "fro")):
        raise InvalidInputError("sym_eigvals requires a symmetric matrix")
    w = np.linalg.eigvalsh(A)
    return w[::-1].copy()
