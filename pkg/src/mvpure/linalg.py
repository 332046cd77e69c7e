"""Dense linear-algebra kernels used by the filter constructors.

Everything here works on plain ``numpy`` arrays and is side-effect free.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NotPositiveDefinite, NotSymmetric, RankOutOfBounds

SYMMETRY_TOL = 1e-10
PD_RTOL = 1e-12
RANK_RTOL = 1e-10


def as_matrix(A, name="matrix"):
    """Return ``A`` as a finite 2-D float array."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or Inf")
    return A


def symmetrize(A, name="matrix", tol=SYMMETRY_TOL):
    """Check ``A`` is symmetric to ``tol`` (relative) and return (A + A^T)/2."""
    A = as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"{name} is not square: {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > tol * scale:
        raise NotSymmetric(
            f"{name} asymmetry {np.max(np.abs(A - A.T)):.3e} exceeds {tol:g}")
    return 0.5 * (A + A.T)


@dataclass(frozen=True)
class EigenSubspace:
    """Orthogonal projector onto an eigenvector subspace.

    ``basis`` holds orthonormal eigenvectors as columns, ordered to match
    ``eigenvalues_selected`` (ascending).
    """
    projector: np.ndarray
    basis: np.ndarray
    eigenvalues_selected: np.ndarray

    @property
    def rank(self):
        return self.basis.shape[1]


def _eigh_pd(A, name):
    A = symmetrize(A, name)
    w, V = np.linalg.eigh(A)
    if w.size == 0:
        return w, V
    tol = PD_RTOL * max(abs(w[-1]), np.finfo(float).tiny)
    if w[0] <= tol or w[-1] <= 0:
        raise NotPositiveDefinite(
            f"{name} is not positive definite (smallest eigenvalue {w[0]:.3e})",
            smallest_eigenvalue=float(w[0]))
    return w, V


def inv_sqrt_pd(A):
    """Symmetric positive definite inverse square root ``A^{-1/2}``.

    Raises
    ------
    NotSymmetric, NotPositiveDefinite
    """
    w, V = _eigh_pd(A, "A")
    B = (V / np.sqrt(w)) @ V.T
    return 0.5 * (B + B.T)


def inv_pd(A, name="A"):
    """Inverse of a symmetric positive definite matrix via its eigenbasis."""
    w, V = _eigh_pd(A, name)
    B = (V / w) @ V.T
    return 0.5 * (B + B.T)


def check_pd(A, name="A"):
    """Validate ``A`` is SPD and return its symmetrized copy."""
    _eigh_pd(A, name)
    return symmetrize(A, name)


def pinv(A):
    """Moore-Penrose pseudoinverse."""
    A = as_matrix(A)
    if A.size == 0:
        return np.zeros(A.shape[::-1])
    return np.linalg.pinv(A)


def _range_basis(A, rtol=RANK_RTOL):
    A = as_matrix(A)
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[0], 0))
    return U[:, s > rtol * s[0]]


def proj_range(A, complement=False):
    """Orthogonal projector onto range(A), or its orthogonal complement.

    An ``m x 0`` or all-zero ``A`` has an empty range, so the complement
    projector is the identity.
    """
    A = as_matrix(A)
    U = _range_basis(A)
    P = U @ U.T
    if complement:
        return np.eye(A.shape[0]) - P
    return P


def truncated_svd(A, r):
    """Best rank-``r`` approximation of ``A`` in every unitarily invariant norm."""
    A = as_matrix(A)
    if not 1 <= r <= min(A.shape):
        raise RankOutOfBounds(f"rank {r} outside [1, {min(A.shape)}]")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def smallest_eig_subspace(K, r):
    """Projector onto the eigenvectors of the ``r`` algebraically smallest
    eigenvalues of the symmetric matrix ``K``.

    Ties are broken by the column order ``numpy.linalg.eigh`` returns.
    """
    K = symmetrize(K, "K")
    n = K.shape[0]
    if not 1 <= r <= n:
        raise RankOutOfBounds(f"rank {r} outside [1, {n}]")
    w, V = np.linalg.eigh(K)
    basis = V[:, :r]
    P = basis @ basis.T
    return EigenSubspace(projector=0.5 * (P + P.T), basis=basis,
                         eigenvalues_selected=w[:r].copy())


def largest_eig_subspace(K, r):
    """Like :func:`smallest_eig_subspace` but for the ``r`` largest eigenvalues
    (returned in descending order)."""
    K = symmetrize(K, "K")
    n = K.shape[0]
    if not 1 <= r <= n:
        raise RankOutOfBounds(f"rank {r} outside [1, {n}]")
    w, V = np.linalg.eigh(K)
    basis = V[:, ::-1][:, :r]
    P = basis @ basis.T
    return EigenSubspace(projector=0.5 * (P + P.T), basis=basis,
                         eigenvalues_selected=w[::-1][:r].copy())


def rank_check(A, tol=RANK_RTOL):
    """Numerical rank: count of singular values above ``tol * sigma_1``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = as_matrix(A)
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))
