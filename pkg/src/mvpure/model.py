"""Forward-model containers, covariance assembly, analytic MSE and the
source-covariance estimators.

Two measurement models are covered:

* interference-free: ``y = H q + n`` with ``R = H Q H^T + N``;
* with interference: ``y = [H H_I] [q; q_I] + n`` with
  ``R = H_c Q_c H_c^T + N``.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import linalg
from .errors import (CompositeRankDeficient, DimensionMismatch,
                     InsufficientSamples,
                     SingularCovariance)


def _empty_cols(m):
    return np.zeros((m, 0))


@dataclass(frozen=True)
class ForwardModel:
    """Leadfields of the sources of interest (``H``), interferers (``H_I``)
    and background sources (``H_b``). ``H_I`` and ``H_b`` may have zero
    columns.

    The columns of ``[H H_I]`` must be linearly independent and
    ``m > l + k``.
    """
    H: np.ndarray
    H_I: np.ndarray = None
    H_b: np.ndarray = None

    def __post_init__(self):
        H = linalg.as_matrix(self.H, "H")
        m = H.shape[0]
        H_I = _empty_cols(m) if self.H_I is None else linalg.as_matrix(
            np.asarray(self.H_I, dtype=float).reshape(m, -1), "H_I")
        H_b = _empty_cols(m) if self.H_b is None else linalg.as_matrix(
            np.asarray(self.H_b, dtype=float).reshape(m, -1), "H_b")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "H_I", H_I)
        object.__setattr__(self, "H_b", H_b)
        if H.shape[1] < 1:
            raise DimensionMismatch("need at least one source of interest")
        if m <= self.l + self.k:
            raise DimensionMismatch(
                f"need m > l + k, got m={m}, l={self.l}, k={self.k}")
        if linalg.rank_check(self.H_c) < self.l + self.k:
            raise CompositeRankDeficient("columns of [H H_I] are linearly dependent")

    @property
    def m(self):
        return self.H.shape[0]

    @property
    def l(self):
        return self.H.shape[1]

    @property
    def k(self):
        return self.H_I.shape[1]

    @property
    def p(self):
        return self.H_b.shape[1]

    @property
    def H_c(self):
        return np.hstack([self.H, self.H_I])

    def without_interference(self):
        """Same model with the interfering leadfields dropped."""
        return ForwardModel(self.H, None, self.H_b)


@dataclass(frozen=True)
class CovarianceModel:
    """Second-order statistics of a measurement model.

    ``Q_c`` is set only for the interference model; then ``Q`` is its
    leading ``l x l`` block. ``R`` may be left out and assembled
    analytically with :meth:`analytic`.
    """
    Q: np.ndarray
    N: np.ndarray
    R: np.ndarray = None
    Q_c: np.ndarray = None

    @property
    def c(self):
        return float(np.trace(self.Q))

    @property
    def has_interference(self):
        return self.Q_c is not None

    @property
    def cross_cov(self):
        """``E[q_c q^T]``: the first ``l`` columns of ``Q_c`` (or ``Q``)."""
        if self.Q_c is None:
            return self.Q
        return self.Q_c[:, : self.Q.shape[0]]

    @classmethod
    def analytic(cls, fm, N, Q=None, Q_c=None):
        """Build a covariance model with ``R`` assembled from the forward model.

        Pass ``Q_c`` for the interference model, ``Q`` otherwise.
        """
        if (Q is None) == (Q_c is None):
            raise ValueError("pass exactly one of Q or Q_c")
        if Q_c is not None:
            Q_c = linalg.symmetrize(Q_c, "Q_c")
            Q = Q_c[: fm.l, : fm.l].copy()
        else:
            Q = linalg.symmetrize(Q, "Q")
        cov = cls(Q=Q, N=linalg.symmetrize(N, "N"), Q_c=Q_c)
        return cls(Q=cov.Q, N=cov.N, R=assemble_R(fm, cov), Q_c=Q_c)


class SignalRole(str, Enum):
    SA = "SA"  # sources of interest
    IN = "IN"  # interference correlated with SA
    BN = "BN"  # background brain activity
    MN = "MN"  # sensor measurement noise


@dataclass
class SourceSignal:
    """A block of samples, one row per source (or sensor) and one column per
    time point."""
    samples: np.ndarray
    role: SignalRole = SignalRole.SA

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        self.role = SignalRole(self.role)

    @property
    def n_rows(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]


def assemble_R(fm, cov):
    """Measurement covariance ``H Q H^T + N`` (or ``H_c Q_c H_c^T + N`` when
    ``cov`` carries ``Q_c``)."""
    N = cov.N
    if N.shape != (fm.m, fm.m):
        raise DimensionMismatch(f"N has shape {N.shape}, expected {(fm.m, fm.m)}")
    if cov.Q_c is not None:
        A, S = fm.H_c, cov.Q_c
    else:
        A, S = fm.H, cov.Q
    if S.shape != (A.shape[1], A.shape[1]):
        raise DimensionMismatch(
            f"source covariance has shape {S.shape}, expected "
            f"{(A.shape[1], A.shape[1])}")
    linalg.check_pd(S, "source covariance")
    linalg.check_pd(N, "N")
    R = A @ S @ A.T + N
    return 0.5 * (R + R.T)


def _check_filter(W, fm):
    W = linalg.as_matrix(W, "W")
    if W.shape != (fm.l, fm.m):
        raise DimensionMismatch(f"W has shape {W.shape}, expected {(fm.l, fm.m)}")
    return W


def mse_free(W, fm, cov):
    """MSE of ``W y`` as an estimate of ``q`` in the interference-free model:

        tr(W R W^T) - 2 tr(W H Q) + tr(Q)
    """
    W = _check_filter(W, fm)
    if cov.R is None or cov.R.shape != (fm.m, fm.m):
        raise DimensionMismatch("covariance model lacks an m x m R")
    if cov.Q.shape != (fm.l, fm.l):
        raise DimensionMismatch(f"Q has shape {cov.Q.shape}, expected {(fm.l, fm.l)}")
    return float(np.sum((W @ cov.R) * W) - 2.0 * np.trace(W @ fm.H @ cov.Q) + cov.c)


def mse_int(W, fm, cov):
    """MSE of ``W y`` as an estimate of ``q`` in the interference model:

        tr(W R W^T) - 2 tr(W H_c E[q_c q^T]) + tr(Q)

    With no interferers this reduces to :func:`mse_free`.
    """
    W = _check_filter(W, fm)
    if cov.R is None or cov.R.shape != (fm.m, fm.m):
        raise DimensionMismatch("covariance model lacks an m x m R")
    cross = cov.cross_cov
    if cross.shape != (fm.l + fm.k, fm.l):
        raise DimensionMismatch(
            f"E[q_c q^T] has shape {cross.shape}, expected {(fm.l + fm.k, fm.l)}")
    return float(np.sum((W @ cov.R) * W) - 2.0 * np.trace(W @ fm.H_c @ cross) + cov.c)


def _gram_inverse(A, M, name):
    """``(A^T M^{-1} A)^{-1}`` computed through Cholesky solves."""
    try:
        L = np.linalg.cholesky(linalg.symmetrize(M, name))
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"{name} is not positive definite") from exc
    B = np.linalg.solve(L, A)
    G = B.T @ B
    try:
        Ginv = np.linalg.inv(G)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"A^T {name}^-1 A is singular") from exc
    return 0.5 * (Ginv + Ginv.T)


def _lemma_difference(A, R, N):
    Qhat = _gram_inverse(A, R, "R") - _gram_inverse(A, N, "N")
    return 0.5 * (Qhat + Qhat.T)


def estimate_Q_free(fm, R, N):
    """Source covariance from measurement and noise covariances,

        Q = (H^T R^{-1} H)^{-1} - (H^T N^{-1} H)^{-1}.

    Exact when ``R = H Q H^T + N``; with sample estimates the result may be
    indefinite.
    """
    return _lemma_difference(fm.H, R, N)


def estimate_Q_int(fm, R, N):
    """Leading ``l x l`` block of the composite source covariance,

        Q_c = (H_c^T R^{-1} H_c)^{-1} - (H_c^T N^{-1} H_c)^{-1}.
    """
    Qc = _lemma_difference(fm.H_c, R, N)
    return Qc[: fm.l, : fm.l].copy()


def sample_covariance(X, loading=0.0):
    """Unbiased sample covariance of ``X`` (rows are channels, columns time).

    ``X`` may also be a stack ``(trials, channels, time)``; the per-trial
    covariances are then averaged. ``loading`` adds
    ``loading * tr(C) / m`` to the diagonal.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ValueError(f"expected 2-D or 3-D samples, got shape {X.shape}")
    n_trials, m, T = X.shape
    if T < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {T}")
    Xc = X - X.mean(axis=2, keepdims=True)
    flat = Xc.transpose(1, 0, 2).reshape(m, n_trials * T)
    C = flat @ flat.T / ((T - 1) * n_trials)
    C = 0.5 * (C + C.T)
    if loading:
        C = C + loading * np.trace(C) / m * np.eye(m)
    return C
