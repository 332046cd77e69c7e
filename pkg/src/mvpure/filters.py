"""Spatial filter constructors.

Full-rank filters (LCMV, nulling, eigenspace-LCMV, MMSE, zero-forcing) and
the reduced-rank MV-PURE family. Every MV-PURE filter has the form

    W_r = P_r (P_perp G)^+ P_perp M^{-1/2},   G = M^{-1/2} H,

where ``M`` is ``R`` or ``N``, ``P_perp`` projects onto the orthogonal
complement of the whitened leadfields being nulled (none, ``H_I`` or its
rank-``s`` approximation) and ``P_r`` projects onto the eigenvectors of the
``r`` smallest eigenvalues of a symmetric ``l x l`` matrix that depends on
the variant:

=========  ======================  ============================
variant    subspace chosen from    predicted MSE ``J(r) - c``
=========  ======================  ============================
``MSE``    ``B - 2Q``              ``tr(P_r (B - 2Q))``
``R``      ``B``                   ``tr(P_r (B - 2Q))``
``N``      ``B``                   ``tr(P_r (B - Q))``
=========  ======================  ============================

with ``B = (P_perp G)^+ P_perp ((P_perp G)^+)^T`` and ``c = tr(Q)``.
"""
import csv
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import linalg
from .errors import (CompositeRankDeficient, DimensionMismatch, MissingQ,
                     NotPositiveDefinite, NotSymmetric, PatchRankOutOfBounds,
                     RankDeficientLeadfield, RankOutOfBounds,
                     SingularCovariance)


class FilterKind(str, Enum):
    LCMV_R = "LCMV_R"
    LCMV_N = "LCMV_N"
    NULLING_R = "NULLING_R"
    NULLING_N = "NULLING_N"
    EIG_LCMV = "EIG_LCMV"
    MMSE = "MMSE"
    ZERO_FORCING = "ZERO_FORCING"
    MVP_INT_MSE = "MVP_INT_MSE"
    MVP_INT_R = "MVP_INT_R"
    MVP_INT_N = "MVP_INT_N"
    MVP_FREE_MSE = "MVP_FREE_MSE"
    MVP_FREE_R = "MVP_FREE_R"
    MVP_FREE_N = "MVP_FREE_N"
    MVP_PATCH_R = "MVP_PATCH_R"
    MVP_PATCH_N = "MVP_PATCH_N"
    NULLING_PATCH_R = "NULLING_PATCH_R"
    NULLING_PATCH_N = "NULLING_PATCH_N"
    # sanity-check baselines
    ZERO = "ZERO"
    RANDOM = "RANDOM"


class Variant(str, Enum):
    MSE = "MSE"
    R = "R"
    N = "N"


MVP_INT_KINDS = {Variant.MSE: FilterKind.MVP_INT_MSE, Variant.R: FilterKind.MVP_INT_R,
                 Variant.N: FilterKind.MVP_INT_N}
MVP_FREE_KINDS = {Variant.MSE: FilterKind.MVP_FREE_MSE, Variant.R: FilterKind.MVP_FREE_R,
                  Variant.N: FilterKind.MVP_FREE_N}
MVP_PATCH_KINDS = {Variant.R: FilterKind.MVP_PATCH_R, Variant.N: FilterKind.MVP_PATCH_N}
NULLING_PATCH_KINDS = {Variant.R: FilterKind.NULLING_PATCH_R,
                       Variant.N: FilterKind.NULLING_PATCH_N}

# kinds whose predicted MSE is exact under analytic covariances
EXACT_J_KINDS = frozenset(MVP_INT_KINDS.values()) | frozenset(MVP_FREE_KINDS.values())
RANK_SELECTABLE_KINDS = EXACT_J_KINDS | frozenset(MVP_PATCH_KINDS.values())
INTERFERENCE_KINDS = frozenset({
    FilterKind.NULLING_R, FilterKind.NULLING_N, FilterKind.NULLING_PATCH_R,
    FilterKind.NULLING_PATCH_N, FilterKind.MVP_PATCH_R, FilterKind.MVP_PATCH_N,
    *MVP_INT_KINDS.values()})

_LABELS = {
    # (nulling set present, variant) -> (selection matrix, J matrix)
    (True, Variant.MSE): ("K1", "K1"),
    (True, Variant.R): ("K2", "K1"),
    (True, Variant.N): ("K3", "K4"),
    (False, Variant.MSE): ("L1", "L1"),
    (False, Variant.R): ("L2", "L1"),
    (False, Variant.N): ("L3", "L4"),
}


@dataclass
class FilterDiagnostics:
    """Intermediate quantities of an MV-PURE construction.

    ``selection_matrix`` is the symmetric matrix whose smallest eigenvalues
    pick the subspace; ``eigenvalues`` are all of its eigenvalues ascending.
    ``j_matrix`` is the matrix with ``J = tr(P_r j_matrix) + c``.
    ``j_value`` is ``None`` when ``Q`` was not supplied; ``approximate``
    marks patch filters, whose J ignores the un-nulled residual of ``H_I``.
    """
    whitened_leadfields: dict
    selection_label: str
    selection_matrix: np.ndarray
    eigenvalues: np.ndarray
    projector: linalg.EigenSubspace
    j_label: str = None
    j_matrix: np.ndarray = None
    j_value: float = None
    c: float = None
    approximate: bool = False


@dataclass
class SpatialFilter:
    W: np.ndarray
    kind: FilterKind
    rank: int
    diagnostics: FilterDiagnostics = None

    def apply(self, Y):
        return apply_filter(self, Y)

    @property
    def j_value(self):
        return None if self.diagnostics is None else self.diagnostics.j_value


@dataclass
class RankSelection:
    j_curve: list = field(default_factory=list)
    selected_rank: int = None
    tie_policy_applied: bool = False

    @property
    def j_values(self):
        return np.array([j for _, j in self.j_curve])


def _variant(v):
    try:
        return Variant(v.upper() if isinstance(v, str) else v)
    except ValueError:
        raise ValueError(f"unknown variant {v!r}; expected MSE, R or N") from None


def _mode(mode):
    mode = _variant(mode)
    if mode is Variant.MSE:
        raise ValueError("mode must be 'R' or 'N'")
    return mode


def _whitener(M, m):
    M = linalg.as_matrix(M, "M")
    if M.shape != (m, m):
        raise DimensionMismatch(f"covariance has shape {M.shape}, expected {(m, m)}")
    try:
        return linalg.inv_sqrt_pd(M)
    except (NotPositiveDefinite, NotSymmetric) as exc:
        raise SingularCovariance(str(exc)) from exc


@dataclass
class _Core:
    """``(P_perp G)^+ P_perp`` and friends for one whitening / nulling set."""
    whitener: np.ndarray
    G: np.ndarray
    G_null: np.ndarray
    P_perp: np.ndarray
    Z: np.ndarray
    B: np.ndarray

    @property
    def W_full(self):
        return self.Z @ self.whitener


def _core(H, H_null, M):
    l = H.shape[1]
    Mi = _whitener(M, H.shape[0])
    G = Mi @ H
    G_null = Mi @ H_null
    P_perp = linalg.proj_range(G_null, complement=True)
    PG = P_perp @ G
    if linalg.rank_check(PG) < l:
        if H_null.shape[1]:
            raise CompositeRankDeficient("projected leadfield lost column rank")
        raise RankDeficientLeadfield("H is not of full column rank")
    A = linalg.pinv(PG)
    Z = A @ P_perp
    B = A @ P_perp @ A.T
    return _Core(Mi, G, G_null, P_perp, Z, 0.5 * (B + B.T))


def _check_Q(Q, l):
    Q = linalg.symmetrize(Q, "Q")
    if Q.shape != (l, l):
        raise DimensionMismatch(f"Q has shape {Q.shape}, expected {(l, l)}")
    return Q


def _matrices(core, variant, Q):
    """(selection matrix, J matrix or None)."""
    B = core.B
    if variant is Variant.MSE:
        if Q is None:
            raise MissingQ("the MSE variant needs the source covariance Q")
        K = B - 2.0 * Q
        return K, K
    if Q is None:
        return B, None
    if variant is Variant.R:
        return B, B - 2.0 * Q
    return B, B - Q


def _j_curve(sel, jmat, c):
    """Predicted MSE for every rank from one eigendecomposition."""
    w, V = np.linalg.eigh(sel)
    if jmat is None:
        return w, V, None
    contrib = np.einsum("ij,ik,kj->j", V, jmat, V)
    return w, V, np.cumsum(contrib) + c


def _mvpure(core, variant, Q, r, kind, nulled, whitened, approximate=False):
    l = core.B.shape[0]
    if not 1 <= r <= l:
        raise RankOutOfBounds(f"rank {r} outside [1, {l}]")
    Q = None if Q is None else _check_Q(Q, l)
    sel, jmat = _matrices(core, variant, Q)
    sub = linalg.smallest_eig_subspace(sel, r)
    W = sub.projector @ core.W_full
    sel_label, j_label = _LABELS[(nulled, variant)]
    j_value = c = None
    if jmat is not None:
        c = float(np.trace(Q))
        j_value = float(np.trace(sub.projector @ jmat)) + c
    diag = FilterDiagnostics(
        whitened_leadfields=whitened, selection_label=sel_label,
        selection_matrix=sel, eigenvalues=np.linalg.eigvalsh(sel),
        projector=sub, j_label=j_label, j_matrix=jmat, j_value=j_value, c=c,
        approximate=approximate)
    return SpatialFilter(W, kind, r, diag)


def _whitened_dict(core, mode, null_name):
    g = "G" if mode is Variant.R else "F"
    out = {g: core.G}
    if core.G_null.shape[1]:
        out[f"{g}_{null_name}"] = core.G_null
    return out


def _resolve_rank(r, select):
    if r is None:
        return select().selected_rank
    return int(r)


# --- full-rank filters -----------------------------------------------------

def lcmv(fm, M, mode="R"):
    """LCMV filter ``G^+ M^{-1/2}`` (equal to ``(H^T M^-1 H)^-1 H^T M^-1``).

    ``mode`` labels whether ``M`` is the measurement (``R``) or noise (``N``)
    covariance; the formula is the same.
    """
    mode = _mode(mode)
    core = _core(fm.H, np.zeros((fm.m, 0)), M)
    kind = FilterKind.LCMV_R if mode is Variant.R else FilterKind.LCMV_N
    return SpatialFilter(core.W_full, kind, fm.l)


def lcmv_closed_form(fm, M):
    """``(H^T M^{-1} H)^{-1} H^T M^{-1}`` via linear solves."""
    X = np.linalg.solve(M, fm.H)
    return np.linalg.solve(fm.H.T @ X, X.T)


def nulling(fm, M, mode="R"):
    """Nulling filter: unit gain on ``H`` and zero gain on ``H_I``.

    Built in the whitened projector form. Without interferers this is the
    LCMV filter and is labelled as such.
    """
    mode = _mode(mode)
    if fm.k == 0:
        return lcmv(fm, M, mode)
    core = _core(fm.H, fm.H_I, M)
    kind = FilterKind.NULLING_R if mode is Variant.R else FilterKind.NULLING_N
    return SpatialFilter(core.W_full, kind, fm.l)


def nulling_closed_form(fm, M):
    """``[I_l 0] (H_c^T M^{-1} H_c)^{-1} H_c^T M^{-1}``."""
    X = np.linalg.solve(M, fm.H_c)
    return np.linalg.solve(fm.H_c.T @ X, X.T)[: fm.l]


def _patch_leadfield(fm, s):
    if fm.k == 0 or not 1 <= s <= fm.k:
        raise PatchRankOutOfBounds(f"patch rank {s} outside [1, {fm.k}]")
    return linalg.truncated_svd(fm.H_I, s)


def nulling_patch(fm, M, mode="R", s=None):
    """Unit-gain filter nulling only the best rank-``s`` approximation of
    ``H_I``. The ``R`` and ``N`` forms differ once ``s < k``."""
    mode = _mode(mode)
    s = fm.k if s is None else s
    H_Is = _patch_leadfield(fm, s)
    core = _core(fm.H, H_Is, M)
    return SpatialFilter(core.W_full, NULLING_PATCH_KINDS[mode], fm.l)


def eigenspace_lcmv(fm, R, sig):
    """LCMV(R) followed by projection onto the ``sig`` leading eigenvectors
    of ``R``."""
    if not 1 <= sig <= fm.m:
        raise RankOutOfBounds(f"signal subspace dimension {sig} outside [1, {fm.m}]")
    base = lcmv(fm, R, "R")
    P = linalg.largest_eig_subspace(R, sig).projector
    return SpatialFilter(base.W @ P, FilterKind.EIG_LCMV, fm.l)


def mmse(Q, fm, R):
    """Wiener filter ``Q H^T R^{-1}``."""
    Q = _check_Q(Q, fm.l)
    R = linalg.as_matrix(R, "R")
    if R.shape != (fm.m, fm.m):
        raise DimensionMismatch(f"R has shape {R.shape}, expected {(fm.m, fm.m)}")
    try:
        L = np.linalg.cholesky(linalg.symmetrize(R, "R"))
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance("R is not positive definite") from exc
    X = np.linalg.solve(L.T, np.linalg.solve(L, fm.H @ Q))
    return SpatialFilter(X.T, FilterKind.MMSE, fm.l)


def zero_forcing(fm):
    """``H^+``: exact inversion with no noise suppression."""
    if linalg.rank_check(fm.H) < fm.l:
        raise RankDeficientLeadfield("H is not of full column rank")
    return SpatialFilter(linalg.pinv(fm.H), FilterKind.ZERO_FORCING, fm.l)


def zero_filter(fm):
    return SpatialFilter(np.zeros((fm.l, fm.m)), FilterKind.ZERO, 0)


def random_filter(fm, seed=None):
    """Standard-normal entries; a sanity baseline."""
    rng = np.random.default_rng(seed)
    return SpatialFilter(rng.standard_normal((fm.l, fm.m)), FilterKind.RANDOM, fm.l)


# --- MV-PURE ---------------------------------------------------------------

def mvpure_int(variant, fm, M, Q=None, r=None):
    """Reduced-rank filter with exact nulling of ``H_I``.

    ``variant`` is ``"MSE"`` (minimizes the MSE; ``M`` must be ``R`` and
    ``Q`` is required), ``"R"`` (minimizes output power; ``M = R``) or
    ``"N"`` (minimizes output noise power; ``M = N``). ``r=None`` selects the
    rank minimizing the predicted MSE, which needs ``Q``.

    With no interferers the interference-free filter is returned.
    """
    variant = _variant(variant)
    if fm.k == 0:
        return mvpure_free(variant, fm, M, Q, r)
    r = _resolve_rank(r, lambda: select_rank(MVP_INT_KINDS[variant], fm, M, Q))
    core = _core(fm.H, fm.H_I, M)
    return _mvpure(core, variant, Q, r, MVP_INT_KINDS[variant], True,
                   _whitened_dict(core, Variant.N if variant is Variant.N else Variant.R, "I"))


def mvpure_free(variant, fm, M, Q=None, r=None):
    """Reduced-rank filter for the interference-free model; any ``H_I`` in
    ``fm`` is ignored. Arguments as in :func:`mvpure_int`."""
    variant = _variant(variant)
    r = _resolve_rank(r, lambda: select_rank(MVP_FREE_KINDS[variant], fm, M, Q))
    core = _core(fm.H, np.zeros((fm.m, 0)), M)
    return _mvpure(core, variant, Q, r, MVP_FREE_KINDS[variant], False,
                   _whitened_dict(core, Variant.N if variant is Variant.N else Variant.R, "I"))


def mvpure_patch(variant, fm, s, M, r=None, Q=None):
    """Reduced-rank filter nulling the rank-``s`` approximation of ``H_I``.

    Only the ``R`` and ``N`` variants exist. ``j_value`` (when ``Q`` is
    given) uses the exact-nulling formula with the patch leadfield
    substituted and is flagged approximate.
    """
    variant = _mode(variant)
    H_Is = _patch_leadfield(fm, s)
    r = _resolve_rank(r, lambda: select_rank(MVP_PATCH_KINDS[variant], fm, M, Q, s=s))
    core = _core(fm.H, H_Is, M)
    return _mvpure(core, variant, Q, r, MVP_PATCH_KINDS[variant], True,
                   _whitened_dict(core, variant, "Is"), approximate=True)


_FAMILY = {}
for _v, _k in MVP_INT_KINDS.items():
    _FAMILY[_k] = ("int", _v)
for _v, _k in MVP_FREE_KINDS.items():
    _FAMILY[_k] = ("free", _v)
for _v, _k in MVP_PATCH_KINDS.items():
    _FAMILY[_k] = ("patch", _v)


def select_rank(kind, fm, M, Q, s=None):
    """Predicted MSE for ``r = 1..l`` and its minimizer (smallest ``r`` on ties).

    ``kind`` is one of the MV-PURE kinds. One eigendecomposition serves all
    ranks.
    """
    kind = FilterKind(kind)
    if kind not in _FAMILY:
        raise ValueError(f"{kind.value} has no rank-selection rule")
    family, variant = _FAMILY[kind]
    if Q is None:
        raise MissingQ("rank selection needs the source covariance Q")
    if family == "int" and fm.k > 0:
        H_null = fm.H_I
    elif family == "patch":
        H_null = _patch_leadfield(fm, s if s is not None else fm.k)
    else:
        H_null = np.zeros((fm.m, 0))
    core = _core(fm.H, H_null, M)
    Q = _check_Q(Q, fm.l)
    sel, jmat = _matrices(core, variant, Q)
    _, _, curve = _j_curve(sel, jmat, float(np.trace(Q)))
    jmin = curve.min()
    tol = 1e-12 * max(1.0, abs(jmin))
    ties = np.flatnonzero(curve <= jmin + tol)
    return RankSelection(
        j_curve=[(r + 1, float(j)) for r, j in enumerate(curve)],
        selected_rank=int(ties[0]) + 1,
        tie_policy_applied=len(ties) > 1)


# --- application and export --------------------------------------------------

def apply_filter(W, Y):
    """Filter sensor samples ``Y`` (``m x T``, or ``trials x m x T``)."""
    W = W.W if isinstance(W, SpatialFilter) else np.asarray(W, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if W.shape[1] != Y.shape[-2]:
        raise DimensionMismatch(f"filter has {W.shape[1]} columns, data has "
                                f"{Y.shape[-2]} channels")
    return W @ Y


def build(kind, fm, R, N, Q=None, *, rank=None, s=None, sig=None, seed=None):
    """Construct any filter kind from a forward model and covariances.

    MV-PURE kinds with ``rank=None`` get the MSE-selected rank; ``sig``
    defaults to ``l + k`` and ``s`` to ``k``.
    """
    kind = FilterKind(kind)
    K = FilterKind
    if kind is K.LCMV_R:
        return lcmv(fm, R, "R")
    if kind is K.LCMV_N:
        return lcmv(fm, N, "N")
    if kind is K.NULLING_R:
        return nulling(fm, R, "R")
    if kind is K.NULLING_N:
        return nulling(fm, N, "N")
    if kind is K.EIG_LCMV:
        return eigenspace_lcmv(fm, R, sig if sig is not None else fm.l + fm.k)
    if kind is K.MMSE:
        return mmse(Q, fm, R)
    if kind is K.ZERO_FORCING:
        return zero_forcing(fm)
    if kind is K.ZERO:
        return zero_filter(fm)
    if kind is K.RANDOM:
        return random_filter(fm, seed)
    if kind in (K.NULLING_PATCH_R, K.NULLING_PATCH_N):
        mode = kind.value[-1]
        return nulling_patch(fm, R if mode == "R" else N, mode, s)
    family, variant = _FAMILY[kind]
    M = N if variant is Variant.N else R
    if family == "int":
        return mvpure_int(variant, fm, M, Q, rank)
    if family == "free":
        return mvpure_free(variant, fm, M, Q, rank)
    return mvpure_patch(variant, fm, s if s is not None else fm.k, M, rank, Q)


def export_filter_csv(sf, path):
    """Write ``W`` row-major with a ``#``-prefixed metadata header line."""
    j = sf.j_value
    with open(path, "w", newline="") as f:
        f.write(f"# kind={sf.kind.value};rank={sf.rank};"
                f"j_value={'' if j is None else repr(j)}\n")
        writer = csv.writer(f)
        for row in sf.W:
            writer.writerow([repr(float(x)) for x in row])


def read_filter_csv(path):
    """Inverse of :func:`export_filter_csv`: ``(W, metadata dict)``."""
    with open(path, newline="") as f:
        header = f.readline().lstrip("#").strip()
        meta = dict(item.split("=", 1) for item in header.split(";"))
        W = np.array([[float(x) for x in row] for row in csv.reader(f) if row])
    meta["rank"] = int(meta["rank"])
    meta["j_value"] = float(meta["j_value"]) if meta["j_value"] else None
    return W, meta
