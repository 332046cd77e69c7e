"""MVAR source generation, least-squares fitting and partial directed
coherence (PDC)."""
import csv
import json
from dataclasses import InitVar, dataclass

import numpy as np

from .errors import (IllConditionedRegression, InsufficientSamples,
                     ShapeMismatch, StabilizationFailed, UnstableModel,
                     ZeroColumn)
from .model import SignalRole, SourceSignal

DEFAULT_ORDER = 6
DEFAULT_MASK_FRACTION = 0.8
DEFAULT_N_FREQS = 64
TARGET_RADIUS = 0.95


@dataclass
class MvarModel:
    """``x_t = sum_p A_p x_{t-p} + e_t`` with ``e_t ~ N(0, innovation_cov)``.

    ``coeffs`` has shape ``(order, l, l)``. ``mask`` marks the structurally
    allowed couplings; masked coefficients must be exactly zero. Stability
    (companion spectral radius < 1) is enforced unless
    ``require_stable=False``, which fitted models use.
    """
    coeffs: np.ndarray
    innovation_cov: np.ndarray = None
    mask: np.ndarray = None
    require_stable: InitVar[bool] = True

    def __post_init__(self, require_stable):
        A = np.asarray(self.coeffs, dtype=float)
        if A.ndim == 2:
            A = A[None]
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError(f"coeffs must have shape (order, l, l), got {A.shape}")
        l = A.shape[1]
        self.coeffs = A
        self.innovation_cov = (np.eye(l) if self.innovation_cov is None
                               else np.asarray(self.innovation_cov, dtype=float))
        self.mask = (np.ones((l, l), dtype=int) if self.mask is None
                     else np.asarray(self.mask).astype(int))
        if np.any(np.diag(self.mask) != 1):
            raise ValueError("mask diagonal must be all ones")
        if np.any(A * (1 - self.mask) != 0):
            raise ValueError("masked coefficients must be zero")
        if require_stable and not self.is_stable:
            raise UnstableModel(
                f"companion spectral radius {self.spectral_radius():.4f} >= 1")

    @property
    def order(self):
        return self.coeffs.shape[0]

    @property
    def n_sources(self):
        return self.coeffs.shape[1]

    def companion(self):
        P, l = self.order, self.n_sources
        C = np.zeros((l * P, l * P))
        C[:l] = np.hstack(list(self.coeffs))
        C[l:, :-l] = np.eye(l * (P - 1))
        return C

    def spectral_radius(self):
        return float(np.max(np.abs(np.linalg.eigvals(self.companion()))))

    @property
    def is_stable(self):
        return self.spectral_radius() < 1.0

    def to_dict(self):
        return {
            "order": self.order,
            "coeffs": self.coeffs.tolist(),
            "innovation_cov": self.innovation_cov.tolist(),
            "mask": self.mask.tolist(),
        }

    @classmethod
    def from_dict(cls, d, require_stable=True):
        model = cls(d["coeffs"], d.get("innovation_cov"), d.get("mask"),
                    require_stable=require_stable)
        if "order" in d and d["order"] != model.order:
            raise ValueError("order does not match coefficient array")
        return model

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def generate_mvar(l, order=DEFAULT_ORDER, offdiag_zero_fraction=DEFAULT_MASK_FRACTION,
                  seed=None, max_attempts=100):
    """Random stable MVAR model with a sparse coupling mask.

    Exactly ``round(fraction * l * (l - 1))`` off-diagonal couplings are
    zeroed. Coefficients are drawn from ``N(0, (0.5 / sqrt(l * order))^2)``;
    while the companion spectral radius ``rho`` is at least 0.95, lag ``p``
    is scaled by ``(0.95 / rho)^p``, which shrinks every companion
    eigenvalue by ``0.95 / rho``.
    """
    if not 0.0 <= offdiag_zero_fraction <= 1.0:
        raise ValueError("offdiag_zero_fraction must be in [0, 1]")
    if l < 1 or order < 1:
        raise ValueError("l and order must be positive")
    rng = np.random.default_rng(seed)
    mask = np.ones((l, l), dtype=int)
    off = np.flatnonzero(~np.eye(l, dtype=bool))
    n_zero = _round_half_up(offdiag_zero_fraction * off.size)
    if n_zero:
        mask.flat[rng.choice(off, size=n_zero, replace=False)] = 0
    A = rng.normal(0.0, 0.5 / np.sqrt(l * order), size=(order, l, l)) * mask
    lags = np.arange(1, order + 1)[:, None, None]
    for _ in range(max_attempts):
        model = MvarModel(A, np.eye(l), mask, require_stable=False)
        rho = model.spectral_radius()
        if rho < TARGET_RADIUS + 1e-9:
            return MvarModel(A, np.eye(l), mask)
        A = A * (TARGET_RADIUS / rho) ** lags
    raise StabilizationFailed(f"spectral radius still {rho:.4f} after {max_attempts} rescalings")


def _trial_rngs(seed, trials):
    if seed is None:
        seed = np.random.SeedSequence().entropy
    return [np.random.default_rng([int(seed), i]) for i in range(trials)]


def simulate_mvar_array(model, T, trials=1, seed=None, burn_in=None):
    """Simulate ``trials`` independent realizations; shape ``(trials, l, T)``.

    Trial ``i`` draws its innovations from a stream seeded by ``(seed, i)``.
    The first ``burn_in`` samples (default ``10 * order``) are discarded.
    """
    if T < 1 or trials < 1:
        raise ValueError("T and trials must be positive")
    P, l = model.order, model.n_sources
    burn = 10 * P if burn_in is None else burn_in
    total = T + burn
    L = np.linalg.cholesky(model.innovation_cov)
    E = np.stack([rng.standard_normal((total, l)) for rng in _trial_rngs(seed, trials)])
    E = E @ L.T  # (trials, total, l)
    A_stack = np.hstack(list(model.coeffs)).T  # (l*P, l)
    X = np.empty_like(E)
    lag = np.zeros((trials, l * P))
    for t in range(total):
        x = lag @ A_stack + E[:, t]
        X[:, t] = x
        lag = np.concatenate([x, lag[:, :-l]], axis=1)
    return X[:, burn:].transpose(0, 2, 1).copy()


def simulate_mvar(model, T, trials=1, seed=None, role=SignalRole.SA):
    """List of :class:`SourceSignal`, one per trial."""
    X = simulate_mvar_array(model, T, trials, seed)
    return [SourceSignal(x, role) for x in X]


def derive_interference(sa, k, seed=None, noise_scale=1.0):
    """Interference correlated with the sources of interest.

    Row ``j`` is ``-sa[j mod l]`` plus Gaussian noise whose variance equals
    that row's sample variance (times ``noise_scale**2``). ``sa`` may be a
    :class:`SourceSignal`, an ``l x T`` array or a ``trials x l x T`` stack;
    the output matches the input type.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    is_signal = isinstance(sa, SourceSignal)
    X = sa.samples if is_signal else np.asarray(sa, dtype=float)
    l = X.shape[-2]
    rows = np.arange(k) % l
    base = -X[..., rows, :]
    sd = X[..., rows, :].std(axis=-1, ddof=1, keepdims=True)
    rng = np.random.default_rng(seed)
    out = base + noise_scale * sd * rng.standard_normal(base.shape)
    return SourceSignal(out, SignalRole.IN) if is_signal else out


def fit_mvar(X, order=DEFAULT_ORDER, cond_limit=1e12):
    """Ordinary least-squares MVAR fit.

    ``X`` is ``l x T`` or a ``trials x l x T`` stack (trials are pooled
    without bridging across trial boundaries). The result is not required
    to be stable.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[None]
    n_trials, l, T = X.shape
    n_obs = n_trials * (T - order)
    if T <= order or n_obs <= 10 * order * l:
        raise InsufficientSamples(
            f"need more than {10 * order * l} usable samples, got {max(n_obs, 0)}")
    Xt = X.transpose(0, 2, 1)  # (trials, T, l)
    Y = Xt[:, order:].reshape(-1, l)
    Z = np.concatenate([Xt[:, order - p: T - p] for p in range(1, order + 1)],
                       axis=2).reshape(-1, l * order)
    s = np.linalg.svd(Z, compute_uv=False)
    if s[0] == 0.0 or s[-1] < s[0] / cond_limit:
        raise IllConditionedRegression("lagged design matrix is ill-conditioned")
    B, *_ = np.linalg.lstsq(Z, Y, rcond=None)  # (l*order, l)
    resid = Y - Z @ B
    sigma = resid.T @ resid / (n_obs - l * order)
    coeffs = B.T.reshape(l, order, l).transpose(1, 0, 2)
    return MvarModel(coeffs, 0.5 * (sigma + sigma.T), require_stable=False)


@dataclass
class PdcSpectrum:
    """``values[i, j, f]``: directed influence of source ``j`` on ``i``."""
    values: np.ndarray
    freqs: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["i", "j", "f", "value"])
            n = self.values.shape[0]
            for i in range(n):
                for j in range(n):
                    for fi, fr in enumerate(self.freqs):
                        w.writerow([i, j, repr(float(fr)), repr(float(self.values[i, j, fi]))])


def pdc(model, n_freqs=DEFAULT_N_FREQS):
    """Partial directed coherence on ``n_freqs`` points of ``[0, 0.5]``
    (cycles per sample).

    ``Abar(f) = I - sum_p A_p exp(-2 pi i f p)``;
    ``PDC_ij(f) = |Abar_ij(f)| / ||Abar_:j(f)||``.
    """
    if n_freqs < 2:
        raise ValueError("n_freqs must be at least 2")
    if not model.is_stable:
        raise UnstableModel("PDC needs a stable model")
    freqs = np.linspace(0.0, 0.5, n_freqs)
    lags = np.arange(1, model.order + 1)
    phase = np.exp(-2j * np.pi * np.outer(lags, freqs))  # (P, F)
    Abar = np.eye(model.n_sources)[:, :, None] - np.einsum("pij,pf->ijf", model.coeffs, phase)
    mag = np.abs(Abar)
    norms = np.sqrt(np.sum(mag ** 2, axis=0, keepdims=True))
    if np.any(norms == 0.0):
        raise ZeroColumn("a column of Abar vanishes")
    return PdcSpectrum(mag / norms, freqs)


def pdc_error(truth, est):
    """Euclidean distance over all source pairs and frequencies."""
    a = truth.values if isinstance(truth, PdcSpectrum) else np.asarray(truth)
    b = est.values if isinstance(est, PdcSpectrum) else np.asarray(est)
    if a.shape != b.shape:
        raise ShapeMismatch(f"PDC shapes differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))
