"""Monte-Carlo simulation runs.

One run draws a source geometry, true and perturbed leadfields and fresh
MVAR models, simulates ``n_trials`` trials and scores every roster filter.
The first half of each trial holds background activity and measurement
noise only (noise covariance estimate), the second half adds the sources of
interest and the interference (measurement covariance estimate). Filters
are always built from the perturbed leadfields while the data are mixed
through the true ones.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import filters as flt
from .. import forward, model, mvar
from ..errors import MvpureError, ZeroPowerReference
from ..filters import FilterKind

log = logging.getLogger(__name__)

FREE_FAMILY = frozenset({
    FilterKind.LCMV_R, FilterKind.LCMV_N, FilterKind.EIG_LCMV, FilterKind.MMSE,
    FilterKind.ZERO_FORCING, *flt.MVP_FREE_KINDS.values()})
NEEDS_Q = flt.RANK_SELECTABLE_KINDS | {FilterKind.MMSE}


def signal_power(x):
    """Mean squared value over all entries."""
    x = np.asarray(x, dtype=float)
    return float(np.mean(x * x))


def snr_gain(signal, reference, target_db):
    """Amplitude factor ``g`` with ``10 log10(P(g * signal) / P(reference))
    = target_db``."""
    p_sig, p_ref = signal_power(signal), signal_power(reference)
    if p_ref == 0.0:
        raise ZeroPowerReference("reference signal has zero power")
    if p_sig == 0.0:
        raise ZeroPowerReference("signal to scale has zero power")
    return float(np.sqrt(p_ref / p_sig * 10.0 ** (target_db / 10.0)))


def scale_to_snr(signal_sensor, reference_sensor, target_db):
    return snr_gain(signal_sensor, reference_sensor, target_db) * np.asarray(signal_sensor)


@dataclass
class FilterResult:
    kind: str
    reconstruction_error: float = float("nan")
    pdc_error: float = float("nan")
    selected_rank: int = None
    j_value: float = None
    status: str = "ok"
    elapsed_s: float = 0.0


@dataclass
class RunResult:
    run_index: int
    sinr_db: float
    sbnr_db: float
    smnr_db: float
    seed_entropy: tuple
    cond_H: float
    cond_Hc: float
    filters: list = field(default_factory=list)
    elapsed_s: float = 0.0

    def by_kind(self):
        return {f.kind: f for f in self.filters}


def _seed_int(ss):
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class _Scene:
    """Everything in a run that does not depend on the SNR point."""
    fm_true: model.ForwardModel
    fm_est: model.ForwardModel
    sa_model: mvar.MvarModel
    SA: np.ndarray      # (trials, l, half)
    y_sa: np.ndarray    # (trials, m, half)
    y_in: np.ndarray    # (trials, m, half) or None
    y_bn: np.ndarray    # (trials, m, T) or None
    white: np.ndarray   # (trials, m, T), unit variance
    random_seed: int


def _geometry(cfg, rng):
    n_sh = cfg.resolved_p_shallow
    sa = forward.random_geometry(cfg.l, rng, cfg.cortical_depth, cfg.head_radius)
    inter = forward.random_geometry(cfg.k, rng, cfg.cortical_depth, cfg.head_radius)
    shallow = forward.random_geometry(n_sh, rng, cfg.shallow_depth, cfg.head_radius)
    deep = forward.random_geometry(cfg.p - n_sh, rng, cfg.deep_depth, cfg.head_radius)
    bn = forward.SourceGeometry(np.vstack([shallow.positions, deep.positions]),
                                np.vstack([shallow.orientations, deep.orientations]),
                                cfg.head_radius)
    return sa, inter, bn


def build_scene(cfg, run_index):
    ss = np.random.SeedSequence([cfg.master_seed, run_index])
    (s_geo, s_pert, s_sa_model, s_bn_model, s_sa, s_bn, s_in,
     s_mn, s_rand) = ss.spawn(9)
    sensors = forward.fibonacci_sensors(cfg.n_sensors, cfg.head_radius)
    g_sa, g_in, g_bn = _geometry(cfg, np.random.default_rng(s_geo))

    def lf(g, check=True):
        return forward.spherical_leadfield(g, sensors, cfg.conductivity, check_rank=check)

    fm_true = model.ForwardModel(lf(g_sa), lf(g_in), lf(g_bn, check=False))
    rng_pert = np.random.default_rng(s_pert)
    p_sa = forward.perturb_geometry(g_sa, cfg.perturb_shift_m, cfg.perturb_angle_rad, rng_pert)
    p_in = forward.perturb_geometry(g_in, cfg.perturb_shift_m, cfg.perturb_angle_rad, rng_pert)
    fm_est = model.ForwardModel(lf(p_sa), lf(p_in))

    T = cfg.samples_per_trial
    half = T // 2
    sa_model = mvar.generate_mvar(cfg.l, cfg.mvar_order, cfg.mask_fraction,
                                  seed=np.random.default_rng(s_sa_model))
    SA = mvar.simulate_mvar_array(sa_model, half, cfg.n_trials, _seed_int(s_sa))
    y_sa = fm_true.H @ SA
    y_in = y_bn = None
    if cfg.k:
        IN = mvar.derive_interference(SA, cfg.k, seed=np.random.default_rng(s_in))
        y_in = fm_true.H_I @ IN
    if cfg.p:
        bn_model = mvar.generate_mvar(cfg.p, cfg.mvar_order, 0.0,
                                      seed=np.random.default_rng(s_bn_model))
        BN = mvar.simulate_mvar_array(bn_model, T, cfg.n_trials, _seed_int(s_bn))
        y_bn = fm_true.H_b @ BN
    white = np.random.default_rng(s_mn).standard_normal((cfg.n_trials, cfg.n_sensors, T))
    return _Scene(fm_true, fm_est, sa_model, SA, y_sa, y_in, y_bn, white, _seed_int(s_rand))


def mix(scene, sinr_db, sbnr_db, smnr_db):
    """Sensor data ``(trials, m, T)`` at the requested SNRs.

    Every ratio is the power of the sources of interest over the power of the
    other component, measured at the sensors over the active window.
    """
    half = scene.y_sa.shape[2]
    Y = scene.white * np.sqrt(signal_power(scene.y_sa) / 10.0 ** (smnr_db / 10.0))
    if scene.y_bn is not None:
        g = snr_gain(scene.y_bn[:, :, half:], scene.y_sa, -sbnr_db)
        Y = Y + g * scene.y_bn
    active = scene.y_sa.copy()
    if scene.y_in is not None:
        active += snr_gain(scene.y_in, scene.y_sa, -sinr_db) * scene.y_in
    Y[:, :, half:] += active
    return Y


def _cond(A):
    s = np.linalg.svd(A, compute_uv=False)
    return float(s[0] / s[-1])


def _status(exc):
    return f"error:{type(exc).__name__}"


def run_single(cfg, run_index, snr, scene=None):
    """Score the roster on one run at one SNR point."""
    t0 = time.perf_counter()
    sinr, sbnr, smnr = snr
    scene = scene or build_scene(cfg, run_index)
    Y = mix(scene, sinr, sbnr, smnr)
    half = scene.y_sa.shape[2]
    N_hat = model.sample_covariance(Y[:, :, :half], cfg.diagonal_loading)
    R_hat = model.sample_covariance(Y[:, :, half:], cfg.diagonal_loading)
    Y_act = Y[:, :, half:]
    fm_int = scene.fm_est
    fm_free = fm_int.without_interference()

    q_cache = {}

    def q_for(free):
        if free not in q_cache:
            if cfg.q_source == "oracle":
                q_cache[free] = model.sample_covariance(scene.SA)
            elif free:
                q_cache[free] = model.estimate_Q_free(fm_free, R_hat, N_hat)
            else:
                q_cache[free] = model.estimate_Q_int(fm_int, R_hat, N_hat)
        return q_cache[free]

    truth_pdc = mvar.pdc(scene.sa_model, cfg.n_freqs)
    out = RunResult(run_index, sinr, sbnr, smnr, (cfg.master_seed, run_index),
                    _cond(scene.fm_true.H), _cond(scene.fm_true.H_c))
    for name in cfg.filter_roster:
        kind = FilterKind(name)
        res = FilterResult(kind.value)
        t1 = time.perf_counter()
        free = kind in FREE_FAMILY
        try:
            Q = q_for(free) if kind in NEEDS_Q else None
            sf = flt.build(kind, fm_free if free else fm_int, R_hat, N_hat,
                           Q, s=cfg.resolved_patch_rank,
                           sig=cfg.resolved_eig_sig, seed=scene.random_seed)
        except (MvpureError, np.linalg.LinAlgError) as exc:
            res.status = _status(exc)
            res.elapsed_s = time.perf_counter() - t1
            out.filters.append(res)
            continue
        if kind in flt.RANK_SELECTABLE_KINDS:
            res.selected_rank = sf.rank
        res.j_value = sf.j_value
        est = flt.apply_filter(sf, Y_act)
        res.reconstruction_error = float(np.linalg.norm(est - scene.SA))
        if np.all(np.isfinite(est)):
            try:
                fitted = mvar.fit_mvar(est, cfg.mvar_order)
                res.pdc_error = mvar.pdc_error(truth_pdc, mvar.pdc(fitted, cfg.n_freqs))
            except (MvpureError, np.linalg.LinAlgError) as exc:
                res.status = "pdc_" + _status(exc)
        res.elapsed_s = time.perf_counter() - t1
        out.filters.append(res)
    out.elapsed_s = time.perf_counter() - t0
    return out


def _run_all_points(args):
    cfg, run_index = args
    scene = build_scene(cfg, run_index)
    return [run_single(cfg, run_index, snr, scene) for snr in cfg.snr_points()]


def run_experiment(cfg, jobs=1):
    """All runs at all SNR points, ordered by SNR point then run index.

    Runs share nothing but the config, so ``jobs > 1`` farms them out to
    worker processes without changing the results.
    """
    tasks = [(cfg, i) for i in range(cfg.n_runs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_run = list(pool.map(_run_all_points, tasks))
    else:
        per_run = []
        for t in tasks:
            per_run.append(_run_all_points(t))
            log.info("run %d/%d done", t[1] + 1, cfg.n_runs)
    n_points = len(cfg.snr_points())
    return [per_run[i][j] for j in range(n_points) for i in range(cfg.n_runs)]
