"""Acceptance gate: twelve criteria, each reported as one PASS/FAIL line."""
import filecmp
import json
import time

import numpy as np
import pytest

from mvpure import filters as flt
from mvpure import linalg, model, mvar
from mvpure.filters import FilterKind
from mvpure.forward import synthetic_leadfield
from mvpure.harness import cli
from mvpure.harness.config import ExperimentConfig
from mvpure.harness.experiment import build_scene, run_experiment
from mvpure.model import CovarianceModel, ForwardModel

from instances import free_instance, fro, interference_instance, spd

SEEDS = range(20)
EXACT = [("int", "MSE"), ("int", "R"), ("int", "N"),
         ("free", "MSE"), ("free", "R"), ("free", "N")]


def _mvp(family, variant, fm, cov, r):
    M = cov.N if variant == "N" else cov.R
    build = flt.mvpure_int if family == "int" else flt.mvpure_free
    return build(variant, fm, M, cov.Q, r=r)


def test_01_j_value_oracle(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for seed in SEEDS:
        fm, cov = interference_instance(seed, m=32, l=5, k=4)
        fm0, cov0 = free_instance(seed, m=32, l=5)
        for family, variant in EXACT:
            f_m, f_c = (fm, cov) if family == "int" else (fm0, cov0)
            oracle = model.mse_int if family == "int" else model.mse_free
            for r in range(1, 6):
                sf = _mvp(family, variant, f_m, f_c, r)
                worst = max(worst, abs(sf.j_value - oracle(sf.W, f_m, f_c)))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 10
    criterion(1, "J-value oracle", ok, f"max |J - mse| = {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_02_full_rank_collapse(criterion):
    worst = 0.0
    for seed in SEEDS:
        fm, cov = interference_instance(seed)
        fm0, cov0 = free_instance(seed)
        for variant in ("MSE", "R", "N"):
            M = cov.N if variant == "N" else cov.R
            W = flt.mvpure_int(variant, fm, M, cov.Q, r=fm.l).W
            worst = max(worst, fro(W - flt.nulling(fm, M, "N" if variant == "N" else "R").W))
            M0 = cov0.N if variant == "N" else cov0.R
            W0 = flt.mvpure_free(variant, fm0, M0, cov0.Q, r=fm0.l).W
            worst = max(worst, fro(W0 - flt.lcmv(fm0, M0, "N" if variant == "N" else "R").W))
    ok = worst < 1e-8
    criterion(2, "full-rank collapse", ok, f"max ||dW||_F = {worst:.2e}")
    assert ok


def test_03_constraints(criterion):
    gain = null = patch_null = 0.0
    patch_leak = np.inf
    for seed in SEEDS:
        fm, cov = interference_instance(seed)
        I = np.eye(fm.l)
        unit = [flt.lcmv(fm, cov.R), flt.lcmv(fm, cov.N, "N"), flt.nulling(fm, cov.R),
                flt.nulling(fm, cov.N, "N"), flt.zero_forcing(fm),
                flt.nulling_patch(fm, cov.R, "R", 2), flt.nulling_patch(fm, cov.N, "N", 2)]
        gain = max(gain, *(fro(sf.W @ fm.H - I) for sf in unit))
        null = max(null, fro(flt.nulling(fm, cov.R).W @ fm.H_I),
                   fro(flt.nulling(fm, cov.N, "N").W @ fm.H_I))
        for variant in ("MSE", "R", "N"):
            M = cov.N if variant == "N" else cov.R
            for r in range(1, fm.l + 1):
                null = max(null, fro(flt.mvpure_int(variant, fm, M, cov.Q, r=r).W @ fm.H_I))
        H_Is = linalg.truncated_svd(fm.H_I, 2)
        for variant in ("R", "N"):
            M = cov.N if variant == "N" else cov.R
            Ws = [flt.mvpure_patch(variant, fm, 2, M, r=r).W for r in range(1, fm.l + 1)]
            Ws.append(flt.nulling_patch(fm, M, variant, 2).W)
            for W in Ws:
                patch_null = max(patch_null, fro(W @ H_Is))
                patch_leak = min(patch_leak, fro(W @ fm.H_I))
    ok = gain < 1e-8 and null < 1e-8 and patch_null < 1e-8 and patch_leak > 1e-4
    criterion(3, "constraint satisfaction", ok,
              f"max ||WH-I|| = {gain:.1e}, max ||WH_I|| = {null:.1e}, "
              f"max ||WH_Is|| = {patch_null:.1e}, min patch ||WH_I|| = {patch_leak:.1e}")
    assert ok


def test_04_lcmv_identity(criterion):
    worst = worst_scale = 0.0
    for seed in SEEDS:
        fm, cov = free_instance(seed)
        target = np.linalg.eigvalsh(np.linalg.inv(fm.H.T @ np.linalg.solve(cov.N, fm.H))).sum()
        worst = max(worst, abs(model.mse_free(flt.lcmv(fm, cov.R).W, fm, cov) - target))
        mses = []
        for s2 in (0.5, 2.0):
            c = CovarianceModel.analytic(fm, s2 * np.eye(fm.m), Q=cov.Q)
            mses.append(model.mse_free(flt.lcmv(fm, c.R).W, fm, c))
        worst_scale = max(worst_scale, abs(mses[1] / mses[0] - 4.0) / 4.0)
    ok = worst < 1e-8 and worst_scale < 1e-8
    criterion(4, "LCMV MSE identity", ok,
              f"max |J - sum eig| = {worst:.2e}, sigma^2 scaling rel err = {worst_scale:.2e}")
    assert ok


def test_05_ill_conditioning_benefit(criterion):
    wins = losses = 0
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        fm = ForwardModel(synthetic_leadfield(32, 5, np.geomspace(1, 1e-3, 5), seed=rng))
        cov = CovarianceModel.analytic(fm, 0.1 * spd(32, rng, floor=1.0), Q=spd(5, rng))
        W = flt.mvpure_free("MSE", fm, cov.R, cov.Q).W
        mse_mvp = model.mse_free(W, fm, cov)
        mse_lcmv = model.mse_free(flt.lcmv(fm, cov.R).W, fm, cov)
        wins += mse_mvp < mse_lcmv
        losses += mse_mvp > mse_lcmv * (1 + 1e-12)
    ok = wins >= 18 and losses == 0
    criterion(5, "ill-conditioning benefit", ok, f"MV-PURE below LCMV in {wins}/20, above in {losses}")
    assert ok


def test_06_equivalent_forms(criterion):
    d_lcmv = d_null = 0.0
    for seed in SEEDS:
        fm0, cov0 = free_instance(seed)
        d_lcmv = max(d_lcmv, fro(flt.lcmv(fm0, cov0.R).W - flt.lcmv(fm0, cov0.N, "N").W))
        fm, cov = interference_instance(seed)
        d_null = max(d_null, fro(flt.nulling_closed_form(fm, cov.R) - flt.nulling(fm, cov.R).W))
    ok = d_lcmv < 1e-8 and d_null < 1e-8
    criterion(6, "equivalent filter forms", ok,
              f"LCMV(R) vs LCMV(N) {d_lcmv:.2e}, nulling closed vs projector {d_null:.2e}")
    assert ok


def test_07_source_covariance_round_trip(criterion):
    exact = 0.0
    rel = []
    for seed in SEEDS:
        fm, cov = interference_instance(seed)
        exact = max(exact, fro(model.estimate_Q_int(fm, cov.R, cov.N) - cov.Q))
        fm0, cov0 = free_instance(seed)
        exact = max(exact, fro(model.estimate_Q_free(fm0, cov0.R, cov0.N) - cov0.Q))
        rng = np.random.default_rng(10_000 + seed)
        Lq, Ln = np.linalg.cholesky(cov.Q_c), np.linalg.cholesky(cov.N)
        draw = lambda L, n: np.einsum("ij,tjs->tis", L, rng.standard_normal((100, n, 500)))
        noise_only = draw(Ln, fm.m)
        y = fm.H_c @ draw(Lq, fm.l + fm.k) + draw(Ln, fm.m)
        Qh = model.estimate_Q_int(fm, model.sample_covariance(y), model.sample_covariance(noise_only))
        rel.append(fro(Qh - cov.Q) / fro(cov.Q))
    med = float(np.median(rel))
    ok = exact < 1e-8 and med < 0.15
    criterion(7, "source covariance round trip", ok,
              f"exact err {exact:.2e}, sampled median rel err {med:.3f}")
    assert ok


def test_08_eckart_young(criterion):
    failures = 0
    for seed in SEEDS:
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((8, 6))
        r = int(rng.integers(1, 6))
        best = fro(A - linalg.truncated_svd(A, r))
        for _ in range(100):
            B = rng.standard_normal((8, r)) @ rng.standard_normal((r, 6))
            failures += fro(A - B) < best
    ok = failures == 0
    criterion(8, "Eckart-Young", ok, f"{failures} random competitors beat the truncation")
    assert ok


def test_09_mvar_pdc(criterion):
    stable = 0
    norm_err = 0.0
    for seed in range(100):
        g = mvar.generate_mvar(13, 6, 0.8, seed=seed)
        stable += g.is_stable
        norm_err = max(norm_err, np.abs((mvar.pdc(g).values ** 2).sum(axis=0) - 1).max())
    # bivariate round trip: the OLS floor makes the error grow roughly linearly in l
    errs = []
    for seed in SEEDS:
        g = mvar.generate_mvar(2, 6, 0.8, seed=seed)
        X = mvar.simulate_mvar_array(g, 100_000, 1, seed=seed + 500)
        errs.append(mvar.pdc_error(mvar.pdc(g), mvar.pdc(mvar.fit_mvar(X, 6))))
    med = float(np.median(errs))
    ok = stable == 100 and norm_err < 1e-8 and med < 0.1
    criterion(9, "MVAR / PDC", ok, f"{stable}/100 stable, normalization err {norm_err:.1e}, "
              f"round-trip median {med:.3f}")
    assert ok


NULLING_FAMILY = {"NULLING_R", "MVP_INT_MSE", "MVP_INT_R", "MVP_INT_N"}
FREE_FAMILY = {"LCMV_R", "LCMV_N", "MVP_FREE_MSE", "MVP_FREE_R", "MVP_FREE_N"}
PRINCIPLED = {k.value for k in FilterKind} - {"ZERO", "RANDOM"}
DESK = dict(sinr_db=[0, 20], sbnr_db=0, smnr_db=10, n_sensors=32, l=4, k=6, p=6,
            n_runs=20, n_trials=20, samples_per_trial=1000)


@pytest.fixture(scope="module")
def desk_study():
    t0 = time.perf_counter()
    results = run_experiment(ExperimentConfig(**DESK))
    return results, time.perf_counter() - t0


def _median(results, sinr, kinds):
    return float(np.median([f.reconstruction_error for r in results if r.sinr_db == sinr
                            for f in r.filters if f.kind in kinds]))


def test_10_end_to_end_ordering(criterion, desk_study):
    results, elapsed = desk_study
    nul0, free0 = _median(results, 0, NULLING_FAMILY), _median(results, 0, FREE_FAMILY)
    nul20, free20 = _median(results, 20, NULLING_FAMILY), _median(results, 20, FREE_FAMILY)
    ok = nul0 < free0 and free20 <= 1.1 * nul20 and elapsed < 300
    criterion(10, "end-to-end ordering", ok,
              f"0 dB nulling {nul0:.1f} vs free {free0:.1f}; "
              f"20 dB free/nulling = {free20 / nul20:.3f}; {elapsed:.1f} s")
    assert ok


def test_11_sanity_filters(criterion, desk_study):
    results, _ = desk_study
    cfg = ExperimentConfig(**DESK)
    sa_norm = {i: float(np.linalg.norm(build_scene(cfg, i).SA)) for i in range(cfg.n_runs)}
    zero_exact = all(rr.by_kind()["ZERO"].reconstruction_error == sa_norm[rr.run_index]
                     for rr in results)
    worse = 0
    for rr in results:
        fr = rr.by_kind()
        worse += all(fr["RANDOM"].reconstruction_error > fr[k].reconstruction_error
                     for k in PRINCIPLED if np.isfinite(fr[k].reconstruction_error))
    share = worse / len(results)
    ok = zero_exact and share >= 0.95
    criterion(11, "sanity filters", ok,
              f"zero filter exact: {zero_exact}; random worst in {share:.0%} of runs")
    assert ok


def test_12_determinism(criterion, tmp_path):
    cfg = {"schema_version": 1, "sinr_db": [0, 10], "n_sensors": 24, "l": 3, "k": 4, "p": 4,
           "n_runs": 3, "n_trials": 4, "samples_per_trial": 300, "master_seed": 11}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    for name in ("a", "b"):
        assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / name),
                         "--seed", "42"]) == 0
    same = filecmp.cmp(tmp_path / "a" / "results.csv", tmp_path / "b" / "results.csv",
                       shallow=False)
    ok = same and (tmp_path / "a" / "results.csv").stat().st_size > 0
    criterion(12, "determinism", ok, f"results.csv byte-identical: {same}")
    assert ok
