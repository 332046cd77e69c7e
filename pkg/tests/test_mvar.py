import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvpure import mvar
from mvpure.errors import (InsufficientSamples, ShapeMismatch, UnstableModel,
                           ZeroColumn)
from mvpure.model import SignalRole, SourceSignal
from mvpure.mvar import MvarModel


class TestMvarModel:
    def test_ar1(self):
        m = MvarModel([[[0.5]]])
        assert m.is_stable and m.spectral_radius() == pytest.approx(0.5)

    def test_unstable_rejected(self):
        with pytest.raises(UnstableModel):
            MvarModel([[[1.2]]])
        assert not MvarModel([[[1.2]]], require_stable=False).is_stable

    def test_mask_enforced(self):
        with pytest.raises(ValueError):
            MvarModel(np.full((1, 2, 2), 0.1), mask=[[1, 0], [1, 1]])

    def test_companion_eigs_match_roots(self):
        # scalar AR(2): x_t = a x_{t-1} + b x_{t-2}
        a, b = 0.5, -0.3
        m = MvarModel([[[a]], [[b]]])
        roots = np.roots([1, -a, -b])
        assert m.spectral_radius() == pytest.approx(np.abs(roots).max())

    def test_json_round_trip(self, tmp_path):
        m = mvar.generate_mvar(4, 3, seed=1)
        m.save(tmp_path / "m.json")
        m2 = MvarModel.load(tmp_path / "m.json")
        np.testing.assert_array_equal(m.coeffs, m2.coeffs)
        np.testing.assert_array_equal(m.mask, m2.mask)


class TestGenerate:
    @pytest.mark.parametrize("seed", range(20))
    def test_stable_and_masked(self, seed):
        m = mvar.generate_mvar(13, 6, 0.8, seed=seed)
        assert m.spectral_radius() < 1.0
        off = ~np.eye(13, dtype=bool)
        assert int((m.mask[off] == 0).sum()) == 125
        assert np.all(m.coeffs[:, m.mask == 0] == 0)

    def test_full_mask(self):
        m = mvar.generate_mvar(5, 2, 1.0, seed=0)
        off = ~np.eye(5, dtype=bool)
        assert np.all(m.coeffs[:, off] == 0)

    def test_deterministic(self):
        a, b = mvar.generate_mvar(4, seed=3), mvar.generate_mvar(4, seed=3)
        np.testing.assert_array_equal(a.coeffs, b.coeffs)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 8), st.floats(0, 1), st.integers(0, 2**31))
    def test_always_stable(self, l, order, frac, seed):
        m = mvar.generate_mvar(l, order, frac, seed=seed)
        assert m.spectral_radius() < 0.95 + 1e-9

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            mvar.generate_mvar(3, 2, 1.5)


class TestSimulate:
    def test_white_output(self):
        cov = np.array([[2.0, 0.5], [0.5, 1.0]])
        m = MvarModel(np.zeros((2, 2, 2)), cov)
        X = mvar.simulate_mvar_array(m, 100_000, 1, seed=0)[0]
        assert np.linalg.norm(np.cov(X) - cov) < 0.05

    def test_ar1_variance(self):
        X = mvar.simulate_mvar_array(MvarModel([[[0.9]]]), 100_000, 1, seed=1)[0]
        assert X.var() == pytest.approx(1 / (1 - 0.81), abs=0.3)

    def test_deterministic_and_shaped(self):
        m = mvar.generate_mvar(3, seed=0)
        a = mvar.simulate_mvar_array(m, 50, 4, seed=7)
        assert a.shape == (4, 3, 50)
        np.testing.assert_array_equal(a, mvar.simulate_mvar_array(m, 50, 4, seed=7))
        assert not np.array_equal(a[0], a[1])

    def test_recursion(self):
        m = MvarModel([[[0.5]]])
        X = mvar.simulate_mvar_array(m, 30, 1, seed=2, burn_in=0)[0, 0]
        e = np.random.default_rng([2, 0]).standard_normal(30)
        expected = np.empty(30)
        prev = 0.0
        for t in range(30):
            prev = 0.5 * prev + e[t]
            expected[t] = prev
        np.testing.assert_allclose(X, expected, atol=1e-14)

    def test_signal_wrappers(self):
        sigs = mvar.simulate_mvar(mvar.generate_mvar(2, seed=0), 20, 3, seed=1)
        assert len(sigs) == 3 and sigs[0].samples.shape == (2, 20)
        assert sigs[0].role is SignalRole.SA


class TestInterference:
    def test_no_noise(self):
        sa = np.random.default_rng(0).standard_normal((3, 100))
        out = mvar.derive_interference(sa, 5, seed=1, noise_scale=0.0)
        np.testing.assert_array_equal(out, -sa[[0, 1, 2, 0, 1]])

    def test_power_and_correlation(self):
        sa = np.random.default_rng(1).standard_normal((2, 100_000)) * [[1.0], [3.0]]
        out = mvar.derive_interference(sa, 2, seed=2)
        noise = out + sa
        np.testing.assert_allclose(noise.var(axis=1) / sa.var(axis=1), 1.0, atol=0.05)
        for j in range(2):
            c = np.corrcoef(out[j], sa[j])[0, 1]
            assert c == pytest.approx(-1 / np.sqrt(2), abs=0.03)

    def test_signal_in_signal_out(self):
        sa = SourceSignal(np.random.default_rng(2).standard_normal((2, 50)), SignalRole.SA)
        out = mvar.derive_interference(sa, 3, seed=0)
        assert out.role is SignalRole.IN and out.samples.shape == (3, 50)


class TestFit:
    def test_recovers_generator(self):
        m = mvar.generate_mvar(3, 2, 0.5, seed=4)
        X = mvar.simulate_mvar_array(m, 100_000, 1, seed=5)
        fit = mvar.fit_mvar(X, 2)
        assert np.linalg.norm(fit.coeffs - m.coeffs) < 0.05
        assert np.linalg.norm(fit.innovation_cov - np.eye(3)) < 0.05

    @pytest.mark.parametrize("l", [2, 4])
    def test_error_at_least_squares_floor(self, l):
        # unit innovations make the lagged covariance >= I, so the expected
        # squared coefficient error is at most order * l^2 / T
        T, order = 100_000, 6
        errs = []
        for seed in range(5):
            m = mvar.generate_mvar(l, order, 0.8, seed=seed)
            fit = mvar.fit_mvar(mvar.simulate_mvar_array(m, T, 1, seed=seed + 50), order)
            errs.append(np.linalg.norm(fit.coeffs - m.coeffs))
        assert np.median(errs) < 1.3 * np.sqrt(order * l * l / T)

    def test_white_noise(self):
        X = np.random.default_rng(0).standard_normal((3, 100_000))
        assert np.abs(mvar.fit_mvar(X, 4).coeffs).max() < 0.05

    def test_pooled_trials_match_single_long_fit(self):
        m = mvar.generate_mvar(2, 2, seed=6)
        X = mvar.simulate_mvar_array(m, 5000, 8, seed=1)
        fit = mvar.fit_mvar(X, 2)
        assert np.linalg.norm(fit.coeffs - m.coeffs) < 0.1

    def test_too_short(self):
        with pytest.raises(InsufficientSamples):
            mvar.fit_mvar(np.zeros((3, 40)), 6)


class TestPdc:
    def test_identity_for_white(self):
        p = mvar.pdc(MvarModel(np.zeros((2, 3, 3))), 16)
        np.testing.assert_array_equal(p.values, np.broadcast_to(np.eye(3)[:, :, None], (3, 3, 16)))
        np.testing.assert_allclose(p.freqs, np.linspace(0, 0.5, 16))

    def test_structural_zero(self):
        A = np.zeros((2, 3, 3))
        A[:, 1, 0] = [0.3, -0.2]
        A[:, 0, 0] = 0.2
        p = mvar.pdc(MvarModel(A), 32)
        assert np.all(p.values[2, 0] == 0) and np.all(p.values[0, 1] == 0)
        assert np.all(p.values[1, 0] > 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_column_normalization(self, seed):
        p = mvar.pdc(mvar.generate_mvar(2 + seed, 3, 0.3, seed=seed), 64)
        np.testing.assert_allclose((p.values ** 2).sum(axis=0), 1.0, atol=1e-10)
        assert p.values.min() >= 0 and p.values.max() <= 1 + 1e-12

    def test_bivariate_hand_formula(self):
        A = np.array([[[0.4, 0.0], [0.3, 0.2]]])
        p = mvar.pdc(MvarModel(A), 5)
        for fi, f in enumerate(p.freqs):
            Ab = np.eye(2) - A[0] * np.exp(-2j * np.pi * f)
            col = np.abs(Ab[:, 0])
            assert p.values[1, 0, fi] == pytest.approx(col[1] / np.linalg.norm(col), abs=1e-14)

    def test_needs_stable_model(self):
        with pytest.raises(UnstableModel):
            mvar.pdc(MvarModel([[[1.0]]], require_stable=False))

    def test_zero_column(self, monkeypatch):
        # Abar(0) = 1 - 1 vanishes; the stability guard is bypassed to reach it
        m = MvarModel([[[1.0]]], require_stable=False)
        monkeypatch.setattr(MvarModel, "is_stable", property(lambda self: True))
        with pytest.raises(ZeroColumn):
            mvar.pdc(m, 4)

    def test_csv(self, tmp_path):
        p = mvar.pdc(mvar.generate_mvar(2, 1, seed=0), 3)
        p.to_csv(tmp_path / "p.csv")
        rows = list(csv.reader(open(tmp_path / "p.csv")))
        assert rows[0] == ["i", "j", "f", "value"] and len(rows) == 1 + 2 * 2 * 3


class TestPdcError:
    def test_identical(self):
        p = mvar.pdc(mvar.generate_mvar(3, seed=0))
        assert mvar.pdc_error(p, p) == 0.0

    def test_against_zero(self):
        p = mvar.pdc(mvar.generate_mvar(3, seed=0))
        assert mvar.pdc_error(p, np.zeros_like(p.values)) == pytest.approx(
            np.sqrt((p.values ** 2).sum()), rel=1e-14)

    def test_direct_summation(self):
        a = mvar.pdc(mvar.generate_mvar(3, seed=1)).values
        b = mvar.pdc(mvar.generate_mvar(3, seed=2)).values
        total = 0.0
        for x, y in zip(a.ravel(), b.ravel()):
            total += (x - y) ** 2
        assert mvar.pdc_error(a, b) == pytest.approx(np.sqrt(total), abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            mvar.pdc_error(np.zeros((2, 2, 4)), np.zeros((2, 2, 5)))
