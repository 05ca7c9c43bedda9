"""Tests for matrix modulation norms and the symbol-side modulation criteria."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dixmier_lab.modulated import (
    ModulationError,
    PreconditionError,
    ReferencePair,
    moderate_growth,
    reasonable_decay,
    spectral_modulation_norm,
    strong_modulation_norm,
    symbol_l2_criterion,
    weak_modulation_check,
    weak_modulation_scan,
)
from dixmier_lab.regvar import family
from dixmier_lab.torus_op import symbol_from_key

PHI0 = family("phi:-1:0")
PHI1 = family("phi:-1:1")
MU = PHI0(np.arange(64, dtype=float))


def _random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestReferencePair:
    def test_eigen_cache(self):
        rng = np.random.default_rng(3)
        U = _random_unitary(rng, 16)
        V = U @ np.diag(MU[:16]) @ U.conj().T
        pair = ReferencePair(np.eye(16), V)
        np.testing.assert_allclose(pair.mu, MU[:16], rtol=1e-10)
        np.testing.assert_allclose(pair.U.conj().T @ pair.U, np.eye(16), atol=1e-10)
        assert np.all(np.diff(pair.mu) <= 0)

    def test_rejects(self):
        with pytest.raises(ModulationError):
            ReferencePair(np.eye(2), np.diag([1.0, -1.0]))
        with pytest.raises(ModulationError):
            ReferencePair(np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]]))
        with pytest.raises(ModulationError):
            ReferencePair(np.eye(3), np.eye(2))

    def test_tiny_negative_clamped(self):
        pair = ReferencePair.diagonal(np.eye(2), [1.0, -1e-14])
        assert pair.mu[-1] == 0.0


class TestMatrixNorms:
    @pytest.mark.parametrize("norm", [strong_modulation_norm, spectral_modulation_norm])
    def test_self_modulated(self, norm):
        rep = norm(ReferencePair.diagonal(np.diag(MU), MU), PHI0)
        assert rep.verdict == "finite"
        assert np.all(rep.values >= 0)
        assert rep.sup_estimate == rep.values.max()

    @pytest.mark.parametrize("norm", [strong_modulation_norm, spectral_modulation_norm])
    def test_identity_diverges(self, norm):
        rep = norm(ReferencePair.diagonal(np.eye(64), MU), PHI0)
        assert rep.verdict == "diverging"

    def test_t_zero(self):
        G = np.diag(MU)
        pair = ReferencePair.diagonal(G, MU)
        for norm in (strong_modulation_norm, spectral_modulation_norm):
            rep = norm(pair, PHI0, [0.0, 1.0])
            np.testing.assert_allclose(rep.values[0], np.linalg.norm(G) / np.sqrt(PHI0(0.0)), rtol=1e-12)

    def test_strong_closed_form(self):
        t = np.array([1.0, 10.0, 100.0])
        rep = strong_modulation_norm(ReferencePair.diagonal(np.diag(MU), MU), PHI0, t)
        expected = [np.sqrt(np.sum((MU / (1 + ti * MU)) ** 2) / PHI0(ti)) for ti in t]
        np.testing.assert_allclose(rep.values, expected, rtol=1e-12)

    def test_projection_annihilates(self):
        # G lives on the top four eigenvectors, all with eigenvalue > 1/t0
        G = np.zeros((64, 64))
        G[:4, :4] = np.eye(4)
        t0 = 1.0 / MU[4]
        rep = spectral_modulation_norm(ReferencePair.diagonal(G, MU), PHI0, [t0, 2 * t0, 10 * t0])
        np.testing.assert_array_equal(rep.values, 0.0)

    def test_rank_one_top(self):
        G = np.zeros((64, 64))
        G[0, 0] = 1.0
        t = np.geomspace(1.01 / MU[0], 1e4, 10)
        rep = spectral_modulation_norm(ReferencePair.diagonal(G, MU), PHI0, t)
        np.testing.assert_array_equal(rep.values, 0.0)

    @given(st.integers(0, 10**6))
    @settings(max_examples=25, deadline=None)
    def test_left_ideal(self, seed):
        rng = np.random.default_rng(seed)
        G = rng.normal(size=(32, 32))
        A = rng.normal(size=(32, 32))
        A /= np.linalg.norm(A, 2)
        mu = MU[:32]
        t = np.geomspace(1, 1e3, 12)
        base = strong_modulation_norm(ReferencePair.diagonal(G, mu), PHI0, t).values
        left = strong_modulation_norm(ReferencePair.diagonal(A @ G, mu), PHI0, t).values
        assert np.all(left <= np.linalg.norm(A, 2) * base + 1e-10)

    def test_csv(self):
        rep = strong_modulation_norm(ReferencePair.diagonal(np.diag(MU), MU), PHI0, [1.0, 2.0])
        assert rep.to_csv().splitlines()[0] == "t,value"
        assert rep.summary()["verdict"] == rep.verdict


class TestWeak:
    def test_square_p2(self):
        rep = weak_modulation_check(ReferencePair.diagonal(np.diag(MU**2), MU), PHI0, 2.0)
        assert rep.q == 2.0
        assert rep.verdict == "finite"
        # μ(n)^2 / φ(n) = φ(n)^2 is largest at n = 0, and its square root is φ(0)
        np.testing.assert_allclose(rep.norm, MU[0], rtol=1e-10)

    def test_self_p1(self):
        rep = weak_modulation_check(ReferencePair.diagonal(np.diag(MU), MU), PHI0, 1.0)
        np.testing.assert_allclose(rep.norm, 1.0, rtol=1e-10)
        assert rep.verdict == "finite"

    def test_kernel_precondition(self):
        mu = MU.copy()
        mu[32:] = 0.0
        G = np.zeros((64, 64))
        G[:, 40] = np.random.default_rng(0).normal(size=64)
        with pytest.raises(PreconditionError):
            weak_modulation_check(ReferencePair.diagonal(G, mu), PHI0, 2.0)

    def test_scan(self):
        reps = weak_modulation_scan(ReferencePair.diagonal(np.diag(MU), MU), PHI0)
        assert [r.p for r in reps] == [1.0, 2.0, 4.0]

    def test_p_below_one(self):
        with pytest.raises(ModulationError):
            weak_modulation_check(ReferencePair.diagonal(np.diag(MU), MU), PHI0, 0.5)


class TestSymbolCriteria:
    T = np.geomspace(1e1, 1e8, 30)

    @pytest.mark.parametrize("x", ["1", "cos", "2+cos"])
    def test_l2_phi_symbol_finite(self, x):
        rep = symbol_l2_criterion(symbol_from_key(f"{x}*varphi:phi:-1:1", 1), PHI1, self.T)
        assert rep.verdict == "finite"

    def test_l2_fat_tail_diverges(self):
        rep = symbol_l2_criterion(symbol_from_key("bracket:-0.25", 1), PHI0, self.T[::3])
        assert rep.verdict == "diverging"
        assert np.isinf(rep.sup_estimate)

    def test_l2_zero(self):
        rep = symbol_l2_criterion(symbol_from_key("zero", 1), PHI0, self.T)
        np.testing.assert_array_equal(rep.values, 0.0)

    def test_growth_constant_bands(self):
        rep = moderate_growth(symbol_from_key("varphi:phi:-1:1", 1), PHI1)
        assert rep.verdict == "finite"
        # d = 1 counts ξ and -ξ, so each band has measure close to 2
        np.testing.assert_allclose(rep.bands[-5:], 2.0, rtol=1e-3)

    def test_growth_log_amplified_diverges(self):
        rep = moderate_growth(symbol_from_key("logbracket:1", 1), PHI0)
        assert rep.verdict == "diverging"
        assert np.all(np.diff(rep.bands[-10:]) > 0)

    def test_growth_two_dimensional(self):
        rep = moderate_growth(symbol_from_key("bracket:-2", 2), PHI0, k_max=20)
        np.testing.assert_allclose(rep.bands[-3:], np.pi, rtol=1e-4)

    def test_growth_zero(self):
        rep = moderate_growth(symbol_from_key("zero", 1), PHI0)
        np.testing.assert_array_equal(rep.bands, 0.0)
        assert rep.sup_estimate == 0.0

    @pytest.mark.parametrize("key,f", [("varphi:phi:-1:1", PHI1), ("bracket:-1", PHI0)])
    def test_decay_true(self, key, f):
        rep = reasonable_decay(symbol_from_key(key, 1), f, np.geomspace(1e2, 1e7, 20))
        assert rep.verdict
        assert rep.values[-1] < 1e-4 * rep.values[0]

    def test_decay_zero(self):
        rep = reasonable_decay(symbol_from_key("zero", 1), PHI0, [10.0, 100.0])
        assert rep.verdict
        np.testing.assert_array_equal(rep.values, 0.0)
