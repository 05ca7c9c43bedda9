"""Tests for singular sequences and weak/Lorentz ideal quasi-norms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dixmier_lab import ideals
from dixmier_lab.ideals import (
    IdealsError,
    SingularSequence,
    convexified_quasinorm,
    holder_check,
    lorentz_norm,
    singular_values,
    weak_quasinorm,
)
from dixmier_lab.regvar import family

PHI = family("phi:-1:0")


def _random_unitary(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


nonneg = arrays(np.float64, st.integers(1, 60), elements=st.floats(0, 1e3, allow_nan=False))


class TestSingularSequence:
    def test_validation(self):
        with pytest.raises(IdealsError):
            SingularSequence(np.array([1.0, 2.0]))
        with pytest.raises(IdealsError):
            SingularSequence(np.array([1.0, -1.0]))
        with pytest.raises(IdealsError):
            SingularSequence(np.array([1.0]), origin="other")

    def test_from_unsorted(self):
        seq = SingularSequence.from_unsorted([1.0, -3.0, 2.0, 0.0])
        np.testing.assert_array_equal(seq.values, [3.0, 2.0, 1.0, 0.0])
        assert seq.N == 4
        assert not seq.values.flags.writeable

    @given(nonneg, st.floats(0, 1e3))
    @settings(max_examples=80, deadline=None)
    def test_counting_duality(self, vals, s):
        seq = SingularSequence.from_unsorted(vals)
        n = int(seq.counting_function()(s))
        if n < seq.N:
            assert seq.values[n] <= s
        if n > 0:
            assert seq.values[n - 1] > s

    def test_csv_roundtrip(self, tmp_path):
        seq = SingularSequence(np.array([3.0, 1.5, 0.25]))
        path = tmp_path / "mu.csv"
        seq.to_csv(path)
        np.testing.assert_array_equal(ideals.read_sequence_csv(path), seq.values)


class TestSingularValues:
    def test_identity(self):
        np.testing.assert_allclose(singular_values(np.eye(5)).values, np.ones(5))

    def test_normal_diagonal(self):
        np.testing.assert_allclose(singular_values(np.diag([3.0, -4.0])).values, [4.0, 3.0])

    def test_unitary_invariance(self):
        rng = np.random.default_rng(7)
        A = rng.normal(size=(8, 8))
        U, V = _random_unitary(rng, 8), _random_unitary(rng, 8)
        np.testing.assert_allclose(singular_values(U @ A @ V).values, singular_values(A).values, atol=1e-10)

    def test_rejects_nonfinite(self):
        with pytest.raises(IdealsError):
            singular_values(np.array([[np.nan]]))


class TestNorms:
    def test_weak_exact(self):
        n = np.arange(200, dtype=float)
        rep = weak_quasinorm(SingularSequence(PHI(n)), PHI)
        np.testing.assert_allclose(rep.value, 1.0, rtol=1e-14)
        rep2 = weak_quasinorm(SingularSequence(2 * PHI(n)), PHI)
        np.testing.assert_allclose(rep2.value, 2.0, rtol=1e-14)

    def test_weak_inverse_square(self):
        n = np.arange(100, dtype=float)
        rep = weak_quasinorm(SingularSequence(1.0 / (n + 1) ** 2), PHI)
        assert rep.argmax == 0
        np.testing.assert_allclose(rep.value, math.e, rtol=1e-14)
        assert rep.N == 100

    def test_lorentz_examples(self):
        n = np.arange(1000, dtype=float)
        rep = lorentz_norm(SingularSequence(PHI(n)), PHI)
        brute = max(np.cumsum(PHI(n)) / np.log(math.e + n + 1))
        np.testing.assert_allclose(rep.value, brute, rtol=1e-14)
        assert rep.value <= 1.0 + PHI(0.0) / PHI.primitive(1.0)
        e0 = lorentz_norm(SingularSequence(np.array([1.0, 0.0, 0.0])), PHI)
        np.testing.assert_allclose(e0.value, 1.0 / PHI.primitive(1.0))

    def test_convexified(self):
        n = np.arange(300, dtype=float)
        rep = convexified_quasinorm(SingularSequence(np.sqrt(PHI(n))), PHI, 2.0)
        np.testing.assert_allclose(rep.value, 1.0, rtol=1e-12)
        seq = SingularSequence(1.0 / (n + 1))
        np.testing.assert_allclose(
            convexified_quasinorm(seq, PHI, 1.0).value, weak_quasinorm(seq, PHI).value
        )
        with pytest.raises(IdealsError):
            convexified_quasinorm(seq, PHI, 0.0)

    @given(nonneg, st.floats(0.01, 100.0))
    @settings(max_examples=60, deadline=None)
    def test_homogeneity(self, vals, a):
        seq = SingularSequence.from_unsorted(vals)
        scaled = SingularSequence(a * seq.values)
        for norm in (weak_quasinorm, lorentz_norm):
            np.testing.assert_allclose(norm(scaled, PHI).value, a * norm(seq, PHI).value, rtol=1e-12)

    @given(nonneg, st.floats(0.0, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone_under_domination(self, vals, shrink):
        seq = SingularSequence.from_unsorted(vals)
        smaller = SingularSequence(seq.values * shrink)
        for norm in (weak_quasinorm, lorentz_norm):
            assert norm(smaller, PHI).value <= norm(seq, PHI).value * (1 + 1e-12)

    def test_schatten_inclusion(self):
        # Σ φ(k)^1.5 converges; the partial sums from 1e5 to 1e6 differ by the tail integral
        k = np.arange(10**6, dtype=float)
        partial = np.cumsum(PHI(k) ** 1.5)
        assert abs(partial[-1] - partial[10**5 - 1]) / partial[-1] < 1e-2
        # the tail ∫_{1e5}^{∞} (e+t)^{-1.5} dt = 2/sqrt(e+1e5) bounds the difference
        assert partial[-1] - partial[10**5 - 1] <= 2.0 / math.sqrt(math.e + 1e5 - 1)


class TestHolder:
    def test_diagonal(self):
        n = np.arange(64, dtype=float)
        A = np.diag(np.sqrt(PHI(n)))
        rep = holder_check(A, A, PHI, 2.0, 2.0)
        np.testing.assert_allclose(rep.q, 1.0)
        np.testing.assert_allclose(rep.C, 1.0, rtol=1e-12)

    def test_zero(self):
        rep = holder_check(np.zeros((4, 4)), np.eye(4), PHI, 2.0, 2.0)
        assert rep.C == 0.0 and rep.passed

    def test_random_pairs_bounded(self):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(100):
            A = rng.normal(size=(32, 32))
            B = rng.normal(size=(32, 32))
            worst = max(worst, holder_check(A, B, PHI, 2.0, 2.0).C)
        assert worst <= 4.0

    def test_dimension_mismatch(self):
        with pytest.raises(IdealsError):
            holder_check(np.eye(3), np.eye(4), PHI, 2.0, 2.0)


class TestIO:
    def test_binary_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        for M in (rng.normal(size=(3, 4)), rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))):
            path = tmp_path / "m.bin"
            ideals.write_matrix_binary(path, M)
            back = ideals.read_matrix_binary(path, M.shape, np.iscomplexobj(M))
            np.testing.assert_array_equal(back, M)
        raw = np.fromfile(path, dtype="<c16")
        assert raw.size == 4

    def test_csv_matrix(self, tmp_path):
        M = np.arange(6.0).reshape(2, 3) / 7
        path = tmp_path / "m.csv"
        path.write_text(ideals.matrix_to_csv(M))
        np.testing.assert_array_equal(ideals.read_matrix_csv(path), M)

    def test_bad_sequence_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("mu\n1\nx\n")
        with pytest.raises(IdealsError):
            ideals.read_sequence_csv(path)
