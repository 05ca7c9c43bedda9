"""Tests for toroidal symbols, quantization, lattice sums and eigenvalue comparisons."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dixmier_lab import torus_op
from dixmier_lab.regvar import family
from dixmier_lab.torus_op import (
    GenericSymbol,
    InsufficientDepthError,
    MultiplierSymbol,
    SeparableSymbol,
    TorusError,
    TruncatedOperator,
    bracket,
    dirichlet_kernel_error,
    eigen_vs_expectation,
    expectation_sums,
    quantize,
    symbol_from_key,
    symbol_integral,
)


def _bracket_inv(pts):
    return bracket(pts) ** -1.0


class TestQuantize:
    def test_multiplier_diagonal(self):
        op = quantize(MultiplierSymbol(1, _bracket_inv), 2)
        expected = 1.0 / np.sqrt(1.0 + np.arange(-2, 3) ** 2)
        np.testing.assert_allclose(op.matrix, np.diag(expected), atol=1e-15)

    def test_single_mode_shift(self):
        p = SeparableSymbol(1, [({1: 1.0}, lambda pts: np.ones(len(pts)))])
        M = quantize(p, 3).matrix
        np.testing.assert_allclose(M, np.eye(7, k=-1), atol=0)

    def test_cos_bracket_entries(self):
        p = symbol_from_key("cos*bracket:-1", 1)
        N = 4
        M = quantize(p, N).matrix
        k = np.arange(-N, N + 1)
        expected = np.zeros((2 * N + 1, 2 * N + 1))
        for r in range(2 * N + 1):
            for c in range(2 * N + 1):
                if abs(r - c) == 1:
                    expected[r, c] = 0.5 / math.sqrt(1 + k[c] ** 2)
        np.testing.assert_allclose(M, expected, atol=1e-15)

    def test_generic_matches_separable(self):
        sep = symbol_from_key("2+cos*bracket:-1", 1)
        gen = GenericSymbol(1, lambda x, xi: (2 + np.cos(x[:, 0])) / bracket(xi), depth=16)
        np.testing.assert_allclose(quantize(gen, 8).matrix, quantize(sep, 8).matrix, atol=1e-13)
        assert not gen.decay_flag

    def test_insufficient_depth(self):
        gen = GenericSymbol(1, lambda x, xi: np.cos(x[:, 0]) + 0 * xi[:, 0], depth=3)
        with pytest.raises(InsufficientDepthError):
            quantize(gen, 4)

    def test_decay_flag(self):
        rough = GenericSymbol(1, lambda x, xi: np.abs(np.sin(x[:, 0])) + 0 * xi[:, 0], depth=8)
        quantize(rough, 4)
        assert rough.decay_flag

    @given(st.floats(-3, 3), st.floats(-3, 3))
    @settings(max_examples=20, deadline=None)
    def test_linearity(self, a, b):
        p = symbol_from_key("cos*bracket:-1", 1)
        q = symbol_from_key("e1*pow:-1", 1)
        lhs = quantize(a * p + b * q, 6).matrix
        rhs = a * quantize(p, 6).matrix + b * quantize(q, 6).matrix
        np.testing.assert_allclose(lhs, rhs, atol=1e-13)

    @pytest.mark.parametrize("d,N", [(1, 10), (2, 6)])
    def test_real_multiplier_hermitian_spectrum(self, d, N):
        p = symbol_from_key("bracket:-1", d)
        op = quantize(p, N)
        assert op.is_hermitian()
        eig = np.sort(np.linalg.eigvalsh(op.hermitian_part()))
        np.testing.assert_allclose(eig, np.sort(_bracket_inv(op.lattice)), atol=1e-12)

    def test_diagonal_expectation(self):
        p = symbol_from_key("2+cos*varphi:phi:-1:1", 1)
        N = 50
        op = quantize(p, N)
        np.testing.assert_allclose(
            np.sum(np.diag(op.matrix)).real, expectation_sums(p, [float(N)], region="ball")[0], rtol=1e-13
        )

    def test_export_roundtrip(self, tmp_path):
        op = quantize(symbol_from_key("e1*bracket:-2", 2), 3)
        op.export(tmp_path / "op")
        back = TruncatedOperator.load(tmp_path / "op")
        np.testing.assert_array_equal(back.matrix, op.matrix)
        assert back.header()["ordering"] == "lex"
        assert op.size == torus_op.lattice_size(2, 3)

    def test_lattice_lex_order(self):
        pts = torus_op.lattice_points(2, 2)
        keys = [tuple(p) for p in pts]
        assert keys == sorted(keys)
        assert len(keys) == 13

    def test_unknown_keys(self):
        with pytest.raises(TorusError):
            symbol_from_key("sin*bracket:-1")
        with pytest.raises(TorusError):
            symbol_from_key("bogus:1")

    def test_tabulated_csv(self, tmp_path):
        path = tmp_path / "tab.csv"
        path.write_text("m,k,re,im\n0,0,1.0,0\n0,1,0.5,0\n1,0,0.25,0.5\n")
        tab = torus_op.TabulatedSymbol.from_csv(path, 1)
        M = quantize(tab, 1).matrix
        assert M[1, 1] == 1.0 and M[2, 2] == 0.5 and M[2, 1] == 0.25 + 0.5j


class TestExpectationSums:
    def test_harmonic_oracle(self):
        p = symbol_from_key("pow:-1", 1)
        n = np.array([10.0, 1000.0, 1e5])
        E = expectation_sums(p, n)
        for ni, Ei in zip(n, E):
            J = math.isqrt(int(ni * ni - 1))
            np.testing.assert_allclose(Ei, 1 + 2 * np.sum(1.0 / np.arange(1, J + 1)), rtol=1e-12)
        # 1 + 2 H_J = 2 log n + 1 + 2γ + O(1/n)
        np.testing.assert_allclose(E[-1] - 2 * math.log(1e5), 1 + 2 * np.euler_gamma, atol=1e-4)

    def test_two_dimensional(self):
        p = symbol_from_key("bracket:-2", 2)
        n = 1e4
        E = expectation_sums(p, [n])[0]
        np.testing.assert_allclose(E / (math.pi * math.log(n)), 1.0, rtol=0.05)

    def test_zero(self):
        p = symbol_from_key("zero", 2)
        np.testing.assert_array_equal(expectation_sums(p, [10.0, 100.0]), 0.0)

    def test_symbol_integral(self):
        p = symbol_from_key("pow:-1", 1)
        n = np.array([1e2, 1e4, 1e6])
        I = np.real(symbol_integral(p, n, region="ball"))
        np.testing.assert_allclose(I, 2 + 2 * np.log(n), rtol=1e-6)
        E = expectation_sums(p, n, region="ball")
        assert abs(I[-1] / E[-1] - 1) < abs(I[0] / E[0] - 1)
        Ia = np.real(symbol_integral(p, n, region="angle"))
        assert np.all(np.abs(Ia - I) < 1.0)
        np.testing.assert_array_equal(symbol_integral(symbol_from_key("zero", 1), n), 0.0)


class TestEigenVsExpectation:
    def test_multiplier_zero(self):
        rep = eigen_vs_expectation(symbol_from_key("bracket:-1", 1), family("phi:-1:0"), [32, 64])
        np.testing.assert_allclose(rep.delta, 0.0, atol=1e-12)

    def test_cos_both_small(self):
        rep = eigen_vs_expectation(symbol_from_key("cos*bracket:-1", 1), family("phi:-1:0"), [256])
        np.testing.assert_allclose(rep.expectation, 0.0, atol=1e-12)
        assert abs(rep.eig_sums[0]) / family("phi:-1:0").primitive(513.0) < 0.05

    def test_delta_decreases(self):
        p = symbol_from_key("2+cos*varphi:phi:-1:1", 1)
        rep = eigen_vs_expectation(p, family("phi:-1:1"), [64, 256])
        assert rep.delta[1] < rep.delta[0]

    def test_fitted_limits_agree(self):
        from dixmier_lab import traces

        p = symbol_from_key("pow:-1", 1)
        f = family("phi:-1:0")
        N = 4096
        eig = torus_op.order_by_magnitude(torus_op.hermitian_eigenvalues(p, N))
        est = traces.dixmier_sequence(eig, f, tol=0.05)
        grid = np.unique(np.geomspace(2, N, 200).astype(int)).astype(float)
        normalized = expectation_sums(p, grid) / f.primitive(grid + 1.0)
        fit = traces.estimate_from_grid(grid, normalized, tol=0.05)
        np.testing.assert_allclose(est.limit, 2.0, rtol=0.02)
        np.testing.assert_allclose(fit.limit, 2.0, rtol=0.02)


class TestDirichletKernel:
    def test_bounded_constant(self):
        worst = []
        for t in (1e2, 1e3, 1e4):
            xi = np.array([t / 4, t / 2, 2 * t, 4 * t]).reshape(-1, 1)
            u = np.array([[0.25], [0.5], [0.75]])
            worst.append(dirichlet_kernel_error(t, xi, u).max_error)
        assert max(worst) < 10.0
        assert worst[-1] <= 2 * worst[0] + 1.0

    def test_t_zero_single_term(self):
        rep = dirichlet_kernel_error(0.0, np.array([[0.3]]), np.array([[0.5]]))
        assert rep.xi.shape == (1, 1)
        assert np.isfinite(rep.max_error)
