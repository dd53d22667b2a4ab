"""
tests/test_spectral_operator.py
Model operators, their eigenbasis transforms and operator functions.
"""

import numpy as np
import pytest
from scipy import linalg

from tools.errors import DimensionError, ZeroEigenvalueNegativePower
from tools.phi_functions import make_scheme, radau_scheme, weight_a
from tools.spectral_operator import (
    apply_fractional_power,
    apply_operator,
    apply_phi,
    apply_semigroup,
    apply_weight,
    dense_matrix,
    dirichlet_laplacian_1d,
    dirichlet_laplacian_2d,
    explicit_diagonal,
    grid_points,
    mesh_width,
    periodic_laplacian_1d,
    smoothing_constant,
    weight_symbols,
)


def second_difference(n):
    hx = 1.0 / (n + 1)
    return (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / hx ** 2


class TestConstructors:

    def test_dirichlet_1d_matches_finite_differences(self):
        op = dirichlet_laplacian_1d(8)
        expected = second_difference(8)
        assert np.max(np.abs(dense_matrix(op) - expected)) <= 1e-10 * np.max(np.abs(expected))

    def test_dirichlet_2d_matches_kronecker_sum(self):
        n = 4
        op = dirichlet_laplacian_2d(n)
        T = second_difference(n)
        expected = np.kron(T, np.eye(n)) + np.kron(np.eye(n), T)
        assert op.dof == 16
        assert np.max(np.abs(dense_matrix(op) - expected)) <= 1e-10 * np.max(np.abs(expected))

    def test_periodic_sine_mode(self):
        op = periodic_laplacian_1d(32)
        x = grid_points(op)
        v = np.sin(2.0 * np.pi * x)
        assert np.max(np.abs(apply_operator(op, v) - 4.0 * np.pi ** 2 * v)) <= 1e-9

    def test_periodic_has_zero_mode(self):
        op = periodic_laplacian_1d(16)
        assert np.min(op.eigenvalues) == 0.0
        constant = np.ones(16)
        assert np.max(np.abs(apply_operator(op, constant))) <= 1e-10

    def test_explicit_diagonal(self):
        op = explicit_diagonal([0.0, 1.0, 10.0])
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(apply_operator(op, v), [0.0, 2.0, 30.0])
        with pytest.raises(ValueError):
            explicit_diagonal([1.0, -2.0])
        with pytest.raises(ValueError):
            explicit_diagonal([])

    @pytest.mark.parametrize("builder", [dirichlet_laplacian_1d, dirichlet_laplacian_2d, periodic_laplacian_1d])
    def test_grid_size_validation(self, builder):
        with pytest.raises(ValueError):
            builder(0)

    def test_mesh_width_and_grid(self):
        assert mesh_width(dirichlet_laplacian_1d(7)) == pytest.approx(0.125)
        assert mesh_width(periodic_laplacian_1d(8)) == pytest.approx(0.125)
        assert mesh_width(explicit_diagonal([1.0])) == 1.0
        x = grid_points(dirichlet_laplacian_1d(3))
        np.testing.assert_allclose(x, [0.25, 0.5, 0.75])
        X, Y = grid_points(dirichlet_laplacian_2d(3))
        assert X[1] == pytest.approx(0.25) and Y[1] == pytest.approx(0.5)

    def test_dense_matrix_size_guard(self):
        with pytest.raises(ValueError):
            dense_matrix(dirichlet_laplacian_2d(65))


class TestTransforms:

    @pytest.mark.parametrize("op", [
        dirichlet_laplacian_1d(31),
        dirichlet_laplacian_2d(12),
        periodic_laplacian_1d(32),
        explicit_diagonal([0.0, 1.0, 4.0, 9.0, 16.0]),
    ], ids=lambda op: op.kind)
    def test_inverse_undoes_forward(self, op, rng):
        for _ in range(5):
            v = rng.standard_normal(op.dof)
            back = op.inverse(op.forward(v))
            assert np.max(np.abs(back - v)) <= 1e-12 * np.max(np.abs(v))

    def test_stacked_round_trip(self, rng):
        op = dirichlet_laplacian_2d(6)
        v = rng.standard_normal((3, op.dof))
        np.testing.assert_allclose(op.inverse(op.forward(v)), v, rtol=0.0, atol=1e-12 * np.max(np.abs(v)))


class TestOperatorFunctions:

    def test_semigroup_matches_expm(self, rng):
        op = dirichlet_laplacian_1d(12)
        v = rng.standard_normal(12)
        expected = linalg.expm(-0.01 * dense_matrix(op)) @ v
        np.testing.assert_allclose(apply_semigroup(op, 0.01, v), expected, atol=1e-12)

    def test_semigroup_at_zero_copies(self):
        op = dirichlet_laplacian_1d(4)
        v = np.arange(4.0)
        out = apply_semigroup(op, 0.0, v)
        np.testing.assert_array_equal(out, v)
        assert out is not v
        with pytest.raises(ValueError):
            apply_semigroup(op, -1.0, v)

    def test_phi_one_matches_linear_solve(self, rng):
        """phi_1(-tA) v = (tA)^{-1} (I - e^{-tA}) v."""
        op = dirichlet_laplacian_1d(10)
        t = 0.003
        v = rng.standard_normal(10)
        M = dense_matrix(op)
        expected = linalg.solve(t * M, v - linalg.expm(-t * M) @ v)
        np.testing.assert_allclose(apply_phi(op, 1, t, v), expected, rtol=1e-9, atol=1e-12)

    def test_weight_single_node_is_phi_one(self, rng):
        op = dirichlet_laplacian_1d(9)
        v = rng.standard_normal(9)
        scheme = make_scheme([1.0])
        np.testing.assert_allclose(
            apply_weight(op, scheme, 1, 1.0, 0.02, v), apply_phi(op, 1, 0.02, v), rtol=1e-13, atol=1e-15
        )

    def test_fractional_power_squares_to_operator(self, rng):
        op = dirichlet_laplacian_1d(15)
        v = rng.standard_normal(15)
        twice = apply_fractional_power(op, 0.5, apply_fractional_power(op, 0.5, v))
        expected = apply_operator(op, v)
        np.testing.assert_allclose(twice, expected, rtol=1e-10, atol=1e-8)

    def test_negative_power_inverts(self, rng):
        op = dirichlet_laplacian_1d(6)
        v = rng.standard_normal(6)
        roundtrip = apply_operator(op, apply_fractional_power(op, -1.0, v))
        np.testing.assert_allclose(roundtrip, v, atol=1e-11)

    def test_negative_power_with_zero_eigenvalue(self):
        op = periodic_laplacian_1d(8)
        with pytest.raises(ZeroEigenvalueNegativePower):
            apply_fractional_power(op, -0.5, np.ones(8))

    def test_power_range(self):
        with pytest.raises(ValueError):
            apply_fractional_power(dirichlet_laplacian_1d(4), 1.5, np.ones(4))

    def test_dimension_mismatch(self):
        op = dirichlet_laplacian_1d(5)
        with pytest.raises(DimensionError):
            apply_semigroup(op, 0.1, np.ones(6))
        with pytest.raises(DimensionError):
            apply_operator(op, np.ones((5, 1)))


class TestStepSymbols:

    def test_symbols_match_scalar_weights(self):
        op = dirichlet_laplacian_1d(6)
        scheme = radau_scheme(2)
        h = 0.05
        symbols = weight_symbols(op, scheme, h)
        z = -h * op.eigenvalues
        assert symbols.a.shape == (2, 2, 6)
        assert symbols.b.shape == (2, 6)
        for i in range(2):
            np.testing.assert_allclose(symbols.exp_stage[i], np.exp(scheme.c[i] * z))
            for j in range(2):
                np.testing.assert_array_equal(symbols.a[i, j], weight_a(scheme, i + 1, j + 1, z))
        np.testing.assert_allclose(symbols.exp_step, np.exp(z))

    def test_radau_last_stage_row_equals_step_weights(self):
        """With c_s = 1 the last row of a coincides with b."""
        op = dirichlet_laplacian_1d(5)
        symbols = weight_symbols(op, radau_scheme(2), 0.1)
        np.testing.assert_allclose(symbols.a[1], symbols.b, rtol=1e-14)

    @pytest.mark.parametrize("gamma", [0.0, 0.5, 1.0])
    def test_smoothing_constant_bounded(self, gamma):
        op = dirichlet_laplacian_1d(63)
        bound = smoothing_constant(op, radau_scheme(2), gamma, [0.25, 0.5, 1.0], [0.1, 0.01, 0.001])
        assert 0.0 < bound < 5.0
