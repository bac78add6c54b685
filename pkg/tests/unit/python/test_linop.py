"""
Unit tests for the linearized operator, its inversion and the Phi_M construction.
"""

import numpy as np
import pytest

from internal.python.blowup_lab.linop.coercivity import coercivity_probe, project_out
from internal.python.blowup_lab.linop.kernel import generate_Tk, invert_L, tail_exponent_fit
from internal.python.blowup_lab.linop.operators import (
    apply_A,
    apply_Astar,
    apply_L,
    apply_Lk,
    lambda_commutator_check,
    operator_scale,
    relative_residual,
)
from internal.python.blowup_lab.linop.orthogonality import (
    build_PhiM,
    cutoff,
    cutoff_derivative,
    expected_identity,
    identity_matrix,
    orthogonality_defects,
)
from internal.python.blowup_lab.models.errors import ConstructionError, ParameterError
from internal.python.blowup_lab.numerics.fitting import fit_power_law
from internal.python.blowup_lab.numerics.grid import GridFunction, dx, inner_product


def bump(ctx, center=0.5, width=0.7):
    x = ctx.grid.x
    return GridFunction(ctx.grid, np.exp(-0.5 * ((x - center) / width) ** 2), 1, 0.0)


@pytest.mark.unit
class TestOperator:
    """Stencil applications of L and its factors."""

    def test_lamq_is_in_the_kernel(self, ctx_d8):
        lamq = ctx_d8.pack.LamQ
        plain = GridFunction(lamq.grid, lamq.values, 1, lamq.tail_exponent)
        mask = ctx_d8.grid.interior(6, y_hi=ctx_d8.grid.y_max / 10.0)
        residual = relative_residual(apply_L(ctx_d8, plain).values, operator_scale(ctx_d8, plain), mask)
        assert residual < 1e-5

    def test_factorization(self, ctx_d8):
        f = bump(ctx_d8)
        direct = apply_L(ctx_d8, f).values
        factored = apply_Astar(ctx_d8, apply_A(ctx_d8, f)).values
        mask = ctx_d8.grid.interior(8)
        assert np.max(np.abs(direct - factored)[mask]) < 1e-4 * np.max(np.abs(direct[mask]))

    def test_symmetry_on_bumps(self, ctx_d8):
        f, g = bump(ctx_d8, 0.0, 0.8), bump(ctx_d8, 1.0, 0.6)
        left = inner_product(apply_L(ctx_d8, f), g)
        right = inner_product(f, apply_L(ctx_d8, g))
        assert abs(left - right) <= 1e-7 * max(abs(left), abs(right))

    def test_apply_Lk(self, ctx_d8):
        f = bump(ctx_d8)
        assert apply_Lk(ctx_d8, f, 0) is f
        np.testing.assert_array_equal(apply_Lk(ctx_d8, f, 2).values,
                                      apply_L(ctx_d8, apply_L(ctx_d8, f)).values)

    def test_dilation_commutator(self, ctx_d8):
        assert lambda_commutator_check(ctx_d8, bump(ctx_d8)) < 1e-4


@pytest.mark.unit
class TestInversion:
    """invert_L and the kernel iterates."""

    def test_round_trip_on_bump(self, ctx_d8):
        f = bump(ctx_d8)
        w = invert_L(ctx_d8, f)
        mask = ctx_d8.grid.interior(6, y_hi=ctx_d8.grid.y_max / 10.0)
        residual = apply_L(ctx_d8, w).values - f.values
        assert np.max(np.abs(residual[mask])) < 1e-5 * np.max(np.abs(f.values))

    def test_zero_inverts_to_zero(self, ctx_d8):
        zero = GridFunction(ctx_d8.grid, np.zeros(ctx_d8.grid.n), 1, 0.0)
        assert not np.any(invert_L(ctx_d8, zero).values)

    def test_tk_round_trip(self, tks_d8):
        assert tks_d8.K == 3
        assert max(tks_d8.round_trip) <= 1e-3

    def test_tk_tails(self, ctx_d8, tks_d8):
        gamma = ctx_d8.pack.gamma
        for k in range(1, 4):
            expected = 2.0 * k - gamma
            assert tks_d8.measured_tail[k] == pytest.approx(expected, abs=0.02 * max(abs(expected), 1.0))

    def test_tk_needs_one_iterate(self, ctx_d8):
        with pytest.raises(ParameterError):
            generate_Tk(ctx_d8, 0)


@pytest.mark.unit
class TestCutoffAndPhi:
    """Smooth cutoff, Phi_M orthogonality and coercivity sampling."""

    def test_cutoff_shape(self):
        z = np.linspace(0.0, 3.0, 301)
        chi = cutoff(z)
        assert np.all(chi[z <= 1.0] == 1.0)
        assert np.all(chi[z >= 2.0] == 0.0)
        assert np.all(np.diff(chi) <= 0.0)

    def test_cutoff_derivative(self):
        z = np.linspace(1.05, 1.95, 19)
        eps = 1e-6
        numeric = (cutoff(z + eps) - cutoff(z - eps)) / (2 * eps)
        np.testing.assert_allclose(cutoff_derivative(z), numeric, rtol=1e-5, atol=1e-8)

    def test_phi_orthogonality(self, ctx_d8, tks_d8):
        for M in (10.0, 20.0):
            phi = build_PhiM(ctx_d8, tks_d8, M, 3)
            assert phi.c[0] == 1.0
            assert phi.chi_norm > 0.0
            assert max(orthogonality_defects(phi, tks_d8)) <= 1e-8

    def test_phi_limits(self, ctx_d8, tks_d8):
        with pytest.raises(ParameterError):
            build_PhiM(ctx_d8, tks_d8, 600.0, 2)
        with pytest.raises(ParameterError):
            build_PhiM(ctx_d8, tks_d8, 10.0, 4)

    def test_project_out(self, ctx_d8):
        f = bump(ctx_d8, 0.0, 0.8)
        g = bump(ctx_d8, 0.5, 0.5)
        projected = project_out(f, [g])
        assert abs(inner_product(projected, g)) <= 1e-10 * inner_product(f, f)

    def test_coercivity_is_positive(self, ctx_d8, tks_d8):
        phi = build_PhiM(ctx_d8, tks_d8, 10.0, 3)
        ratio = coercivity_probe(ctx_d8, phi, ctx_d8.pack.hbar + 1, samples=6, seed=3)
        assert ratio > 0.0

    def test_coercivity_needs_samples(self, ctx_d8, tks_d8):
        phi = build_PhiM(ctx_d8, tks_d8, 10.0, 3)
        with pytest.raises(ParameterError):
            coercivity_probe(ctx_d8, phi, 2, samples=0, seed=0)


@pytest.mark.unit
class TestKernelRelations:
    """Factor kernels, the inverse on Lambda Q and the Phi_M identity matrix."""

    def test_A_annihilates_lamq(self, ctx_d8):
        lamq = ctx_d8.pack.LamQ
        plain = GridFunction(lamq.grid, lamq.values, 1, lamq.tail_exponent)
        mask = ctx_d8.grid.interior(6)
        scale = (np.abs(ctx_d8.V * plain.values) + np.abs(dx(plain))) / ctx_d8.y
        residual = np.abs(apply_A(ctx_d8, plain).values)
        assert np.max(residual[mask] / scale[mask]) < 1e-5

    def test_Astar_annihilates_its_kernel(self, ctx_d8):
        y = ctx_d8.y
        d = ctx_d8.d
        w = GridFunction(ctx_d8.grid, 1.0 / (y ** (d - 1) * ctx_d8.pack.LamQ.values),
                         -d, -(d - 1 - ctx_d8.pack.gamma))
        mask = ctx_d8.grid.interior(6)
        scale = (np.abs(dx(w)) + np.abs((d - 1 + ctx_d8.V) * w.values)) / y
        residual = np.abs(apply_Astar(ctx_d8, w).values)
        assert np.max(residual[mask] / scale[mask]) < 1e-5

    def test_inverse_of_lamq_tail(self, ctx_d8):
        w = invert_L(ctx_d8, ctx_d8.pack.LamQ)
        expected = 2.0 - ctx_d8.pack.gamma
        assert tail_exponent_fit(w) == pytest.approx(expected, rel=0.02)

    def test_identity_matrix(self, ctx_d8, tks_d8):
        phi = build_PhiM(ctx_d8, tks_d8, 20.0, 3)
        matrix = identity_matrix(phi, tks_d8)
        assert matrix.shape == (4, 4)
        np.testing.assert_allclose(matrix, expected_identity(3), atol=1e-3)
        assert not np.any(np.tril(matrix, -1))
        np.testing.assert_array_equal(np.diag(expected_identity(2)), [1.0, -1.0, 1.0])

    def test_identity_matrix_needs_iterates(self, ctx_d8, tks_d8):
        phi = build_PhiM(ctx_d8, tks_d8, 20.0, 3)
        with pytest.raises(ParameterError):
            identity_matrix(phi, generate_Tk(ctx_d8, 2))

    def test_phi_coefficient_growth(self, ctx_d8, tks_d8):
        radii = [20.0, 40.0, 80.0]
        phis = [build_PhiM(ctx_d8, tks_d8, M, 3) for M in radii]
        for k in range(1, 4):
            fit = fit_power_law(radii, [abs(phi.c[k]) for phi in phis])
            assert fit.exponent <= 2 * k + 0.5


@pytest.mark.unit
class TestCoercivitySampling:
    """Sampled coercivity ratio at k = hbar."""

    def test_stable_across_seeds(self, ctx_d8, tks_d8):
        phi = build_PhiM(ctx_d8, tks_d8, 10.0, 3)
        k = ctx_d8.pack.hbar
        first = coercivity_probe(ctx_d8, phi, k, samples=64, seed=1)
        second = coercivity_probe(ctx_d8, phi, k, samples=64, seed=2)
        assert first > 0.0 and second > 0.0
        assert abs(first - second) <= 0.5 * max(first, second)

    def test_vanishing_samples_raise(self, ctx_d8, tks_d8, monkeypatch):
        def annihilate(f, directions):
            return GridFunction(f.grid, np.zeros_like(f.values), f.origin_exponent, f.tail_exponent)

        monkeypatch.setattr("internal.python.blowup_lab.linop.coercivity.project_out", annihilate)
        phi = build_PhiM(ctx_d8, tks_d8, 10.0, 3)
        with pytest.raises(ConstructionError):
            coercivity_probe(ctx_d8, phi, 1, samples=4, seed=0)
