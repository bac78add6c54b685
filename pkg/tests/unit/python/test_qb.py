"""
Unit tests for the monomial calculus, the corrections S_k and Q_b.
"""

import numpy as np
import pytest

from internal.python.blowup_lab.linop.kernel import generate_Tk, tail_exponent_fit
from internal.python.blowup_lab.models.errors import ParameterError, RangeError
from internal.python.blowup_lab.modes.system import law
from internal.python.blowup_lab.numerics.fitting import fit_power_law
from internal.python.blowup_lab.qb.approximate_profile import (
    assemble_Qb,
    b_on_explicit_curve,
    compute_Psib,
    cutoff_rate,
    localization_radii,
    mod_vector,
    parameter_directions,
    residual_scaling,
    stencil_residual,
)
from internal.python.blowup_lab.qb.corrections import build_Sk, homogeneity_check
from internal.python.blowup_lab.qb.monomials import (
    MonomialExpansion,
    degree,
    multi_indices,
    scalar_law,
    unit,
)


@pytest.fixture(scope="module")
def corrections(ctx_d8, tks_d8):
    return build_Sk(ctx_d8, tks_d8, 2)


@pytest.mark.unit
class TestMonomials:
    """Exact polynomial bookkeeping in b."""

    def test_degree_and_indices(self):
        assert degree((1, 1)) == 3
        assert set(multi_indices(2, 3)) == {(1, 1), (3, 0)}
        assert unit(3, 2) == (0, 1, 0)

    def test_scalar_law_matches_law(self):
        gamma = 1.5
        b = np.array([0.3, -0.2])
        for j in (1, 2):
            poly = scalar_law(2, gamma, j)
            value = sum(a * b[0] ** m[0] * b[1] ** m[1] for m, a in poly.items())
            assert value == pytest.approx(law(gamma, b)[j - 1], rel=1e-14)

    def test_derivative_and_evaluate(self, ctx_d8):
        grid = ctx_d8.grid
        ones = grid.function(np.ones(grid.n), 0, 0.0)
        expansion = MonomialExpansion(grid, 2)
        expansion.add_term((2, 1), ones)
        d1 = expansion.derivative(1)
        assert list(d1.terms) == [(1, 1)]
        b = np.array([0.5, 3.0])
        np.testing.assert_allclose(d1.evaluate(b).values, 2.0 * 0.5 * 3.0)
        assert not len(expansion.derivative(1).derivative(2).derivative(2))

    def test_wrong_index_length(self, ctx_d8):
        grid = ctx_d8.grid
        with pytest.raises(ParameterError):
            MonomialExpansion(grid, 2).add_term((1, 0, 0), grid.function(np.ones(grid.n)))


@pytest.mark.unit
class TestCorrections:
    """S_2..S_{L+2} built by inverting L."""

    def test_degrees(self, corrections):
        assert corrections.top == 4
        assert not len(corrections.S[1])
        for k in range(2, corrections.top + 1):
            assert all(degree(m) == k for m in corrections.S[k].terms)
            assert all(degree(m) == k for m in corrections.F[k].terms)

    def test_tail_bounds(self, corrections):
        gamma = corrections.gamma
        for k in range(2, corrections.top + 1):
            bound = 2.0 * (k - 1) - gamma + 0.1
            for m, coeff in corrections.S[k]:
                if np.any(coeff.values):
                    assert tail_exponent_fit(coeff) <= bound

    def test_no_dependence_on_later_parameters(self, corrections):
        for k in range(2, corrections.top + 1):
            for m in range(k, corrections.L + 1):
                assert not len(corrections.S[k].derivative(m))
        assert len(corrections.S[2].derivative(1))

    def test_homogeneity(self, corrections):
        b = np.array([1e-2, 3e-5])
        assert homogeneity_check(corrections, b, 2.0) <= 1e-12

    def test_limits(self, ctx_d8, tks_d8):
        with pytest.raises(ParameterError):
            build_Sk(ctx_d8, tks_d8, 5)
        with pytest.raises(ParameterError):
            build_Sk(ctx_d8, generate_Tk(ctx_d8, 1), 2)

    def test_report(self, corrections):
        summary = corrections.to_dict()
        assert summary["L"] == 2
        assert set(summary["monomials"]) == {"2", "3", "4"}


@pytest.mark.unit
class TestApproximateProfile:
    """Assembly, localization and residual of Q_b."""

    def test_radii(self):
        B0, B1, capped = localization_radii(1e-4, 0.05)
        assert B0 == pytest.approx(100.0)
        assert B1 == pytest.approx(100.0 ** 1.05)
        assert not capped
        assert localization_radii(1e-4, 0.05, cap=50.0) == (pytest.approx(100.0), 50.0, True)
        with pytest.raises(ParameterError):
            localization_radii(0.0, 0.05)

    def test_explicit_curve(self, system_d8):
        b = b_on_explicit_curve(system_d8, 1e-2)
        assert b[0] == pytest.approx(1e-2)
        assert b[1] == 0.0

    def test_trivial_profile_is_Q(self, ctx_d8, tks_d8, corrections):
        profile = assemble_Qb(ctx_d8, tks_d8, corrections, [0.0, 0.0])
        assert profile.is_trivial
        np.testing.assert_array_equal(profile.Qb.values, ctx_d8.pack.Q.values)
        assert not np.any(stencil_residual(profile).values)
        assert compute_Psib(profile).norms == [0.0, 0.0, 0.0]

    def test_localization(self, ctx_d8, tks_d8, corrections, system_d8):
        profile = assemble_Qb(ctx_d8, tks_d8, corrections, b_on_explicit_curve(system_d8, 1e-2))
        y = ctx_d8.grid.y
        outside = y >= 2.0 * profile.B1
        np.testing.assert_allclose(profile.Qb_localized.values[outside], ctx_d8.pack.Q.values[outside])
        inside = y <= profile.B1
        np.testing.assert_allclose(profile.Qb_localized.values[inside], profile.Qb.values[inside])
        assert np.all(cutoff_rate(profile)[inside] == 0.0)

    def test_parameter_checks(self, ctx_d8, tks_d8, corrections):
        with pytest.raises(ParameterError):
            assemble_Qb(ctx_d8, tks_d8, corrections, [1e-2])
        with pytest.raises(ParameterError):
            assemble_Qb(ctx_d8, tks_d8, corrections, [1e-2, 0.0], eta=1.5)
        with pytest.raises(ParameterError):
            assemble_Qb(ctx_d8, tks_d8, corrections, [-1e-2, 0.0])
        with pytest.raises(ParameterError):
            assemble_Qb(ctx_d8, tks_d8, corrections, [1e-2, 1.0])

    def test_small_b1_does_not_fit(self, ctx_d8, tks_d8, corrections):
        with pytest.raises(RangeError):
            assemble_Qb(ctx_d8, tks_d8, corrections, [1e-6, 0.0])
        capped = assemble_Qb(ctx_d8, tks_d8, corrections, [1e-6, 0.0], cap=100.0)
        assert capped.capped and capped.B1 == 100.0

    def test_mod_vector_vanishes_on_the_law(self, ctx_d8, tks_d8, corrections, system_d8):
        profile = assemble_Qb(ctx_d8, tks_d8, corrections, b_on_explicit_curve(system_d8, 1e-2))
        rates = law(ctx_d8.pack.gamma, profile.b)
        assert not np.any(mod_vector(profile, rates).values)
        assert len(parameter_directions(profile)) == 2

    def test_profile_departs_from_Q_linearly(self, ctx_d8, tks_d8, corrections, system_d8):
        rates = [1e-3, 2e-3, 4e-3, 1e-2]
        inner = ctx_d8.grid.y <= 1.0
        sizes = []
        for b1 in rates:
            profile = assemble_Qb(ctx_d8, tks_d8, corrections, b_on_explicit_curve(system_d8, b1))
            sizes.append(np.max(np.abs(profile.Qb.values - ctx_d8.pack.Q.values)[inner]))
        assert fit_power_law(rates, sizes).exponent == pytest.approx(1.0, abs=0.1)

    def test_mod_vector_is_linear_in_the_rates(self, ctx_d8, tks_d8, corrections, system_d8):
        profile = assemble_Qb(ctx_d8, tks_d8, corrections, b_on_explicit_curve(system_d8, 1e-2))
        rates = law(ctx_d8.pack.gamma, profile.b)
        eps = 1e-3
        direction = tks_d8[1].values.copy()
        for Sj in corrections.S:
            direction += Sj.derivative(1).evaluate(profile.b).values
        for step in (eps, 2.0 * eps):
            shifted = rates + np.array([step, 0.0])
            mod = mod_vector(profile, shifted).values
            np.testing.assert_allclose(mod, step * direction, rtol=1e-9,
                                       atol=1e-12 * np.max(np.abs(direction)))

    def test_residual_report(self, ctx_d8, tks_d8, corrections, system_d8):
        profile = assemble_Qb(ctx_d8, tks_d8, corrections, b_on_explicit_curve(system_d8, 1e-2))
        report = compute_Psib(profile)
        assert len(report.norms) == 3
        assert all(np.isfinite(v) and v > 0.0 for v in report.norms)
        assert profile.Psib_tilde is not None
        assert report.to_dict()["B0"] == pytest.approx(10.0)


@pytest.mark.unit
@pytest.mark.slow
@pytest.mark.resource_intensive
def test_weighted_residual_scaling(ctx_d8, tks_d8, corrections, system_d8):
    report = residual_scaling(ctx_d8, tks_d8, corrections, system_d8,
                              [1e-3, 2e-3, 4e-3, 1e-2], eta=0.35)
    fit = report.weighted[0]
    assert fit.exponent == pytest.approx(report.expected_weighted[0], abs=0.3)
