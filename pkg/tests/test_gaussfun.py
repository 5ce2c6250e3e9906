import math

import numpy as np
import pytest

from rfvp.gaussfun import (
    ActivationSpec,
    chaos_std,
    dlin_dchaos_diagonals,
    gauss_expect,
    hermite_coefficients,
    hermite_he_table,
    parse_activation,
    surrogate_diagonals,
    theta_lin_chaos,
    theta_matrices,
    theta_pair,
)
from rfvp.profiles import VarianceProfile, build_mixture_profile, constant_profile

CUBE = parse_activation("cube")
H3 = parse_activation("hermite3")
IDENTITY = parse_activation("identity")


class TestGaussExpect:
    def test_second_moment(self):
        assert gauss_expect(lambda x: x**2, 3.0) == pytest.approx(9.0, rel=1e-10)

    def test_sixth_moment_exact_and_quadrature_agree(self):
        # E[(2 xi)^6] = 2^6 * 5!! = 960
        exact = gauss_expect(ActivationSpec("m6", coeffs=(0, 0, 0, 0, 0, 0, 1.0)), 2.0)
        quad = gauss_expect(lambda x: x**6, 2.0)
        assert exact == pytest.approx(960.0, rel=1e-14)
        assert quad == pytest.approx(exact, rel=1e-12)

    def test_odd_function_vanishes(self):
        for sigma in (0.5, 1.0, 2.5):
            assert gauss_expect(lambda x: x**3 - 2 * x, sigma) == pytest.approx(0.0, abs=1e-12)

    def test_nonfinite_sigma_rejected(self):
        with pytest.raises(ValueError):
            gauss_expect(lambda x: x, float("nan"))


class TestThetaPair:
    def test_identity(self):
        assert theta_pair(IDENTITY, 1.0) == (1.0, 1.0)

    def test_cube(self):
        theta1, theta2 = theta_pair(CUBE, 1.0)
        assert theta1 == pytest.approx(15.0, rel=1e-12)
        assert theta2 == pytest.approx(9.0, rel=1e-12)

    def test_hermite3(self):
        theta1, theta2 = theta_pair(H3, 1.0)
        assert theta1 == pytest.approx(6.0, rel=1e-12)
        assert theta2 == pytest.approx(0.0, abs=1e-12)

    def test_ordering_for_odd_polynomials(self):
        for name in ("identity", "cube", "hermite3", "poly[0,2,0,-1,0,0.25]"):
            h = parse_activation(name)
            for s in (0.5, 1.0, 2.0):
                theta1, theta2 = theta_pair(h, s)
                assert theta1 >= theta2 >= 0


class TestThetaLinChaos:
    def test_identity(self):
        for s in (0.3, 1.0, 4.0):
            assert theta_lin_chaos(IDENTITY, s) == (1.0, 0.0)

    def test_cube(self):
        assert theta_lin_chaos(CUBE, 1.0) == (3.0, 1.0)

    def test_hermite3(self):
        lin, ch = theta_lin_chaos(H3, 1.0)
        assert lin == pytest.approx(0.0, abs=1e-14)
        assert ch == pytest.approx(1.0, rel=1e-14)

    def test_smooth_path_agrees_with_polynomial_path(self):
        # evaluate the cubic through the smooth (quadrature + series) machinery
        smooth_cube = ActivationSpec("cube-smooth", fn=lambda x: x**3)
        for s in (0.5, 1.0, 2.0):
            ref = theta_lin_chaos(CUBE, s)
            got = theta_lin_chaos(smooth_cube, s)
            assert got[0] == pytest.approx(ref[0], rel=1e-9)
            assert got[1] == pytest.approx(ref[1], rel=1e-8, abs=1e-10)

    def test_abs_series_matches_closed_form(self):
        # sum_k sqrt(2/pi) (-1)^(k-1) (2k-3)!! / (2k)!
        def dfact(j):
            out = 1.0
            while j > 1:
                out *= j
                j -= 2
            return out

        ref = sum(
            math.sqrt(2 / math.pi) * (-1) ** (k - 1) * dfact(2 * k - 3) / math.factorial(2 * k)
            for k in range(1, 25)
        )
        lin, ch = theta_lin_chaos(parse_activation("abs"), 1.0)
        assert lin == pytest.approx(0.0, abs=1e-10)
        assert ch == pytest.approx(ref, rel=1e-9)


class TestSteinAndHermiteIdentities:
    @pytest.mark.parametrize("sigma", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("name", ["cube", "hermite3", "poly[0,1,0,0.5,0,-0.1]"])
    def test_stein_consistency(self, name, sigma):
        h = parse_activation(name)
        # analytic differentiation
        dcoeffs = tuple(np.polynomial.polynomial.polyder(np.asarray(h.coeffs)))
        by_derivative = sigma * gauss_expect(ActivationSpec("d", coeffs=dcoeffs), sigma)
        # quadrature of xi * h(sigma xi)
        by_quadrature = gauss_expect(lambda u: (u / sigma) * np.polynomial.polynomial.polyval(u, h.coeffs), sigma)
        assert by_quadrature == pytest.approx(by_derivative, abs=1e-10)

    @pytest.mark.parametrize("name", ["cube", "hermite3", "poly[0,1,2,0.5,1,-0.1,0,0.02,0,0.003]"])
    def test_hermite_coefficient_identity(self, name):
        # derivative series equals the coefficient series for degree <= 9
        h = parse_activation(name)
        s = 1.3
        _, chaos_deriv = theta_lin_chaos(h, s)
        smooth = ActivationSpec("smooth", fn=lambda x: np.polynomial.polynomial.polyval(x, h.coeffs))
        _, chaos_coeff = theta_lin_chaos(smooth, s)
        assert chaos_coeff == pytest.approx(chaos_deriv, abs=1e-10)

    def test_quadrature_node_doubling_stable(self):
        h = parse_activation("tanh(0.5)")
        a = theta_lin_chaos(
            ActivationSpec(h.name, fn=h.fn, quadrature=128), 1.0
        )
        b = theta_lin_chaos(
            ActivationSpec(h.name, fn=h.fn, quadrature=256), 1.0
        )
        assert abs(a[0] - b[0]) < 1e-8 and abs(a[1] - b[1]) < 1e-8

    @pytest.mark.parametrize("name", ["cube", "hermite3", "poly[0,2,0,-0.3]"])
    def test_odd_reflection_invariance(self, name):
        # for odd h, x -> -h(-x) is the same function: functionals identical
        h = parse_activation(name)
        reflected = tuple(-c * (-1) ** k for k, c in enumerate(h.coeffs))
        h2 = ActivationSpec("refl", coeffs=reflected)
        assert theta_pair(h, 1.2) == theta_pair(h2, 1.2)
        assert theta_lin_chaos(h, 1.2) == theta_lin_chaos(h2, 1.2)


class TestChaosStd:
    def test_cube_and_hermite3(self):
        assert chaos_std(CUBE, 1.0) == pytest.approx(math.sqrt(6.0), rel=1e-12)
        assert chaos_std(H3, 1.0) == pytest.approx(math.sqrt(6.0), rel=1e-12)

    def test_identity_has_no_chaos(self):
        assert chaos_std(IDENTITY, 2.0) == 0.0

    def test_mean_removed_for_even_activation(self):
        # for |x|: theta1 = s^2, theta2 = 0, mean = s sqrt(2/pi)
        s = 1.7
        expected = math.sqrt(s**2 - s**2 * 2 / math.pi)
        assert chaos_std(parse_activation("abs"), s) == pytest.approx(expected, rel=1e-9)


class TestDiagonals:
    def test_row_stochastic_cube(self):
        prof = constant_profile(5, 8, 1.0)
        d_lin, d_chaos = dlin_dchaos_diagonals(CUBE, prof)
        np.testing.assert_allclose(d_lin, 3.0)
        np.testing.assert_allclose(d_chaos, 1.0)

    def test_two_row_profile_scales(self):
        prof = VarianceProfile(np.array([[1.0, 1.0], [4.0, 4.0]]))
        d_lin, _ = dlin_dchaos_diagonals(CUBE, prof)
        np.testing.assert_allclose(d_lin, [3.0, 12.0])

    def test_identity_diagonals(self):
        prof = VarianceProfile(np.array([[0.5, 1.5], [2.0, 6.0]]))
        d_lin, d_chaos = dlin_dchaos_diagonals(IDENTITY, prof)
        np.testing.assert_allclose(d_lin, 1.0)
        np.testing.assert_allclose(d_chaos, 0.0)

    def test_zero_row_rejected_for_kinked(self):
        prof = VarianceProfile(np.array([[0.0, 0.0], [1.0, 1.0]]))
        with pytest.raises(ValueError):
            dlin_dchaos_diagonals(parse_activation("abs"), prof)

    def test_variance_form_diagonals(self):
        prof = constant_profile(4, 6, 1.0)
        d_lin, d_chaos = surrogate_diagonals(CUBE, prof, chaos="variance")
        np.testing.assert_allclose(d_lin, 3.0)
        np.testing.assert_allclose(d_chaos, math.sqrt(6.0))


class TestThetaMatrices:
    def test_constant_w_collapses_to_diagonals(self):
        prof_x = build_mixture_profile([np.array([1.0, 1.0]), np.array([4.0, 4.0])], [1, 1])
        prof_w = constant_profile(3, 2, 1.0)
        lin, ch = theta_matrices(CUBE, prof_x, prof_w)
        d_lin, d_chaos = dlin_dchaos_diagonals(CUBE, prof_x)
        np.testing.assert_allclose(lin, np.broadcast_to(d_lin, (3, 2)), rtol=1e-12)
        np.testing.assert_allclose(ch, np.broadcast_to(d_chaos, (3, 2)), rtol=1e-12)

    def test_identity_is_all_ones(self):
        prof_x = constant_profile(2, 4, 1.0)
        prof_w = constant_profile(3, 4, 4.0)  # entries 2 in std
        lin, ch = theta_matrices(IDENTITY, prof_x, prof_w)
        np.testing.assert_allclose(lin, 1.0)
        np.testing.assert_allclose(ch, 0.0)

    def test_toy_profiles_entrywise_formula(self):
        rng = np.random.default_rng(5)
        prof_x = VarianceProfile(rng.uniform(0.5, 2.0, (2, 3)))
        prof_w = VarianceProfile(rng.uniform(0.5, 2.0, (2, 3)))
        lin, _ = theta_matrices(CUBE, prof_x, prof_w)
        m2 = np.sqrt(prof_w.entries @ prof_x.entries.T / 3)
        np.testing.assert_allclose(lin, 3.0 * m2**2, rtol=1e-12)


class TestHermiteTable:
    def test_recurrence_values(self):
        x = np.array([0.0, 1.0, 2.0])
        he = hermite_he_table(4, x)
        np.testing.assert_allclose(he[2], x**2 - 1)
        np.testing.assert_allclose(he[3], x**3 - 3 * x)
        np.testing.assert_allclose(he[4], x**4 - 6 * x**2 + 3)

    def test_coefficients_of_cube(self):
        c = hermite_coefficients(CUBE, 1.0, 5)
        np.testing.assert_allclose(c, [0, 3, 0, 1, 0, 0], atol=1e-12)


class TestParse:
    def test_named_and_poly(self):
        assert parse_activation("cube").coeffs == (0.0, 0.0, 0.0, 1.0)
        spec = parse_activation("poly[1,0,2]")
        assert spec.coeffs == (1.0, 0.0, 2.0)
        assert not spec.odd
        assert parse_activation("poly[0,1,0,-3]").odd

    def test_tanh_parameter(self):
        spec = parse_activation("tanh(0.25)")
        assert spec(np.array([1.0]))[0] == pytest.approx(np.tanh(0.25))

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            parse_activation("sigmoid")

    def test_validation(self):
        with pytest.raises(ValueError):
            ActivationSpec("bad", coeffs=(1.0,), fn=np.abs)
        with pytest.raises(ValueError):
            ActivationSpec("bad", coeffs=(0.0, 1.0), quadrature=32)
