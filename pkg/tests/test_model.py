import math

import numpy as np
import pytest

from bifurkit.model import (BifurcationDirection, EquilibriumKind, ModelParams,
                            Scenario, StabilityVerdict, ccs_direction,
                            characteristic_coefficients, derived_scalars,
                            dfe_solution, dfe_state, endemic_equilibria,
                            equilibrium_scenario, jacobian, param_derivative,
                            rhs_full, rhs_reduced, routh_hurwitz_stable,
                            stability_report)
from conftest import random_simplex_points, random_valid_params


class TestParams:
    def test_valid_construction(self):
        p = ModelParams(beta=1.0, rho=0.15, alpha=0.2, gamma=0.3, eta=0.02)
        assert p.beta2 == p.beta
        assert p.kappa == pytest.approx(11.0)

    def test_rejects_gamma_below_alpha(self):
        with pytest.raises(ValueError, match="gamma"):
            ModelParams(beta=1.0, rho=0.5, alpha=0.4, gamma=0.3, eta=0.02)

    def test_rejects_second_stage_rate_mismatch(self):
        with pytest.raises(ValueError, match="beta2"):
            ModelParams(beta=1.0, rho=0.5, alpha=0.2, gamma=0.3, eta=0.02, beta2=2.0)

    @pytest.mark.parametrize("rho", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_rho_outside_unit_interval(self, rho):
        with pytest.raises(ValueError):
            ModelParams(beta=1.0, rho=rho, alpha=0.2, gamma=0.3, eta=0.02)

    def test_with_value_keeps_rates_coupled(self):
        p = ModelParams(beta=1.0, rho=0.5, alpha=0.2, gamma=0.3, eta=0.02)
        q = p.with_value("beta", 2.0)
        assert q.beta == q.beta2 == 2.0


class TestVectorField:
    def test_dfe_is_equilibrium(self, base_params):
        p = ModelParams(beta=1.7, rho=0.3, **base_params)
        assert np.all(rhs_reduced(p, dfe_state()) == 0.0)

    def test_hand_evaluated_point(self, base_params):
        # direct arithmetic on the three equations
        p = ModelParams(beta=1.0, rho=0.15, **base_params)
        f = rhs_reduced(p, (0.9, 0.1, 0.0))
        assert f == pytest.approx([-0.09, -0.0065, 0.02], abs=1e-15)

    def test_endemic_root_is_equilibrium(self, fig21b_params):
        e = endemic_equilibria(fig21b_params)[0]
        assert np.max(np.abs(rhs_reduced(fig21b_params, e.state))) < 1e-12

    def test_full_system_dfe(self, base_params):
        p = ModelParams(beta=2.0, rho=0.4, **base_params)
        assert np.all(rhs_full(p, (1.0, 0.0, 0.0, 0.0)) == 0.0)

    def test_full_system_conserves_population(self, base_params, rng):
        p = ModelParams(beta=2.0, rho=0.4, **base_params)
        for _ in range(100):
            x4 = rng.dirichlet((1.0, 1.0, 1.0, 1.0))
            assert abs(rhs_full(p, x4).sum()) < 1e-15

    def test_full_reduces_to_reduced_system(self, base_params, rng):
        # dropping the W equation and substituting W = 1-S-I-R is an identity
        p = ModelParams(beta=1.3, rho=0.22, **base_params)
        for x in random_simplex_points(rng, 50):
            w = 1.0 - x.sum()
            f4 = rhs_full(p, (x[0], w, x[1], x[2]))
            f3 = rhs_reduced(p, x)
            assert np.max(np.abs(f4[[0, 2, 3]] - f3)) < 1e-15


class TestJacobian:
    def test_rows_at_dfe(self, base_params):
        p = ModelParams(beta=1.4, rho=0.21, **base_params)
        j = jacobian(p, dfe_state())
        g, a, e, b = p.gamma, p.alpha, p.eta, p.beta
        expected = np.array([
            [-g, -b - g, e - g],
            [0.0, p.rho * b - a, 0.0],
            [0.0, a, -e],
        ])
        assert j == pytest.approx(expected, abs=1e-15)

    def test_dfe_eigenvalues(self, base_params):
        p = ModelParams(beta=1.4, rho=0.21, **base_params)
        eig = sorted(np.linalg.eigvals(jacobian(p, dfe_state())).real)
        expected = sorted([-p.gamma, p.rho * p.beta - p.alpha, -p.eta])
        assert eig == pytest.approx(expected, abs=1e-14)

    def test_matches_finite_differences(self, base_params, rng):
        p = ModelParams(beta=2.2, rho=0.4, **base_params)
        h = 1e-6
        for x in random_simplex_points(rng, 100):
            j = jacobian(p, x)
            fd = np.empty((3, 3))
            for i in range(3):
                dx = np.zeros(3)
                dx[i] = h
                fd[:, i] = (rhs_reduced(p, x + dx) - rhs_reduced(p, x - dx)) / (2 * h)
            assert np.max(np.abs(j - fd)) < 1e-6

    def test_param_derivative_matches_fd(self, base_params, rng):
        p = ModelParams(beta=2.2, rho=0.4, **base_params)
        x = np.array([0.6, 0.2, 0.1])
        for name in ("beta", "rho", "alpha", "gamma", "eta"):
            v = getattr(p, name)
            h = 1e-7 * max(1.0, v)
            fd = (rhs_reduced(p.with_value(name, v + h), x)
                  - rhs_reduced(p.with_value(name, v - h), x)) / (2 * h)
            assert param_derivative(p, x, name) == pytest.approx(fd, abs=1e-7)


class TestDerivedScalars:
    def test_rho_star_reproduction(self, base_params):
        d = derived_scalars(ModelParams(beta=1.0, rho=0.1, **base_params))
        assert abs(d.rho_star - 0.1976) < 5e-4

    def test_r0_direct(self, fig21b_params):
        assert derived_scalars(fig21b_params).r0 == pytest.approx(3.125, abs=1e-15)

    def test_backward_thresholds(self, base_params):
        # arithmetic from the closed forms at rho=0.1, cross-checked by the identity
        d = derived_scalars(ModelParams(beta=1.0, rho=0.1, **base_params))
        kap = 11.0
        root = math.sqrt(0.2 * 0.3 * kap)
        beta_delta = 0.2 * 1.9 - 0.1 * 0.3 * kap + 2 * 0.9 * root
        assert d.beta_delta == pytest.approx(beta_delta, abs=1e-14)
        assert d.beta_delta == pytest.approx(1.512327, abs=5e-7)
        assert d.beta_c == pytest.approx(2.0)
        assert d.r_c == pytest.approx(0.756164, abs=1e-6)

    def test_identity_rc_times_beta_c(self, rng):
        for p in random_valid_params(rng, 200):
            d = derived_scalars(p)
            assert abs(d.r_c * d.beta_c - d.beta_delta) < 1e-12 * max(1.0, d.beta_delta)

    def test_rho_star_inside_unit_interval(self, rng):
        for p in random_valid_params(rng, 200):
            d = derived_scalars(p)
            assert 0.0 < d.rho_star < 1.0


class TestEndemicEquilibria:
    def test_fig21b_unique_solution(self, fig21b_params):
        sols = endemic_equilibria(fig21b_params)
        assert len(sols) == 1
        e = sols[0]
        assert e.kind is EquilibriumKind.ENDEMIC_PLUS
        assert (e.s_star, e.i_star, e.r_star) == pytest.approx(
            (0.149608, 0.073436, 0.734358), abs=1e-6)

    def test_below_fold_is_empty(self, base_params):
        # beta = 1 < beta_delta = 1.5123 at rho = 0.1
        p = ModelParams(beta=1.0, rho=0.1, **base_params)
        assert endemic_equilibria(p) == []

    def test_zero_discriminant_doubles_up(self, base_params):
        p0 = ModelParams(beta=1.0, rho=0.1, **base_params)
        p = p0.with_value("beta", derived_scalars(p0).beta_delta)
        sols = endemic_equilibria(p)
        assert len(sols) == 2
        assert sols[0].i_star == sols[1].i_star

    def test_r_star_proportional_to_i_star(self, rng):
        for p in random_valid_params(rng, 300):
            for e in endemic_equilibria(p):
                assert e.i_star > 0
                assert e.s_star >= 0
                assert e.r_star == pytest.approx(p.alpha / p.eta * e.i_star, rel=1e-12)

    def test_residuals_below_tolerance(self, rng):
        for p in random_valid_params(rng, 300):
            for e in endemic_equilibria(p):
                assert np.max(np.abs(rhs_reduced(p, e.state))) < 1e-10


class TestCharacteristicPolynomial:
    def test_trace_and_det_identities(self, fig21b_params, rng):
        for p in random_valid_params(rng, 100):
            for e in endemic_equilibria(p):
                a2, a1, a0 = characteristic_coefficients(p, e)
                j = jacobian(p, e.state)
                assert a2 == pytest.approx(-np.trace(j), abs=1e-12 * max(1, abs(a2)))
                assert a0 == pytest.approx(-np.linalg.det(j), abs=1e-12 * max(1, abs(a0)))

    def test_fig21b_against_numeric_expansion(self, fig21b_params):
        e = endemic_equilibria(fig21b_params)[0]
        coeffs = characteristic_coefficients(fig21b_params, e)
        # numpy's poly expands det(lambda I - J) through the eigenvalues
        expansion = np.poly(jacobian(fig21b_params, e.state))
        assert coeffs == pytest.approx(tuple(expansion[1:]), abs=1e-10)

    def test_rejects_dfe(self, fig21b_params):
        with pytest.raises(ValueError):
            characteristic_coefficients(fig21b_params, dfe_solution(fig21b_params))


class TestRouthHurwitz:
    def test_all_roots_at_minus_one(self):
        # (lambda+1)^3 = lambda^3 + 3 lambda^2 + 3 lambda + 1
        assert routh_hurwitz_stable((3.0, 3.0, 1.0)) is StabilityVerdict.LAS

    def test_negative_a0_unstable(self):
        assert routh_hurwitz_stable((3.0, 3.0, -0.5)) is StabilityVerdict.UNSTABLE

    def test_hopf_boundary_marginal(self):
        # a1 a2 = a0 with a1 > 0 puts a pair on the imaginary axis
        assert routh_hurwitz_stable((2.0, 1.5, 3.0)) is StabilityVerdict.MARGINAL

    def test_verdict_matches_eigenvalues(self, rng):
        # Thm-level agreement away from marginality, on endemic spectra
        checked = 0
        for p in random_valid_params(rng, 2000):
            for e in endemic_equilibria(p):
                rep = stability_report(p, e)
                if np.min(np.abs(rep.eigenvalues.real)) <= 1e-6:
                    continue
                eig_stable = bool(np.all(rep.eigenvalues.real < 0))
                assert (rep.verdict is StabilityVerdict.LAS) == eig_stable
                checked += 1
            if checked >= 1000:
                break
        assert checked >= 1000


class TestDfeStability:
    def test_sign_rule_over_sweep(self, rng):
        # the DFE verdict is decided by the sign of rho*beta - alpha alone
        for p in random_valid_params(rng, 1000):
            rep = stability_report(p, dfe_solution(p))
            lead = p.rho * p.beta - p.alpha
            if abs(lead) <= 1e-9:
                continue
            expected = StabilityVerdict.LAS if lead < 0 else StabilityVerdict.UNSTABLE
            assert rep.verdict is expected


class TestCcsDirection:
    def test_backward_below_rho_star(self, base_params):
        p = ModelParams(beta=0.2 / 0.15, rho=0.15, **base_params)
        rep = ccs_direction(p)
        assert rep.a_coeff > 0
        assert rep.b_coeff == 0.15
        assert rep.direction is BifurcationDirection.BACKWARD

    def test_forward_above_rho_star(self, base_params):
        p = ModelParams(beta=0.2 / 0.25, rho=0.25, **base_params)
        rep = ccs_direction(p)
        assert rep.a_coeff < 0
        assert rep.b_coeff == 0.25
        assert rep.direction is BifurcationDirection.FORWARD

    def test_b_equals_rho_exactly(self, rng):
        for _ in range(50):
            rho = rng.uniform(0.01, 0.99)
            alpha = rng.uniform(0.05, 0.5)
            p = ModelParams(beta=alpha / rho, rho=rho, alpha=alpha,
                            gamma=alpha * rng.uniform(1.0, 3.0), eta=rng.uniform(0.01, 0.5))
            assert ccs_direction(p).b_coeff == rho

    def test_rejects_off_critical_beta(self, base_params):
        with pytest.raises(ValueError, match="alpha/rho"):
            ccs_direction(ModelParams(beta=1.0, rho=0.15, **base_params))

    def test_right_vector_is_nullvector(self, base_params):
        p = ModelParams(beta=0.2 / 0.15, rho=0.15, **base_params)
        rep = ccs_direction(p)
        j = jacobian(p, dfe_state())
        assert np.max(np.abs(j @ rep.right_vec)) < 1e-12

    def test_sign_flips_at_rho_star(self, base_params):
        rho_star = derived_scalars(
            ModelParams(beta=1.0, rho=0.1, **base_params)).rho_star
        below = ccs_direction(ModelParams(beta=0.2 / (rho_star - 1e-3),
                                          rho=rho_star - 1e-3, **base_params))
        above = ccs_direction(ModelParams(beta=0.2 / (rho_star + 1e-3),
                                          rho=rho_star + 1e-3, **base_params))
        assert below.a_coeff > 0 > above.a_coeff


class TestScenario:
    def test_unique_endemic_fig21b(self, fig21b_params):
        assert equilibrium_scenario(fig21b_params) is Scenario.UNIQUE_ENDEMIC

    def test_two_endemic_window(self, base_params):
        # beta_delta = 1.5123 < beta < beta_c = 2 at rho = 0.1
        p = ModelParams(beta=1.7, rho=0.1, **base_params)
        assert equilibrium_scenario(p) is Scenario.TWO_ENDEMIC

    def test_no_endemic_below_rc(self, base_params):
        p = ModelParams(beta=1.0, rho=0.1, **base_params)
        assert equilibrium_scenario(p) is Scenario.NO_ENDEMIC

    def test_count_agreement_sweep(self, rng):
        counts = {Scenario.NO_ENDEMIC: 0, Scenario.TWO_ENDEMIC: 2,
                  Scenario.TWO_COINCIDENT: 2, Scenario.UNIQUE_ENDEMIC: 1}
        for p in random_valid_params(rng, 10_000):
            scenario = equilibrium_scenario(p)
            assert len(endemic_equilibria(p)) == counts[scenario]
