import numpy as np
import pytest

from bifurkit.model import ModelParams, dfe_state, jacobian, rhs_reduced
from bifurkit.numerics import (EigenSet, NewtonError, NewtonSettings,
                               SingularMatrixError, bisect_secant, eigenvalues,
                               fd_jacobian, newton_solve, solve_linear)


class TestSolveLinear:
    def test_identity(self, rng):
        b = rng.normal(size=5)
        assert solve_linear(np.eye(5), b) == pytest.approx(b)

    def test_diagonal_two_by_two(self):
        x = solve_linear([[2.0, 0.0], [0.0, 4.0]], [2.0, 4.0])
        assert x == pytest.approx([1.0, 1.0])

    def test_random_residual_bound(self, rng):
        for _ in range(1000):
            a = rng.normal(size=(3, 3)) + 3.0 * np.eye(3)
            x_true = rng.normal(size=3)
            b = a @ x_true
            x = solve_linear(a, b)
            assert np.max(np.abs(a @ x - b)) < 1e-10 * (1.0 + np.max(np.abs(b)))

    def test_singular_reports_pivot_column(self):
        a = np.array([[1.0, 2.0, 3.0],
                      [2.0, 4.0, 6.0],
                      [0.0, 1.0, 1.0]])
        with pytest.raises(SingularMatrixError) as exc:
            solve_linear(a, np.ones(3))
        assert exc.value.pivot_index in (1, 2)

    def test_multiply_back_roundtrip(self, rng):
        # conditioned up to ~1e6 via scaled diagonals
        for _ in range(200):
            q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
            d = np.diag(10.0 ** rng.uniform(-3, 3, size=4))
            a = q @ d @ q.T
            x_true = rng.normal(size=4)
            b = a @ x_true
            x = solve_linear(a, b)
            assert np.max(np.abs(a @ x - b)) / max(np.max(np.abs(b)), 1e-30) < 1e-10


class TestEigenvalues:
    def test_upper_triangular_diagonal(self):
        a = np.triu(np.arange(1.0, 17.0).reshape(4, 4))
        eig = eigenvalues(a)
        assert sorted(v.real for v in eig) == pytest.approx(sorted(np.diag(a)))

    def test_companion_of_cubic(self):
        # (l+1)(l+2)(l+3) = l^3 + 6 l^2 + 11 l + 6
        comp = np.array([[-6.0, -11.0, -6.0],
                         [1.0, 0.0, 0.0],
                         [0.0, 1.0, 0.0]])
        eig = eigenvalues(comp)
        assert [v.real for v in eig] == pytest.approx([-1.0, -2.0, -3.0], abs=1e-10)
        assert all(v.imag == 0.0 for v in eig)

    def test_dfe_jacobian_spectrum(self):
        p = ModelParams(beta=1.4, rho=0.21, alpha=0.2, gamma=0.3, eta=0.02)
        eig = eigenvalues(jacobian(p, dfe_state()))
        expected = sorted([-p.gamma, p.rho * p.beta - p.alpha, -p.eta], reverse=True)
        assert [v.real for v in eig] == pytest.approx(expected, abs=1e-14)

    def test_conjugate_pairing(self, rng):
        for _ in range(100):
            a = rng.normal(size=(5, 5))
            vals = eigenvalues(a).values
            complex_vals = vals[vals.imag != 0]
            # pairs must match exactly after symmetrization
            assert len(complex_vals) % 2 == 0
            conj_sorted = np.sort_complex(np.conj(complex_vals))
            assert np.array_equal(np.sort_complex(complex_vals), conj_sorted)

    def test_sorted_by_descending_real_part(self, rng):
        for _ in range(50):
            vals = eigenvalues(rng.normal(size=(6, 6))).values
            assert all(vals[i].real >= vals[i + 1].real - 1e-14 for i in range(5))

    def test_against_characteristic_roots(self, rng):
        # roots of the numerically expanded characteristic polynomial
        count = 0
        while count < 200:
            a = rng.normal(size=(3, 3))
            mine = np.sort_complex(eigenvalues(a).values)
            ref = np.sort_complex(np.roots(np.poly(a)))
            if np.min(np.abs(np.subtract.outer(ref, ref)[~np.eye(3, dtype=bool)])) < 1e-2:
                continue  # property holds for separated spectra
            assert np.max(np.abs(mine - ref)) < 1e-7
            count += 1

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            eigenvalues(np.eye(17))

    def test_eigenset_accessors(self):
        es = EigenSet(np.array([1.0 + 0j, -2.0 + 0j]))
        assert es.max_real == 1.0
        assert es.count_unstable() == 1
        assert len(es) == 2


class TestNewton:
    def test_square_root_of_four(self):
        x = newton_solve(lambda v: v * v - 4.0, 3.0)
        assert x[0] == pytest.approx(2.0, abs=1e-12)

    def test_refines_perturbed_endemic_root(self, fig21b_params):
        from bifurkit.model import endemic_equilibria
        e = endemic_equilibria(fig21b_params)[0]
        x0 = e.state + 1e-3
        x = newton_solve(lambda v: rhs_reduced(fig21b_params, v), x0,
                         jac=lambda v: jacobian(fig21b_params, v))
        assert np.max(np.abs(x - e.state)) < 1e-12

    def test_no_real_root_diverges(self):
        with pytest.raises(NewtonError) as exc:
            newton_solve(lambda v: v * v + 1.0, 1.0)
        assert exc.value.reason in ("diverged", "max_iterations")

    def test_singular_jacobian_reported(self):
        with pytest.raises(NewtonError) as exc:
            newton_solve(lambda v: np.array([v[0] ** 2, v[0] ** 2 + 1.0]),
                         np.array([0.0, 0.0]),
                         jac=lambda v: np.zeros((2, 2)))
        assert exc.value.reason == "singular"

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            NewtonSettings(residual_tol=-1.0)
        with pytest.raises(ValueError):
            NewtonSettings(max_iterations=0)


class TestFdJacobian:
    def test_linear_map_recovered(self, rng):
        a = rng.normal(size=(3, 3))
        jac = fd_jacobian(lambda x: a @ x, rng.normal(size=3))
        assert np.max(np.abs(jac - a)) < 1e-9

    def test_product_rule_point(self):
        jac = fd_jacobian(lambda x: np.array([x[0] * x[1]]), np.array([2.0, 3.0]))
        assert jac == pytest.approx(np.array([[3.0, 2.0]]), abs=1e-8)

    def test_against_analytic_model_jacobian(self, fig21b_params):
        x = np.array([0.5, 0.2, 0.2])
        fd = fd_jacobian(lambda v: rhs_reduced(fig21b_params, v), x)
        assert np.max(np.abs(fd - jacobian(fig21b_params, x))) < 1e-6

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            fd_jacobian(lambda x: np.array([1.0 / x[0]]), np.array([0.0]))


class TestBisectSecant:
    def test_simple_root(self):
        root = bisect_secant(lambda x: x * x - 2.0, 0.0, 2.0)
        assert root == pytest.approx(np.sqrt(2.0), abs=1e-11)

    def test_requires_bracket(self):
        with pytest.raises(ValueError):
            bisect_secant(lambda x: x * x + 1.0, -1.0, 1.0)
