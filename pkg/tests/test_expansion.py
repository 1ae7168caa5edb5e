import math

import numpy as np
import pytest

from uwkb.expansion import (ProblemSpec, assemble, collapsed_coefficients,
                            lo_coefficients)
from uwkb.quasimode import ModelSpec, solve_model


@pytest.fixture(scope="module")
def airy_Q():
    Q, _ = solve_model(ModelSpec(kappa=1, sigma=1, alpha=0.5), tol=1e-11)
    return Q


def _xspec(kappa=1, E0=None, **kw):
    E_list = (E0,) if E0 is not None else ()
    return ProblemSpec(kappa=kappa, sigma=1, alpha=0.5, Z=1.0,
                       E_list=E_list, **kw)


class TestCoefficientTables:
    def test_trivial_problem_all_zero(self):
        tab = lo_coefficients(_xspec(), K=1)
        for zeta in (0.01, 0.3, 0.9):
            assert tab.beta_sum(zeta, 0.1) == pytest.approx(1.0)
            assert tab.gamma_sum(zeta, 0.1) == pytest.approx(0.0, abs=1e-14)

    def test_beta0_is_one(self):
        tab = lo_coefficients(_xspec(E0=lambda z: np.exp(-z)), K=1)
        assert tab.betas[0](0.5) == pytest.approx(1.0)

    def test_gamma_internal_consistency(self):
        # d/dzeta of the integral formula must reproduce its integrand
        tab = lo_coefficients(_xspec(E0=lambda z: np.exp(-z)), K=1)
        assert tab.gamma_residual(0) < 1e-6

    def test_constant_killing_rule(self):
        # gamma_0's bracket must carry no constant term in its small-zeta
        # expansion (loose check; the acceptance battery runs the tight one)
        from uwkb.expansion import _fit_basis_points, _fit_constant
        tab = lo_coefficients(_xspec(kappa=0, E0=lambda z: np.exp(-z)),
                              K=0)
        zs = np.geomspace(tab.zeta_min, 10 * tab.zeta_min, 60)
        ys = np.array([tab.brackets[0](z) for z in zs])
        pts, _ = _fit_basis_points(0, 0)
        const = abs(_fit_constant(zs, ys, pts))
        mid = abs(tab.brackets[0](math.sqrt(tab.zeta_min)))
        assert const < 1e-3 * mid

    def test_range_checked(self):
        tab = lo_coefficients(_xspec(E0=lambda z: np.exp(-z)), K=1)
        with pytest.raises(ValueError):
            tab.betas[1](2.0)
        with pytest.raises(ValueError):
            tab.gammas[0](2.0)

    def test_zeta_min_validation(self):
        with pytest.raises(ValueError):
            lo_coefficients(_xspec(), K=0, zeta_min=2.0)

    def test_to_csv_deterministic(self, tmp_path):
        tab = lo_coefficients(_xspec(E0=lambda z: np.exp(-z)), K=1)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        tab.to_csv(p1)
        tab.to_csv(p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestCollapsedTables:
    def test_continuous_through_zero(self):
        sp = ProblemSpec(kappa=0, sigma=1, alpha=0.5, Z=1.0,
                         E_list=(lambda z: np.exp(-z),))
        tab = collapsed_coefficients(sp, K=1)
        # collapsed coefficients are defined on [0, Z] including 0
        va = tab.betas[1](1e-6)
        vb = tab.betas[1](1e-3)
        assert np.isfinite(complex(va).real)
        assert complex(va).real == pytest.approx(complex(vb).real,
                                                 abs=1e-2)

    def test_differs_from_body_table_by_constant(self):
        # both engines satisfy the same first-order recurrence for beta_1;
        # their normalization constants differ, so the difference must be
        # constant in zeta across the shared domain
        sp = ProblemSpec(kappa=0, sigma=1, alpha=0.5, Z=1.0,
                         E_list=(lambda z: np.exp(-z),))
        body = lo_coefficients(sp, K=1)
        col = collapsed_coefficients(sp, K=1)
        diffs = [complex(col.betas[1](zeta)).real - body.betas[1](zeta)
                 for zeta in (0.3, 0.5, 0.8)]
        assert diffs[0] == pytest.approx(diffs[1], abs=1e-8)
        assert diffs[1] == pytest.approx(diffs[2], abs=1e-8)


class TestUniformSolution:
    def test_eval_log_matches_eval(self, airy_Q):
        u = assemble(airy_Q, lo_coefficients(
            _xspec(E0=lambda z: np.exp(-z)), K=0))
        (uv, du), s = u.eval_log(0.5, 0.05)
        assert uv * math.exp(s) == pytest.approx(u.eval(0.5, 0.05)[0],
                                                 rel=1e-12)

    def test_solves_ode_to_expected_order(self, airy_Q):
        # assembled K = 0 solution has residual O(h^2/zeta-ish); check a
        # mid-domain point at small h via finite differences
        E0 = lambda z: np.exp(-z)
        u = assemble(airy_Q, lo_coefficients(_xspec(E0=E0), K=0))
        z, eps = 0.5, 1e-5
        for h in (0.05, 0.02):
            vals = [u.eval(z + j * eps, h)[0] for j in (-2, -1, 0, 1, 2)]
            d2 = (-vals[4] + 16 * vals[3] - 30 * vals[2] + 16 * vals[1]
                  - vals[0]) / (12 * eps ** 2)
            pot = z + h * h * ((0.25 - 0.25) / z ** 2 + E0(z))
            res = abs(-h * h * d2 + pot * vals[2])
            scale = max(abs(v) for v in vals)
            assert res < 50 * h ** 2 * scale

    def test_error_estimate_positive(self, airy_Q):
        u = assemble(airy_Q, lo_coefficients(
            _xspec(E0=lambda z: np.exp(-z)), K=1))
        assert u.error_estimate(0.5, 0.05) > 0

    def test_second_derivative_consistency(self, airy_Q):
        u = assemble(airy_Q, lo_coefficients(
            _xspec(E0=lambda z: np.exp(-z)), K=0))
        z, h, eps = 0.6, 0.05, 1e-5
        uv, du, d2u = u.eval2(z, h)
        vals = [u.eval(z + j * eps, h)[0] for j in (-2, -1, 0, 1, 2)]
        fd = (-vals[4] + 16 * vals[3] - 30 * vals[2] + 16 * vals[1]
              - vals[0]) / (12 * eps ** 2)
        assert d2u == pytest.approx(fd, rel=1e-4)


class TestSelfSimilarity:
    def test_model_depends_on_lambda_alone(self, airy_Q):
        u = assemble(airy_Q, lo_coefficients(_xspec(), K=0))
        lam = 1.5
        vals = []
        for h in (1e-1, 1e-2):
            z = lam * h ** (2.0 / 3.0)
            (uv, du), s = u.eval_log(z, h)
            vals.append(uv)
        assert vals[0] == pytest.approx(vals[1], rel=1e-10)
