import math

import numpy as np
import pytest

from uwkb.geometry import ProblemSpec
from uwkb.quasimode import ModelSpec, recessive_mode, solve_model
from uwkb.solve import (WeightedNorm, be_corner_solve, direct_solve,
                        ivp_from_basis, solution_to_csv, vop_iterate,
                        wronskian_pair)


def _exp_spec():
    # kappa = 0, W = 1, alpha = 1/2, no perturbations: the equation is
    # -h^2 u'' + u = 0 with exact solutions e^{+-z/h}
    return ProblemSpec(kappa=0, sigma=1, alpha=0.5, Z=1.0)


class TestDirectSolve:
    def test_decaying_exponential_oracle(self):
        h = 0.1
        u = direct_solve(_exp_spec(), h, (1.0, -1.0 / h), tol=1e-12)
        for z in (0.2, 0.5, 0.8):
            um, dum, s = u.eval_log(z)
            exact = (1.0 - z) / h        # log of e^{(Z - z)/h}
            assert math.log(abs(um)) + s == pytest.approx(exact, abs=5e-9)
            assert dum / um == pytest.approx(-1.0 / h, rel=1e-8)

    def test_growing_exponential_oracle(self):
        h = 0.1
        u = direct_solve(_exp_spec(), h, (1.0, 1.0 / h), tol=1e-12)
        for z in (0.3, 0.7):
            um, dum, s = u.eval_log(z)
            assert math.log(abs(um)) + s == pytest.approx((z - 1.0) / h,
                                                          abs=5e-9)

    def test_linearity_in_init(self):
        h = 0.1
        u1 = direct_solve(_exp_spec(), h, (1.0, -1.0 / h))
        u2 = direct_solve(_exp_spec(), h, (3.0, -3.0 / h))
        a1, _ = u1(0.5)
        a2, _ = u2(0.5)
        assert a2 == pytest.approx(3.0 * a1, rel=1e-10)

    def test_tol_validation(self):
        for tol in (1e-15, 1e-3):
            with pytest.raises(ValueError):
                direct_solve(_exp_spec(), 0.1, (1.0, 0.0), tol=tol)

    def test_h_and_range_validation(self):
        with pytest.raises(ValueError):
            direct_solve(_exp_spec(), -0.1, (1.0, 0.0))
        with pytest.raises(ValueError):
            direct_solve(_exp_spec(), 0.1, (1.0, 0.0), z_lo=2.0)

    def test_z_out_of_range_rejected(self):
        u = direct_solve(_exp_spec(), 0.1, (1.0, -10.0))
        with pytest.raises(ValueError):
            u.eval_log(1.5)
        with pytest.raises(ValueError):
            u.eval_log(-0.1)

    def test_check_populates_error_checkpoints(self):
        u = direct_solve(_exp_spec(), 0.1, (1.0, -10.0), tol=1e-9,
                         check=True)
        assert len(u.err_checkpoints) > 0
        assert all(v < 1e-7 for v in u.err_checkpoints.values())

    def test_frobenius_continuation_small_z(self):
        # below the integrated lam range the solution is continued by a
        # Frobenius series; it must join the exact exponential smoothly
        h = 0.1
        u = direct_solve(_exp_spec(), h, (1.0, -1.0 / h), tol=1e-12)
        z = 0.01                      # lam = 0.1 < lam_lo = 0.3
        um, dum, s = u.eval_log(z)
        assert math.log(abs(um)) + s == pytest.approx((1.0 - z) / h,
                                                      abs=1e-6)

    def test_to_csv_deterministic(self, tmp_path):
        u = direct_solve(_exp_spec(), 0.1, (1.0, -10.0))
        zs = [0.2, 0.5, 0.8]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        u.to_csv(p1, zs)
        u.to_csv(p2, zs)
        assert p1.read_bytes() == p2.read_bytes()


class TestBasisCombination:
    def test_coefficient_recovery(self):
        h = 0.1
        u1 = direct_solve(_exp_spec(), h, (1.0, -1.0 / h), tol=1e-12)
        u2 = direct_solve(_exp_spec(), h, (1.0, 1.0 / h), tol=1e-12)
        c1, c2 = 2.0, 0.5
        a1, d1 = u1(1.0)
        a2, d2 = u2(1.0)
        comb = ivp_from_basis(u1, u2, (c1 * a1 + c2 * a2,
                                       c1 * d1 + c2 * d2), h, z=1.0)
        for z in (0.4, 0.9):
            want = c1 * u1(z)[0] + c2 * u2(z)[0]
            assert comb(z)[0] == pytest.approx(want, rel=1e-8)

    def test_wronskian_of_exponentials(self):
        # W{e^{-z/h}-type, e^{+z/h}-type} = u1 u2' - u1' u2 = 2/h * e^{s}
        h = 0.1
        u1 = direct_solve(_exp_spec(), h, (1.0, -1.0 / h), tol=1e-12)
        u2 = direct_solve(_exp_spec(), h, (1.0, 1.0 / h), tol=1e-12)
        wm, ws = wronskian_pair(u1, u2, 0.5, h)
        assert wm * math.exp(ws) == pytest.approx(2.0 / h, rel=1e-7)

    def test_degenerate_basis_rejected(self):
        h = 0.1
        u1 = direct_solve(_exp_spec(), h, (1.0, -1.0 / h))
        with pytest.raises(ValueError):
            ivp_from_basis(u1, u1, (1.0, 0.0), h, z=1.0)

    def test_missing_anchor_rejected(self):
        h = 0.1
        u1 = direct_solve(_exp_spec(), h, (1.0, -1.0 / h))
        u2 = direct_solve(_exp_spec(), h, (1.0, 1.0 / h))
        with pytest.raises(ValueError):
            ivp_from_basis(u1, u2, (1.0, 0.0), h)


class TestWeightedNorm:
    def test_kind_validation(self):
        with pytest.raises(ValueError):
            WeightedNorm("bogus", 0, 1, 0.1)

    def test_plain_weight_is_one(self):
        wn = WeightedNorm("plain", 1, 1, 0.1)
        assert wn.log_weight(0.5) == 0.0

    def test_oscillatory_side_weight_degenerates(self):
        wn = WeightedNorm("exp+", 1, -1, 0.1)
        assert wn.log_weight(0.5) == 0.0

    def test_exp_weights_are_reciprocal(self):
        wp = WeightedNorm("exp+", 0, 1, 0.1)
        wm = WeightedNorm("exp-", 0, 1, 0.1)
        assert wp.log_weight(0.4) == pytest.approx(-wm.log_weight(0.4))
        assert wp.log_weight(0.4) > 0

    def test_sup(self):
        wn = WeightedNorm("plain", 0, 1, 0.1)
        assert wn.sup([0.1, 0.2, 0.3], [1.0, -3.0, 2.0]) \
            == pytest.approx(3.0, rel=1e-12)


@pytest.fixture(scope="module")
def model_pair():
    ms = ModelSpec(kappa=0, sigma=1, alpha=0.5)
    A, _ = solve_model(ms, tol=1e-11)
    B = recessive_mode(ms, tol=1e-11)
    return A, B


class TestVopIterate:
    def test_contracts_and_solves(self, model_pair):
        A, B = model_pair
        h = 0.05
        E = lambda z: math.exp(-z)
        F = lambda z: math.exp(-(z - 0.9) ** 2 / 0.02)
        sol = vop_iterate(A, B, E, F, h, 1.0, anchor="Z", lambda0=14.0,
                          niter=5)
        assert all(f < 1.0 for f in sol.factors)
        # finite-difference residual of -h^2 u'' + (1 + h^2 E) u = h^2 F
        # (kappa = 0: the leading potential z^kappa W is the constant 1)
        z, eps = 0.9, 1e-4
        vals = [sol.eval(z + j * eps)[0] for j in (-2, -1, 0, 1, 2)]
        d2 = (-vals[4] + 16 * vals[3] - 30 * vals[2] + 16 * vals[1]
              - vals[0]) / (12 * eps ** 2)
        res = -h * h * d2 + (1.0 + h * h * E(z)) * vals[2] - h * h * F(z)
        scale = max(abs(v) for v in vals) + h * h * abs(F(z))
        assert abs(res) < 1e-5 * scale

    def test_eval_derivative_consistent(self, model_pair):
        A, B = model_pair
        sol = vop_iterate(A, B, lambda z: 0.0, lambda z: 1.0, 0.05, 1.0,
                          niter=2)
        z, eps = 0.5, 1e-5
        u_m, u_p = sol.eval(z - eps)[0], sol.eval(z + eps)[0]
        assert sol.eval(z)[1] == pytest.approx((u_p - u_m) / (2 * eps),
                                               rel=1e-5)

    def test_no_contraction_raises(self, model_pair):
        A, B = model_pair
        with pytest.raises(RuntimeError, match="no contraction"):
            vop_iterate(A, B, lambda z: 5e3, lambda z: 1.0, 0.05, 1.0,
                        niter=4)

    def test_empty_window_rejected(self, model_pair):
        A, B = model_pair
        with pytest.raises(ValueError):
            vop_iterate(A, B, lambda z: 0.0, lambda z: 1.0, 0.5, 0.1,
                        lambda0=10.0)


class TestCornerSolve:
    def test_rho_zero_slice_solves_model_equation(self):
        ms = ModelSpec(kappa=1, sigma=1, alpha=0.5)
        F = lambda lam, rho: math.exp(-(lam - 1.0) ** 2)
        sol = be_corner_solve(ms, F, lambda z: 0.0, (0.0,), Lam=3.0,
                              tol=1e-9)
        v = lambda lam: sol.eval(lam, 0.0)
        # boundary conditions at Lam
        eps = 1e-5
        assert abs(v(3.0)) < 1e-7
        assert abs((v(3.0 + eps) - v(3.0 - eps)) / (2 * eps)) < 1e-4
        # -v'' + lam v = F at an interior point
        lam = 1.2
        vals = [v(lam + j * eps) for j in (-2, -1, 0, 1, 2)]
        d2 = (-vals[4] + 16 * vals[3] - 30 * vals[2] + 16 * vals[1]
              - vals[0]) / (12 * eps ** 2)
        assert -d2 + lam * vals[2] == pytest.approx(F(lam, 0.0), abs=1e-4)

    def test_forcing_rate_guard(self):
        ms = ModelSpec(kappa=1, sigma=1, alpha=0.5)
        F = lambda lam, rho: lam ** -2.5
        with pytest.raises(ValueError, match="integrability"):
            be_corner_solve(ms, F, lambda z: 0.0, (0.0,), Lam=3.0)

    def test_oscillatory_side_rejected(self):
        ms = ModelSpec(kappa=1, sigma=-1, alpha=0.5)
        with pytest.raises(ValueError, match="sigma > 0"):
            be_corner_solve(ms, lambda l, r: 1.0, lambda z: 0.0, (0.0,),
                            Lam=3.0)


class TestCsv:
    def test_solution_to_csv_deterministic(self, tmp_path):
        rows = [(0.1, 0.05, 1.0 + 0j, -2.0 + 0j, 1e-9),
                (0.2, 0.05, 0.5 + 0.25j, -1.0 + 0j, 2e-9)]
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        solution_to_csv(p1, rows)
        solution_to_csv(p2, rows)
        assert p1.read_bytes() == p2.read_bytes()
        header = p1.read_text().splitlines()[0]
        assert header == "z,h,re_u,im_u,re_du,im_du,residual"
