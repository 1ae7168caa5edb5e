import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uwkb.geometry import (ProblemSpec, bdf_coords, check_kappa,
                           corner_chart, corner_chart_inverse, sample_curve)


class TestCheckKappa:
    def test_valid_range(self):
        for k in (-1, 0, 1, 2, 5, 40):
            assert check_kappa(k) == k

    def test_float_integers_accepted(self):
        assert check_kappa(2.0) == 2

    @pytest.mark.parametrize("bad", [-2, -7, 0.5, 1.5, -1.5])
    def test_invalid_rejected(self, bad):
        with pytest.raises(ValueError):
            check_kappa(bad)

    @given(st.integers(min_value=-100, max_value=-2))
    def test_all_below_minus_one_rejected(self, k):
        with pytest.raises(ValueError):
            check_kappa(k)


class TestBdfCoords:
    @given(z=st.floats(0.0, 10.0), h=st.floats(1e-8, 1.0),
           kappa=st.integers(-1, 6))
    @settings(max_examples=200)
    def test_defining_identities(self, z, h, kappa):
        c = bdf_coords((z, h), kappa, Z=10.0)
        n = kappa + 2
        # rho_ze rho_fe^n = h^2 and rho_be rho_fe = z by construction
        assert c.rho_ze * c.rho_fe ** n == pytest.approx(h * h, rel=1e-12)
        assert c.rho_be * c.rho_fe == pytest.approx(z, rel=1e-12, abs=1e-300)
        assert c.lam == pytest.approx(z / h ** (2.0 / n), rel=1e-12)
        assert c.rho_ie == pytest.approx(10.0 - z)

    def test_faces_vanish_in_the_right_regimes(self):
        # ze: z -> 0 at fixed h
        c = bdf_coords((1e-12, 0.1), 1, Z=1.0)
        assert c.rho_be < 1e-10 and c.rho_fe > 0.1
        # be: h -> 0 at fixed z
        c = bdf_coords((0.5, 1e-12), 1, Z=1.0)
        assert c.rho_ze < 1e-20 and c.rho_be > 0.99
        # fe: both -> 0 along lam = const
        c = bdf_coords((1e-6, 1e-9), 1, Z=1.0)
        assert c.rho_fe < 1e-5

    def test_invalid_points(self):
        with pytest.raises(ValueError):
            bdf_coords((-0.1, 0.1), 1, Z=1.0)
        with pytest.raises(ValueError):
            bdf_coords((0.1, 0.0), 1, Z=1.0)


class TestCornerChart:
    @given(z=st.floats(1e-6, 10.0), h=st.floats(1e-8, 1.0),
           kappa=st.integers(-1, 6))
    @settings(max_examples=200)
    def test_roundtrip(self, z, h, kappa):
        q = corner_chart((z, h), kappa)
        z2, h2 = corner_chart_inverse(q, kappa)
        assert z2 == pytest.approx(z, rel=1e-12)
        assert h2 == pytest.approx(h, rel=1e-12)

    @given(z=st.floats(1e-6, 10.0), h=st.floats(1e-8, 1.0),
           kappa=st.integers(-1, 6))
    @settings(max_examples=100)
    def test_h_squared_identity(self, z, h, kappa):
        x, rho = corner_chart((z, h), kappa)
        assert rho ** 2 * x ** (kappa + 2) == pytest.approx(h * h, rel=1e-11)

    def test_requires_interior_point(self):
        with pytest.raises(ValueError):
            corner_chart((0.0, 0.1), 1)


class TestSampleCurve:
    def test_level_z_fixes_z(self):
        pts = sample_curve("level-z", 1, n=16, z=0.3, h_min=1e-4, h_max=0.1)
        assert pts.shape == (16, 2)
        assert np.all(pts[:, 0] == 0.3)
        assert np.all(np.diff(pts[:, 1]) < 0)   # decreasing h

    def test_gamma_lambda_fixes_lambda(self):
        lam = 2.5
        pts = sample_curve("gamma-lambda", 2, n=12, lam=lam,
                           h_min=1e-5, h_max=0.1)
        lams = pts[:, 0] / pts[:, 1] ** (2.0 / 4.0)
        assert np.allclose(lams, lam, rtol=1e-10)

    def test_graph_curve(self):
        pts = sample_curve("graph", 1, n=8, f=lambda h: h ** 0.5,
                           h_min=1e-4, h_max=1e-2)
        assert np.allclose(pts[:, 0], pts[:, 1] ** 0.5, rtol=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            sample_curve("spiral", 1, n=8)


class TestProblemSpec:
    def test_defaults_trivial_W(self):
        p = ProblemSpec(kappa=1, sigma=1)
        assert p.W(0.3) == 1.0
        assert p.dW(0.3) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ProblemSpec(kappa=1, sigma=0)
        with pytest.raises(ValueError):
            ProblemSpec(kappa=1, sigma=1, alpha=-0.5)
        with pytest.raises(ValueError):
            ProblemSpec(kappa=1, sigma=1, Z=0.0)
        with pytest.raises(ValueError):
            ProblemSpec(kappa=-2, sigma=1)

    def test_c_only_for_kappa_minus_one(self):
        ProblemSpec(kappa=-1, sigma=-1, c=0.5)
        with pytest.raises(ValueError):
            ProblemSpec(kappa=1, sigma=1, c=0.5)

    def test_eval_E_taylor_list(self):
        p = ProblemSpec(kappa=0, sigma=1,
                        E=[lambda z: z, lambda z: 2.0 + 0 * z])
        assert p.eval_E(0.5, 0.0) == pytest.approx(0.5)
        assert p.eval_E(0.5, 0.1) == pytest.approx(0.5 + 0.01 * 2.0)

    def test_eval_E_callable(self):
        p = ProblemSpec(kappa=0, sigma=1, E=lambda z, h: z + h)
        assert p.eval_E(0.5, 0.25) == pytest.approx(0.75)

    def test_eval_Psi_from_coeffs(self):
        p = ProblemSpec(kappa=0, sigma=1, psi_coeffs=(2.0, -1.0))
        # Psi(lam) = 2 lam - lam^2, no constant term
        assert p.eval_Psi(0.0) == pytest.approx(0.0)
        assert p.eval_Psi(0.5) == pytest.approx(2 * 0.5 - 0.25)
