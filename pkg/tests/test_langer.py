import math

import numpy as np
import pytest

from uwkb.langer import (PotentialSpec, build_langer, conjugation_multiplier,
                         signed_langer, transformed_subleading)


def _spec(W=None, dW=None, kappa=0, Z=1.0):
    return PotentialSpec(kappa=kappa, sigma=1, Z=Z, W=W, dW=dW)


class TestLangerMap:
    def test_trivial_W_is_identity(self):
        lm = build_langer(_spec())
        for z in (0.1, 0.5, 0.99):
            assert lm.zeta(z) == pytest.approx(z, rel=1e-12)
            assert lm.xi(z) == pytest.approx(1.0, rel=1e-12)

    def test_matches_quadrature_oracle(self):
        lm = build_langer(_spec(W=lambda z: 1.0 + z, dW=lambda z: 1.0))
        for z in (0.05, 0.3, 0.8, 1.0):
            assert lm.zeta(z) == pytest.approx(lm.zeta_quad(z), rel=1e-10)

    def test_inverse_roundtrip(self):
        lm = build_langer(_spec(W=lambda z: 1.0 / (1.0 + 0.5 * z),
                                dW=lambda z: -0.5 / (1.0 + 0.5 * z) ** 2))
        for z in (1e-4, 0.2, 0.7, 0.999):
            assert lm.inverse(lm.zeta(z)) == pytest.approx(z, rel=1e-10)

    def test_dzeta_is_derivative(self):
        lm = build_langer(_spec(W=lambda z: 1.0 + z * z,
                                dW=lambda z: 2.0 * z, kappa=2))
        eps = 1e-6
        for z in (0.2, 0.6):
            fd = (lm.zeta(z + eps) - lm.zeta(z - eps)) / (2 * eps)
            assert lm.dzeta(z) == pytest.approx(fd, rel=1e-8)

    def test_monotone(self):
        lm = build_langer(_spec(W=lambda z: 2.0 - z, dW=lambda z: -1.0))
        zs = np.linspace(0.01, 1.0, 50)
        zetas = [lm.zeta(z) for z in zs]
        assert all(a < b for a, b in zip(zetas, zetas[1:]))

    def test_rejects_nonpositive_W(self):
        with pytest.raises(ValueError):
            build_langer(_spec(W=lambda z: 1.0 - 2.0 * z,
                               dW=lambda z: -2.0))

    def test_odd_kappa_rough_W_caught_by_quadrature_oracle(self):
        # for odd kappa the cache variable is t = z^{(kappa+2)/2}; a W
        # with W'(0) != 0 is not smooth in t and the built-in comparison
        # against adaptive quadrature must refuse the cache
        with pytest.raises(RuntimeError):
            build_langer(_spec(W=lambda z: 1.0 + z, dW=lambda z: 1.0,
                               kappa=1))


class TestConjugation:
    def test_trivial_multiplier_is_one(self):
        lm = build_langer(_spec())
        assert conjugation_multiplier(lm, 0.4) == pytest.approx(1.0)

    def test_transformed_subleading_trivial_W(self):
        lm = build_langer(_spec())
        E0 = transformed_subleading(lm, alpha=0.5, E=lambda z: np.exp(-z))
        # with W = 1 there is no correction: E0 = E in the same coordinate
        for zeta in (0.1, 0.5, 0.9):
            assert E0(zeta, 0.0) == pytest.approx(math.exp(-zeta), rel=1e-9)

    def test_transformed_subleading_first_order_pole(self):
        lm = build_langer(_spec(W=lambda z: 1.0 + z, dW=lambda z: 1.0))
        E0 = transformed_subleading(lm, alpha=0.75, E=lambda z: 1.0)
        # xi^n/W - 1 = O(z), so the bracket contributes a simple 1/zeta
        # pole: zeta * E0 must approach a finite limit
        vals = [zeta * E0(zeta, 0.0) for zeta in (1e-3, 1e-4, 1e-5)]
        assert vals[1] == pytest.approx(vals[2], rel=5e-2)
        assert abs(vals[2]) < 10

    def test_transformed_subleading_regular_at_half(self):
        # at alpha = 1/2 the singular bracket vanishes and E0 = xi^kappa E/W
        lm = build_langer(_spec(W=lambda z: 1.0 + z, dW=lambda z: 1.0))
        E0 = transformed_subleading(lm, alpha=0.5, E=lambda z: 1.0)
        vals = [E0(zeta, 0.0) for zeta in (1e-2, 1e-3, 1e-4)]
        assert all(abs(v) < 5 for v in vals)


class TestSignedLanger:
    def test_two_sided_map_covers_negative_z(self):
        sp = PotentialSpec(kappa=0, sigma=1, Z=1.0, Zminus=-1.0,
                           W=lambda z: 1.0 + 0.2 * z,
                           dW=lambda z: 0.2)
        lm = signed_langer(sp)
        assert lm.zeta(0.5) > 0
        assert lm.zeta(-0.5) < 0
        assert lm.zeta(0.0) == pytest.approx(0.0, abs=1e-12)
