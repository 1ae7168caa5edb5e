import math

import numpy as np
import pytest

from uwkb._cheb import (ChebFun, bary_eval, bary_weights, cheb_diff_matrix,
                        cheb_nodes, fit_basis)


class TestChebFun:
    def test_interpolates_smooth_function(self):
        f = ChebFun.from_function(np.exp, -1.0, 2.0, 24)
        xs = np.linspace(-1, 2, 37)
        assert max(abs(f(x) - math.exp(x)) for x in xs) < 1e-13

    def test_deriv(self):
        f = ChebFun.from_function(np.sin, 0.0, 3.0, 40)
        df = f.deriv()
        xs = np.linspace(0.1, 2.9, 23)
        assert max(abs(df(x) - math.cos(x)) for x in xs) < 1e-11

    def test_antideriv_fundamental_theorem(self):
        f = ChebFun.from_function(lambda x: np.cos(2 * x), 0.0, 1.5, 40)
        F = f.antideriv()
        for x in (0.2, 0.7, 1.4):
            ref = 0.5 * math.sin(2 * x) - 0.5 * math.sin(0)
            assert F(x) - F(0.0) == pytest.approx(ref, abs=1e-13)

    def test_second_deriv_of_polynomial_exact(self):
        f = ChebFun.from_function(lambda x: x ** 4, -1.0, 1.0, 12)
        d2 = f.deriv().deriv()
        assert d2(0.5) == pytest.approx(12 * 0.25, rel=1e-10)


class TestNodesAndWeights:
    def test_nodes_endpoints_and_count(self):
        x = cheb_nodes(16, 0.0, 2.0)
        assert len(x) == 17
        assert x[0] == pytest.approx(0.0, abs=1e-15)
        assert x[-1] == pytest.approx(2.0, abs=1e-15)
        assert np.all(np.diff(x) > 0)

    def test_diff_matrix_on_polynomial(self):
        n = 12
        x = cheb_nodes(n, -1.0, 3.0)
        D = cheb_diff_matrix(n, -1.0, 3.0)
        v = x ** 3
        assert np.allclose(D @ v, 3 * x ** 2, atol=1e-10)

    def test_bary_eval_reproduces_nodes(self):
        n = 10
        x = cheb_nodes(n)
        w = bary_weights(n)
        vals = np.sin(x)
        for i in (0, 3, n):
            assert bary_eval(x, vals, w, x[i]) == pytest.approx(vals[i])


class TestFitBasis:
    def test_recovers_known_coefficients(self):
        xs = np.linspace(0.5, 2.0, 40)
        basis = [lambda x: np.ones_like(x), lambda x: x,
                 lambda x: np.log(x)]
        ys = 2.0 - 0.5 * xs + 3.0 * np.log(xs)
        c = fit_basis(xs, ys, basis)
        assert np.allclose(c, [2.0, -0.5, 3.0], atol=1e-10)
