"""Chebyshev grid utilities: nodes, barycentric interpolation, spectral
differentiation and antidifferentiation on an arbitrary interval.

Standard formulas (Chebyshev points of the second kind); kept deliberately
small — heavier numerics are delegated to scipy.
"""
import numpy as np
from numpy.polynomial import chebyshev as npcheb


def cheb_nodes(n, a=-1.0, b=1.0):
    """n+1 Chebyshev points of the second kind on [a, b], increasing."""
    if n == 0:
        return np.array([0.5 * (a + b)])
    k = np.arange(n + 1)
    x = -np.cos(np.pi * k / n)  # increasing on [-1, 1]
    return 0.5 * (a + b) + 0.5 * (b - a) * x


def cheb_diff_matrix(n, a=-1.0, b=1.0):
    """Differentiation matrix on the n+1 Chebyshev points on [a, b]."""
    if n == 0:
        return np.zeros((1, 1))
    x = -np.cos(np.pi * np.arange(n + 1) / n)
    c = np.ones(n + 1)
    c[0] = c[n] = 2.0
    c = c * (-1.0) ** np.arange(n + 1)
    X = np.tile(x, (n + 1, 1)).T
    dX = X - X.T
    D = np.outer(c, 1.0 / c) / (dX + np.eye(n + 1))
    D = D - np.diag(D.sum(axis=1))
    return D * (2.0 / (b - a))


def cheb_coeffs(vals):
    """Chebyshev coefficients of the interpolant through values at the
    second-kind points (increasing order)."""
    n = len(vals) - 1
    if n == 0:
        return np.asarray(vals, dtype=complex if np.iscomplexobj(vals) else float)
    # values at x_k = -cos(pi k / n); mirror to standard cos ordering
    v = np.asarray(vals)[::-1]
    ext = np.concatenate([v, v[-2:0:-1]])
    f = np.fft.fft(ext).real if not np.iscomplexobj(v) else np.fft.fft(ext)
    coef = f[: n + 1] / n
    coef[0] *= 0.5
    coef[n] *= 0.5
    return coef


def cheb_eval(coef, x, a=-1.0, b=1.0):
    """Evaluate a Chebyshev series (coefficients on [a, b]) at x."""
    t = (2.0 * np.asarray(x) - (a + b)) / (b - a)
    return npcheb.chebval(t, coef)


def cheb_antideriv(vals, a, b):
    """Values of the antiderivative (vanishing at a) of the interpolant
    through ``vals`` on the Chebyshev grid of [a, b]."""
    coef = cheb_coeffs(vals)
    icoef = npcheb.chebint(coef) * (0.5 * (b - a))
    x = cheb_nodes(len(vals) - 1, a, b)
    out = cheb_eval(icoef, x, a, b)
    return out - out[0]


def bary_weights(n):
    w = (-1.0) ** np.arange(n + 1)
    w[0] *= 0.5
    w[n] *= 0.5
    return w


def bary_eval(xnodes, vals, w, x):
    """Barycentric interpolation at scalar or array x."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xv = np.atleast_1d(x)
    out = np.empty(xv.shape, dtype=np.asarray(vals).dtype)
    for i, xi in enumerate(xv):
        d = xi - xnodes
        hit = np.where(d == 0.0)[0]
        if hit.size:
            out[i] = vals[hit[0]]
        else:
            q = w / d
            out[i] = (q @ vals) / q.sum()
    return out[0] if scalar else out


class ChebFun:
    """Chebyshev interpolant of a function on [a, b] with derivative and
    antiderivative access."""

    def __init__(self, vals, a, b):
        self.vals = np.asarray(vals)
        self.a = float(a)
        self.b = float(b)
        self.n = len(vals) - 1
        self.x = cheb_nodes(self.n, a, b)
        self._w = bary_weights(self.n)
        self._coef = None

    @classmethod
    def from_function(cls, f, a, b, n):
        x = cheb_nodes(n, a, b)
        return cls(np.array([f(xi) for xi in x]), a, b)

    def coef(self):
        if self._coef is None:
            self._coef = cheb_coeffs(self.vals)
        return self._coef

    def __call__(self, x):
        return bary_eval(self.x, self.vals, self._w, x)

    def deriv(self):
        D = cheb_diff_matrix(self.n, self.a, self.b)
        return ChebFun(D @ self.vals, self.a, self.b)

    def antideriv(self):
        """Antiderivative vanishing at the left endpoint."""
        return ChebFun(cheb_antideriv(self.vals, self.a, self.b), self.a, self.b)


def fit_basis(x, y, basis):
    """Least-squares fit of y(x) against a list of callables; returns the
    coefficient vector."""
    A = np.column_stack([np.asarray([f(xi) for xi in x], dtype=float) for f in basis])
    coef, *_ = np.linalg.lstsq(A, np.asarray(y, dtype=float), rcond=None)
    return coef
