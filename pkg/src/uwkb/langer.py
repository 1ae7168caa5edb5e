"""The Langer change of variables and reduction of general W to W = 1.

For the operator -h^2 d^2/dz^2 + sigma z^kappa W(z) + h^2 psi with smooth
positive W, the Langer variable

    zeta(z) = ( (kappa+2)/2 * int_0^z omega^{kappa/2} sqrt(W) d omega )^{2/(kappa+2)}

normalizes the leading potential to sigma zeta^kappa.  Writing zeta = z xi,
xi extends smoothly to z = 0 with xi(0)^{kappa+2} = W(0), and
d zeta/dz = xi^{-kappa/2} sqrt(W).  Conjugating by (xi^kappa/W)^{1/4} removes
the resulting first-order term and produces a corrected subleading potential
E1 for the W = 1 problem in the zeta coordinate.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy import integrate, optimize

from ._cheb import ChebFun
from .geometry import check_kappa


@dataclass
class PotentialSpec:
    """Leading-potential data: order kappa, sign sigma, smooth factor W on
    [Zminus, Z] (Zminus <= 0 allowed for the collapsed case)."""
    kappa: int
    sigma: int
    Z: float
    W: object = None
    dW: object = None
    Zminus: float = 0.0

    def __post_init__(self):
        self.kappa = check_kappa(self.kappa)
        if self.sigma not in (+1, -1):
            raise ValueError("sigma must be +1 or -1")
        if self.Z <= 0:
            raise ValueError("Z must be positive")
        if self.Zminus > 0:
            raise ValueError("Zminus must be <= 0")
        if self.W is None:
            self.W = lambda z: 1.0

    @property
    def trivial_W(self):
        zs = np.linspace(max(self.Zminus, -self.Z), self.Z, 7)
        return all(abs(self.W(z) - 1.0) < 1e-15 for z in zs)


class LangerMap:
    """One-sided Langer map on [0, Z].  Immutable after construction.

    zeta(z) = z * xi(z) with xi cached on a Chebyshev grid in the variable
    t = z^{(kappa+2)/2}, in which the defining integrand is smooth.
    """

    def __init__(self, spec, quad_tol=1e-10, n_cheb=80):
        if not (0 < quad_tol <= 1e-4):
            raise ValueError("quad_tol must lie in (0, 1e-4]")
        self.spec = spec
        self.kappa = spec.kappa
        self.quad_tol = quad_tol
        n = self.kappa + 2
        self.p = 2.0 / n
        self.T = spec.Z ** (1.0 / self.p)

        def sqrtW_t(t):
            w = spec.W(t ** self.p if t > 0 else 0.0)
            if not (w > 0):
                raise ValueError("W must be positive on the domain (W(%g) = %r)"
                                 % (t ** self.p, w))
            return math.sqrt(w)

        # A(t) = int_0^t sqrt(W(t'^p)) dt'; zeta = A(t)^p with t = z^{1/p}.
        A = ChebFun.from_function(sqrtW_t, 0.0, self.T, n_cheb).antideriv()
        # oracle check of the cached antiderivative against adaptive quadrature
        for tchk in (self.T, 0.5 * self.T):
            ref, _ = integrate.quad(sqrtW_t, 0.0, tchk,
                                    epsabs=quad_tol * self.T, epsrel=quad_tol)
            if abs(A(tchk) - ref) > 20 * quad_tol * max(1.0, abs(ref)):
                raise RuntimeError("Langer quadrature cache failed to converge")
        # B(t) = A(t)/t, smooth with B(0) = sqrt(W(0))
        vals = A.vals.copy()
        x = A.x
        vals[1:] = vals[1:] / x[1:]
        vals[0] = sqrtW_t(0.0)
        self._B = ChebFun(vals, 0.0, self.T)
        self.zeta_max = self.zeta(spec.Z)

    # -- forward map -------------------------------------------------------
    def xi(self, z):
        z = abs(float(z))
        t = z ** (1.0 / self.p)
        return float(self._B(min(t, self.T))) ** self.p

    def zeta(self, z):
        return float(z) * self.xi(z)

    def dzeta(self, z):
        return self.xi(z) ** (-self.kappa / 2.0) * math.sqrt(self.spec.W(float(z)))

    def zeta_quad(self, z):
        """Direct adaptive-quadrature evaluation (oracle path)."""
        t = float(z) ** (1.0 / self.p)
        val, _ = integrate.quad(lambda s: math.sqrt(self.spec.W(s ** self.p)),
                                0.0, t, epsabs=1e-14, epsrel=1e-12)
        return val ** self.p

    # -- inverse map -------------------------------------------------------
    def inverse(self, zeta):
        zeta = float(zeta)
        if zeta == 0.0:
            return 0.0
        if zeta < 0 or zeta > self.zeta_max * (1 + 1e-12):
            raise ValueError("zeta out of range")
        z = optimize.brentq(lambda zz: self.zeta(zz) - zeta, 0.0, self.spec.Z,
                            xtol=1e-300, rtol=8.9e-16)
        # safeguarded Newton polish
        for _ in range(3):
            f = self.zeta(z) - zeta
            d = self.dzeta(z)
            if d <= 0:
                break
            step = f / d
            znew = min(max(z - step, 0.0), self.spec.Z)
            if znew == z:
                break
            z = znew
        return z


class SignedLangerMap:
    """Two-sided (collapsed-case) Langer map on [Zminus, Z], kappa in
    {-1, 0, 1}: zeta(z) = sign(z) * (one-sided map of |z| with W(sign(z) .))."""

    def __init__(self, spec, quad_tol=1e-10, n_cheb=80):
        if spec.kappa not in (-1, 0, 1):
            raise ValueError("signed Langer map requires kappa in {-1, 0, 1}")
        if not (spec.Zminus < 0):
            raise ValueError("signed Langer map requires Zminus < 0")
        self.spec = spec
        self.kappa = spec.kappa
        rspec = PotentialSpec(spec.kappa, spec.sigma, spec.Z, W=spec.W)
        lW = spec.W
        lspec = PotentialSpec(spec.kappa, spec.sigma, -spec.Zminus,
                              W=lambda z: lW(-z))
        self._right = LangerMap(rspec, quad_tol, n_cheb)
        self._left = LangerMap(lspec, quad_tol, n_cheb)
        # smoothness through 0: dzeta continuous across the origin.  A
        # smooth W varies by O(eps) over the probe window, so allow that
        # much drift (estimated from the one-sided slope) before flagging
        # a genuine kink.
        eps = 1e-6 * min(spec.Z, -spec.Zminus)
        dr, dl = self.dzeta(eps), self.dzeta(-eps)
        slope = abs(self.dzeta(2 * eps) - dr) / eps
        allow = 100 * quad_tol * max(abs(dr), abs(dl)) + 1e-8 \
            + 4 * eps * slope
        if abs(dr - dl) > allow:
            raise RuntimeError("signed Langer map not smooth through z = 0")
        self.zeta_max = self._right.zeta_max
        self.zeta_min = -self._left.zeta_max

    def _side(self, z):
        return self._right if z >= 0 else self._left

    def xi(self, z):
        return self._side(z).xi(abs(z))

    def zeta(self, z):
        return math.copysign(1.0, z) * self._side(z).zeta(abs(z))

    def dzeta(self, z):
        side = self._side(z)
        return side.xi(abs(z)) ** (-self.kappa / 2.0) * math.sqrt(self.spec.W(float(z)))

    def inverse(self, zeta):
        if zeta >= 0:
            return self._right.inverse(zeta)
        return -self._left.inverse(-zeta)


def build_langer(spec, quad_tol=1e-10, n_cheb=80):
    """Construct the one-sided Langer map for ``spec`` (domain [0, Z])."""
    return LangerMap(spec, quad_tol=quad_tol, n_cheb=n_cheb)


def signed_langer(spec, quad_tol=1e-10, n_cheb=80):
    """Construct the two-sided Langer map (collapsed case, Zminus < 0)."""
    return SignedLangerMap(spec, quad_tol=quad_tol, n_cheb=n_cheb)


def conjugation_multiplier(lmap, z):
    """The prefactor (xi(z)^kappa / W(z))^{1/4} multiplying the W = 1
    solution to produce a solution of the original problem."""
    return (lmap.xi(z) ** lmap.kappa / lmap.spec.W(float(z))) ** 0.25


def transformed_subleading(lmap, alpha=0.5, Psi=None, E=None):
    """The subleading term E0(zeta, h) of the Langer-transformed operator:

        E0 = xi^kappa E / W
             + zeta^{-2} (xi^{kappa+2}/W - 1) [(alpha^2 - 1/4) + Psi(lam_xi)]
             + h^2 zeta^{-2} [Psi(lam_xi) - Psi(lam_0)],

    with lam_xi = zeta/(xi h^{2/(kappa+2)}) = z/h^{2/(kappa+2)} and
    lam_0 = zeta/(W(0) h^2)^{1/(kappa+2)}.  The Psi difference is evaluated
    in extended precision for |zeta| < 1e-3 (near-origin cancellation).
    """
    import mpmath as mp
    kappa = lmap.kappa
    n = kappa + 2
    W0 = lmap.spec.W(0.0)

    def E0(zeta, h):
        zeta = float(zeta)
        z = lmap.inverse(zeta)
        xi = lmap.xi(z)
        W = lmap.spec.W(z)
        out = 0.0
        if E is not None:
            out += xi ** kappa * E(z) / W
        bracket = alpha ** 2 - 0.25
        lam_xi = z / h ** (2.0 / n) if h > 0 else math.inf
        if Psi is not None and h > 0:
            bracket += Psi(lam_xi)
        if zeta != 0.0:
            ratio = xi ** n / W - 1.0
            out += bracket * ratio / zeta ** 2
            if Psi is not None and h > 0:
                lam_0 = zeta / (W0 * h * h) ** (1.0 / n)
                if abs(zeta) < 1e-3:
                    with mp.workdps(40):
                        diff = mp.mpf(Psi(mp.mpf(lam_xi))) - mp.mpf(Psi(mp.mpf(lam_0)))
                        out += float(mp.mpf(h) ** 2 * diff / mp.mpf(zeta) ** 2)
                else:
                    out += h * h * (Psi(lam_xi) - Psi(lam_0)) / zeta ** 2
        return out

    return E0


def conjugated_correction(lmap, E0_eval, n_cheb=120):
    """The corrected subleading term for the conjugated W = 1 operator:

        E1(zeta, h) = E0(zeta, h) + (1/4) d^2/dzeta^2 log(W/xi^kappa)
                      + (1/16) (d/dzeta log(W/xi^kappa))^2.

    When W is identically 1 the log terms vanish and E0 is returned as is.
    """
    if lmap.spec.trivial_W:
        return E0_eval
    kappa = lmap.kappa

    def L(zeta):
        z = lmap.inverse(zeta)
        return math.log(lmap.spec.W(z) / lmap.xi(z) ** kappa)

    Lf = ChebFun.from_function(L, 0.0, lmap.zeta_max, n_cheb)
    L1 = Lf.deriv()
    L2 = L1.deriv()

    def E1(zeta, h=0.0):
        base = E0_eval(zeta, h) if E0_eval is not None else 0.0
        return base + 0.25 * float(L2(zeta)) + (1.0 / 16.0) * float(L1(zeta)) ** 2

    return E1
