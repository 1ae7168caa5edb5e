"""Problem specification and blown-up phase-space coordinates.

The two-parameter family under study is the ODE

    (-h^2 d^2/dz^2 + sigma z^kappa W(z) + h^2 psi(z, h)) u = 0,
    psi = z^{-2} (alpha^2 - 1/4 + Psi(z-dependence)) + E,

on z in (0, Z], h in (0, h0), with a transition point of integer order
kappa >= -1 at z = 0.  Solutions are resolved on the blowup of
[0, Z]_z x [0, h0)_h at the corner (0, 0), with boundary faces

    fe : the (front) face produced by the blowup,
    ze : the original z = 0 boundary,
    be : the original h = 0 boundary ("bulk"),
    ie : the outer boundary z = Z.

``bdf_coords`` evaluates defining functions for these faces at an interior
point, ``corner_chart`` the projective chart near the ze/fe corner, and
``sample_curve`` produces families of (z, h) points approaching the faces
along controlled curves.
"""
from dataclasses import dataclass, field
import numpy as np


def check_kappa(kappa):
    """Validate that kappa is an integer >= -1; return it as int."""
    if isinstance(kappa, float) and not kappa.is_integer():
        raise ValueError("kappa must be an integer >= -1, got %r" % (kappa,))
    k = int(kappa)
    if k != kappa or k < -1:
        raise ValueError("kappa must be an integer >= -1, got %r" % (kappa,))
    return k


@dataclass
class ProblemSpec:
    """Data of one ODE in the family.

    W is the smooth positive factor of the leading potential term; Psi the
    smooth perturbation in the singular h^2/z^2 part (Psi(0) = 0); E the
    regular part of psi, given either as a callable E(z, h) or a list of
    callables [E_0, E_1, ...] for its h^2-Taylor coefficients.
    """
    kappa: int
    sigma: int
    alpha: float = 0.5
    Z: float = 1.0
    W: object = None
    dW: object = None
    d2W: object = None
    Psi: object = None
    psi_coeffs: tuple = ()          # Taylor coefficients of Psi at 0 (no const)
    E: object = None
    c: float = 0.0                  # extra h^2 c / z^2 term (kappa = -1 only)

    def __post_init__(self):
        self.kappa = check_kappa(self.kappa)
        if self.sigma not in (+1, -1):
            raise ValueError("sigma must be +1 or -1")
        if not (np.real(self.alpha) > 0):
            raise ValueError("alpha must have positive real part")
        if self.Z <= 0:
            raise ValueError("Z must be positive")
        if self.c != 0.0 and self.kappa not in (-1,):
            raise ValueError("the c/z^2 correction is only supported for kappa = -1")
        if self.W is None:
            self.W = lambda z: 1.0
            if self.dW is None:
                self.dW = lambda z: 0.0
            if self.d2W is None:
                self.d2W = lambda z: 0.0

    def eval_W(self, z):
        return self.W(z)

    def eval_Psi(self, lam):
        if self.Psi is not None:
            return self.Psi(lam)
        if self.psi_coeffs:
            return np.polyval(list(reversed((0.0,) + tuple(self.psi_coeffs))), lam)
        return 0.0 * np.asarray(lam)

    def eval_E(self, z, h=0.0):
        if self.E is None:
            return 0.0 * np.asarray(z)
        if isinstance(self.E, (list, tuple)):
            acc = 0.0
            for j, Ej in enumerate(self.E):
                acc = acc + (h ** (2 * j)) * np.asarray(Ej(z))
            return acc
        return self.E(z, h)


@dataclass
class BoundaryCoords:
    """Defining functions of the four faces at one interior point, plus the
    fe-interior coordinate lambda."""
    rho_fe: float
    rho_ze: float
    rho_be: float
    rho_ie: float
    lam: float


def bdf_coords(p, kappa, Z):
    """Boundary defining functions at p = (z, h).

    rho_fe = z + h^{2/(kappa+2)}, rho_ze = h^2 / rho_fe^{kappa+2},
    rho_be = z / rho_fe, rho_ie = Z - z, and lam = z / h^{2/(kappa+2)}.
    """
    kappa = check_kappa(kappa)
    z, h = p
    if z < 0 or h <= 0:
        raise ValueError("need z >= 0 and h > 0")
    hh = h ** (2.0 / (kappa + 2))
    rho_fe = z + hh
    return BoundaryCoords(
        rho_fe=rho_fe,
        rho_ze=h ** 2 / rho_fe ** (kappa + 2),
        rho_be=z / rho_fe,
        rho_ie=Z - z,
        lam=z / hh,
    )


def corner_chart(p, kappa):
    """Projective chart near the ze/fe corner: (z, h) -> (x, rho) with
    x = z and rho = h / x^{(kappa+2)/2}, so that h^2 = rho^2 x^{kappa+2}."""
    kappa = check_kappa(kappa)
    z, h = p
    if z <= 0 or h <= 0:
        raise ValueError("corner chart requires z > 0, h > 0")
    x = z
    rho = h / x ** ((kappa + 2) / 2.0)
    return x, rho


def corner_chart_inverse(q, kappa):
    """Inverse of ``corner_chart``: (x, rho) -> (z, h)."""
    kappa = check_kappa(kappa)
    x, rho = q
    return x, rho * x ** ((kappa + 2) / 2.0)


def sample_curve(kind, kappa, n=32, **params):
    """Sample n points (z, h) along a curve approaching the boundary.

    kind:
      'level-z'      : fixed z = params['z'], h log-spaced in
                       [params['h_min'], params['h_max']].
      'level-h'      : fixed h = params['h'], z log-spaced in
                       [params['z_min'], params['z_max']].
      'gamma-lambda' : fixed lam = params['lam'], z = lam h^{2/(kappa+2)},
                       h log-spaced in [params['h_min'], params['h_max']].
      'graph'        : z = params['f'](h), h log-spaced in
                       [params['h_min'], params['h_max']].

    Returns an (n, 2) array with rows (z, h), ordered by decreasing h.
    """
    kappa = check_kappa(kappa)
    if kind in ("level-z", "gamma-lambda", "graph"):
        h = np.geomspace(params["h_max"], params["h_min"], n)
        if kind == "level-z":
            z = np.full(n, float(params["z"]))
        elif kind == "gamma-lambda":
            z = float(params["lam"]) * h ** (2.0 / (kappa + 2))
        else:
            f = params["f"]
            z = np.array([f(hi) for hi in h], dtype=float)
    elif kind == "level-h":
        z = np.geomspace(params["z_max"], params["z_min"], n)
        h = np.full(n, float(params["h"]))
    else:
        raise ValueError("unknown curve kind %r" % (kind,))
    return np.column_stack([z, h])
