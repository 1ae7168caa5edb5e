"""Direct integration and integral-equation solvers for the full ODE.

Four ways of producing (or correcting) exact solutions of

    (-h^2 d^2/dz^2 + sigma z^kappa W(z) + h^2 psi(z, h)) u = h^2 F

at fixed h, complementing the asymptotic machinery in ``expansion``:

``direct_solve``
    high-accuracy numerical integration of the homogeneous equation from
    Cauchy data at z = Z, carried out in the scale-invariant variable
    lam = z / h^{2/(kappa+2)} with magnitude renormalization, and continued
    below a small lam threshold by a per-h Frobenius series at the regular
    singular point z = 0;
``ivp_from_basis``
    solving the 2x2 system that expresses Cauchy data at Z in a given
    basis of solutions, with a Wronskian non-degeneracy guard;
``vop_iterate``
    Picard iteration for the variation-of-parameters form of the forced
    equation relative to a model basis (A, B), with measured contraction
    factors and weighted-sup norms;
``be_corner_solve``
    solving the forced model equation order by order along the h = 0
    boundary, where each slice rho = const carries a rho-modified model
    operator treated by the Green construction from ``quasimode``.
"""
import math
import cmath
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .geometry import ProblemSpec, check_kappa
from .quasimode import ModelSpec, frobenius_basis, recessive_mode, solve_model, \
    green_apply, wronskian, _chi
from ._cheb import ChebFun, cheb_nodes

__all__ = [
    "DirectSolution", "direct_solve", "BasisCombination", "ivp_from_basis",
    "wronskian_pair", "WeightedNorm", "VopSolution", "vop_iterate",
    "contraction_norm", "CornerSolution", "be_corner_solve",
    "solution_to_csv",
]

_EXP_CAP = 650.0        # |log magnitude| beyond which plain floats are refused


# ---------------------------------------------------------------------------
# direct integration
# ---------------------------------------------------------------------------
def _effective_psi(spec, h):
    """Psi_eff with the W- and E-content folded into the singular part.

    In the variable lam the full homogeneous equation reads
    u'' = [sigma lam^kappa W(lam h^p) + lam^{-2}(alpha^2 - 1/4 + Psi(lam))
           + h^{2p} E] u  with p = 2/(kappa+2); pulling everything except
    the leading sigma lam^kappa into the lam^{-2} slot gives a model-form
    potential with perturbation Psi_eff vanishing at lam = 0.
    """
    p = 2.0 / (spec.kappa + 2)
    hp = h ** p
    kp2 = spec.kappa + 2

    def psi_eff(lam):
        z = lam * hp
        out = spec.eval_Psi(lam) if (spec.Psi is not None or spec.psi_coeffs) \
            else 0.0
        out = out + spec.sigma * lam ** kp2 * (spec.eval_W(z) - 1.0)
        out = out + hp * hp * lam * lam * spec.eval_E(z, h)
        if spec.c:
            out = out + h * h * spec.c
        return out

    return psi_eff


def _psi_taylor_fit(psi, lam_hi, deg=14):
    """Approximate Taylor coefficients (linear term onward) of psi on
    [0, lam_hi] via a Chebyshev fit of psi(lam)/lam."""
    x = 0.5 * lam_hi * (1.0 - np.cos(np.pi * np.arange(4 * deg + 1)
                                     / (4 * deg)))
    x[0] = 1e-9 * lam_hi
    y = np.array([psi(t) / t for t in x], dtype=float)
    c = np.polynomial.chebyshev.chebfit(2.0 * x / lam_hi - 1.0, y, deg)
    pw = np.polynomial.chebyshev.cheb2poly(c)
    # rescale from the unit interval: lam = lam_hi (s+1)/2
    out = np.zeros(deg + 1)
    # p(s(lam)) with s = 2 lam/lam_hi - 1: expand via polynomial composition
    comp = np.polynomial.polynomial.polyval
    lin = np.array([-1.0, 2.0 / lam_hi])
    poly = np.polynomial.polynomial.Polynomial(pw)(
        np.polynomial.polynomial.Polynomial(lin))
    out[:len(poly.coef)] = poly.coef[:deg + 1]
    # psi/lam = sum out_j lam^j  =>  psi_taylor starts at the constant of out
    return tuple(out)


@dataclass
class DirectSolution:
    """Dense numerical solution of the homogeneous equation at one h.

    Evaluation is log-scaled internally; ``eval_log`` returns
    (u_m, du_m, s) with u = u_m e^s and du = du_m e^s (d/dz), ``__call__``
    returns plain floats when representable.
    """
    spec: ProblemSpec
    h: float
    tol: float
    lam_lo: float
    lam_hi: float
    _chunks: list = field(repr=False, default_factory=list)
    _frob: object = field(repr=False, default=None)
    _frob_c: tuple = (0.0, 0.0)
    _frob_s: float = 0.0
    err_checkpoints: dict = field(default_factory=dict)

    @property
    def hp(self):
        return self.h ** (2.0 / (self.spec.kappa + 2))

    def eval_log(self, z):
        z = float(z)
        if not (0.0 < z <= self.spec.Z * (1 + 1e-12)):
            raise ValueError("z = %r outside (0, Z]" % (z,))
        lam = z / self.hp
        if lam < self.lam_lo:
            if self._frob is None:
                raise ValueError("z below the integrated range and no "
                                 "Frobenius continuation is available")
            c1, c2 = self._frob_c
            u1, du1 = self._frob.eval_rec(lam)
            u2, du2 = self._frob.eval_sec(lam)
            return (c1 * u1 + c2 * u2,
                    (c1 * du1 + c2 * du2) / self.hp, self._frob_s)
        for (a, b, s0, dense) in self._chunks:
            if a - 1e-12 * (1 + a) <= lam <= b * (1 + 1e-12):
                y = dense(min(max(lam, a), b))
                return y[0], y[1] / self.hp, s0
        raise ValueError("lam = %r not covered by the dense output" % (lam,))

    def __call__(self, z):
        u, du, s = self.eval_log(z)
        if abs(s) > _EXP_CAP:
            raise OverflowError("solution magnitude exceeds float range; "
                                "use eval_log")
        e = math.exp(s)
        return u * e, du * e

    def to_csv(self, path, zs):
        rows = []
        for z in zs:
            u, du = self(z)
            rows.append((z, self.h, u, du, self.err_checkpoints.get(z, 0.0)))
        solution_to_csv(path, rows)


def _rhs_lam(spec, h):
    p = 2.0 / (spec.kappa + 2)
    hp = h ** p
    a2 = spec.alpha * spec.alpha - 0.25 + (h * h * spec.c if spec.c else 0.0)
    kap = spec.kappa

    def rhs(lam, y):
        z = lam * hp
        V = (spec.sigma * lam ** kap * spec.eval_W(z)
             + (a2 + spec.eval_Psi(lam)) / (lam * lam)
             + hp * hp * spec.eval_E(z, h))
        return (y[1], V * y[0])

    return rhs


def direct_solve(spec, h, init, tol=1e-10, z_lo=None, check=False):
    """Integrate the homogeneous equation from Cauchy data at z = Z.

    init = (u(Z), u'(Z)) with d/dz derivatives.  Integration proceeds in
    lam = z / h^{2/(kappa+2)} down to lam = max(z_lo/h^{2/(kappa+2)}, 0.3),
    renormalizing the magnitude chunk by chunk; below that threshold the
    solution is continued by a Frobenius basis of the per-h regular
    singular equation (indicial roots 1/2 +- alpha).

    With check=True the integration is repeated at tol/100 and the relative
    deviation at interior checkpoints is stored in ``err_checkpoints``.
    """
    if not (1e-13 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-13, 1e-6]")
    if h <= 0:
        raise ValueError("h must be positive")
    hp = h ** (2.0 / (spec.kappa + 2))
    lam_top = spec.Z / hp
    lam_lo = max(0.3, (z_lo / hp) if z_lo is not None else 0.0)
    if lam_lo >= lam_top:
        raise ValueError("integration range is empty")
    rhs = _rhs_lam(spec, h)
    uZ, duZ = init
    y = np.array([uZ, duZ * hp], dtype=float)   # d/dlam derivative
    s0 = 0.0
    scale = max(abs(y[0]), abs(y[1]), 1e-300)
    y, s0 = y / scale, math.log(scale)
    # chunk the range so each chunk sees bounded growth
    rate = max(lam_top ** (spec.kappa / 2.0), 1.0) if spec.kappa >= 0 else 1.0
    n_chunk = max(2, int(math.ceil((lam_top - lam_lo) * rate / 200.0)))
    edges = np.linspace(lam_top, lam_lo, n_chunk + 1)
    chunks = []
    for a, b in zip(edges[:-1], edges[1:]):
        sol = solve_ivp(rhs, (a, b), y, method="DOP853", dense_output=True,
                        rtol=tol, atol=tol * 1e-3, max_step=(a - b))
        if not sol.success:
            raise RuntimeError("integration failed on [%g, %g]: %s"
                               % (b, a, sol.message))
        chunks.append((b, a, s0, sol.sol))
        y = sol.y[:, -1].copy()
        m = max(abs(y[0]), abs(y[1]))
        if m > 0 and not (1e-50 < m < 1e50):
            y, s0 = y / m, s0 + math.log(m)
        elif m == 0:
            raise RuntimeError("solution vanished identically")
    out = DirectSolution(spec=spec, h=h, tol=tol, lam_lo=lam_lo,
                         lam_hi=lam_top, _chunks=chunks)
    if lam_lo <= 0.31:
        # per-h Frobenius continuation below lam_lo
        psi_eff = _effective_psi(spec, h)
        taylor = _psi_taylor_fit(psi_eff, 2.0 * lam_lo)
        mspec = ModelSpec(kappa=spec.kappa, sigma=spec.sigma,
                          alpha=spec.alpha, psi_taylor=taylor)
        frob = frobenius_basis(mspec, order=40)
        u1, du1 = frob.eval_rec(lam_lo)
        u2, du2 = frob.eval_sec(lam_lo)
        um, dum, sm = out.eval_log(lam_lo * hp)
        A = np.array([[u1, u2], [du1, du2]], dtype=float)
        c = np.linalg.solve(A, np.array([um, dum * hp]))
        out._frob, out._frob_c, out._frob_s = frob, (c[0], c[1]), sm
    if check:
        ref = direct_solve(spec, h, init, tol=max(tol / 100.0, 1e-13),
                           z_lo=z_lo, check=False)
        for lam in np.linspace(lam_lo + 1e-9, lam_top, 9)[:-1]:
            z = lam * hp
            u, du, s = out.eval_log(z)
            ur, dur, sr = ref.eval_log(z)
            sc = abs(ur) * math.exp(0.0)
            rel = abs(u * math.exp(s - sr) - ur) / max(abs(ur), 1e-300)
            out.err_checkpoints[z] = rel
    return out


# ---------------------------------------------------------------------------
# Cauchy data in a given basis
# ---------------------------------------------------------------------------
def _eval_log_zh(u, z, h):
    """Uniform access: objects exposing eval_log(z, h) -> ((u, u'), s)
    or eval_log(z) -> (u, u', s)."""
    try:
        vals, s = u.eval_log(z, h)
        return vals[0], vals[1], s
    except TypeError:
        return u.eval_log(z)


@dataclass
class BasisCombination:
    """c1 u1 + c2 u2 with log-scaled coefficients."""
    u1: object
    u2: object
    h: float
    c: tuple               # (c1_m, s1), (c2_m, s2) mantissa/log pairs
    wronskian: float

    def eval_log(self, z):
        (c1, s1), (c2, s2) = self.c
        a, ap, sa = _eval_log_zh(self.u1, z, self.h)
        b, bp, sb = _eval_log_zh(self.u2, z, self.h)
        s = max(s1 + sa, s2 + sb)
        e1, e2 = math.exp(s1 + sa - s), math.exp(s2 + sb - s)
        return c1 * a * e1 + c2 * b * e2, c1 * ap * e1 + c2 * bp * e2, s

    def __call__(self, z):
        u, du, s = self.eval_log(z)
        if abs(s) > _EXP_CAP:
            raise OverflowError("use eval_log")
        return u * math.exp(s), du * math.exp(s)


def wronskian_pair(u1, u2, z, h):
    """u1 u2' - u1' u2 at (z, h) as (mantissa, log-scale)."""
    a, ap, sa = _eval_log_zh(u1, z, h)
    b, bp, sb = _eval_log_zh(u2, z, h)
    return a * bp - ap * b, sa + sb


def ivp_from_basis(u1, u2, data, h, z=None):
    """Coefficients (c1, c2) with c1 u1 + c2 u2 matching Cauchy data.

    data = (u(z0), u'(z0)) at z0 = z (default: the common outer endpoint Z
    of the pair).  The underlying model basis (u1.Q, u2.Q), when present,
    provides the non-degeneracy guard: the solution-pair Wronskian must
    exceed half of h^{-2/(kappa+2)} |W{Q1, Q2}|, otherwise the basis is
    numerically degenerate at this h and a ValueError is raised.
    """
    if z is None:
        z = getattr(getattr(u1, "table", None), "Z", None)
        if z is None:
            raise ValueError("pass z explicitly for bases without a table")
    a, ap, sa = _eval_log_zh(u1, z, h)
    b, bp, sb = _eval_log_zh(u2, z, h)
    wm, ws = wronskian_pair(u1, u2, z, h)
    w = wm * math.exp(ws) if abs(ws) < _EXP_CAP else math.inf
    q1 = getattr(u1, "Q", None)
    q2 = getattr(u2, "Q", None)
    if q1 is not None and q2 is not None:
        kap = q1.kappa
        wq = abs(wronskian(q1, q2))
        thresh = 0.5 * h ** (-2.0 / (kap + 2)) * wq
        if abs(w) <= thresh:
            raise ValueError(
                "degenerate basis: |W{u1,u2}| = %.3e <= %.3e" % (abs(w), thresh))
    elif wm == 0.0:
        raise ValueError("degenerate basis: vanishing Wronskian")
    d0, d1 = data
    # Cramer, kept in log pairs: c1 = (d0 b' - d1 b) e^{sb} / W
    c1m = (d0 * bp - d1 * b)
    c2m = (d1 * a - d0 * ap)
    c = ((c1m / wm, sb - ws), (c2m / wm, sa - ws))
    return BasisCombination(u1=u1, u2=u2, h=h, c=c, wronskian=w)


# ---------------------------------------------------------------------------
# weighted norms
# ---------------------------------------------------------------------------
@dataclass
class WeightedNorm:
    """Sup norm against e^{+-4 Theta zeta^{(kappa+2)/2} / ((kappa+2) h)}.

    kind is 'plain', 'exp+' or 'exp-'; Theta = (1 + sigma)/2, so every
    weight degenerates to 1 on the oscillatory side sigma < 0.
    """
    kind: str
    kappa: int
    sigma: int
    h: float

    def __post_init__(self):
        if self.kind not in ("plain", "exp+", "exp-"):
            raise ValueError("kind must be 'plain', 'exp+' or 'exp-'")
        self.kappa = check_kappa(self.kappa)

    def log_weight(self, zeta):
        if self.kind == "plain":
            return 0.0
        theta = 0.5 * (1 + self.sigma)
        if theta == 0.0:
            return 0.0
        n = self.kappa + 2
        w = 4.0 * theta * zeta ** (n / 2.0) / (n * self.h)
        return w if self.kind == "exp+" else -w

    def log_sup(self, zetas, log_abs):
        """log of sup_i weight(zeta_i) |v_i| from log-magnitudes."""
        vals = [la + self.log_weight(zeta)
                for zeta, la in zip(zetas, log_abs) if la > -math.inf]
        return max(vals) if vals else -math.inf

    def sup(self, zetas, values):
        la = [math.log(abs(v)) if v != 0 else -math.inf for v in values]
        s = self.log_sup(zetas, la)
        return math.exp(s) if s < _EXP_CAP else math.inf


# ---------------------------------------------------------------------------
# variation-of-parameters iteration
# ---------------------------------------------------------------------------
@dataclass
class VopSolution:
    """Picard solution of the variation-of-parameters system.

    u = aleph A + beth B with (aleph, beth) vanishing at the anchor;
    ``factors`` are measured update-contraction ratios, ``update_norms``
    the weighted sups of the successive Picard increments.
    """
    A: object
    B: object
    h: float
    kappa: int
    anchor: object
    zetas: np.ndarray
    aleph: object
    beth: object
    factors: list
    update_norms: list

    def coeffs(self, zeta):
        return self.aleph(zeta), self.beth(zeta)

    def eval(self, zeta):
        hp = self.h ** (2.0 / (self.kappa + 2))
        lam = zeta / hp
        a, ap, sa = self.A.eval_log(lam)
        b, bp, sb = self.B.eval_log(lam)
        al, be = self.coeffs(zeta)
        ea = cmath.exp(sa) if isinstance(sa, complex) else math.exp(sa)
        eb = cmath.exp(sb) if isinstance(sb, complex) else math.exp(sb)
        u = al * a * ea + be * b * eb
        du = (al * ap * ea + be * bp * eb) / hp
        return u, du


def vop_iterate(A, B, E, F, h, Z, anchor="Z", lambda0=None, niter=3,
                n=240, norm_kind="plain"):
    """Picard iteration for u = aleph A + beth B solving P u = h^2 F.

    A, B are model quasimodes (functions of lam); E(zeta) is the regular
    perturbation coefficient, F(zeta) the forcing.  The pair (aleph, beth)
    satisfies the first-order system

        d/dzeta [aleph; beth] = (h^{2/(kappa+2)} / Wr) *
            (E [[-AB, -B^2], [A^2, AB]] [aleph; beth] + F [B; -A])

    and vanishes at the anchor: zeta = Z or, with anchor='graph', at
    zeta = lambda0 h^{2/(kappa+2)}.  Iteration starts from (0, 0); each
    step's update norm is recorded and the measured contraction factor
    must stay below 1 or a RuntimeError is raised.
    """
    kap = A.kappa
    sig = A.sigma
    hp = h ** (2.0 / (kap + 2))
    if anchor == "graph":
        if lambda0 is None:
            raise ValueError("anchor='graph' needs lambda0")
        z_low = lambda0 * hp
    else:
        z_low = (lambda0 or 1.0) * hp
    if z_low >= Z:
        raise ValueError("anchor window is empty: lambda0 h^p >= Z")
    zetas = cheb_nodes(n, z_low, Z)
    wr = wronskian(A, B)
    # nodal data; products paired in log scale before exponentiation
    lam = zetas / hp
    av = np.empty(n + 1, dtype=complex)
    bv = np.empty(n + 1, dtype=complex)
    ab = np.empty(n + 1, dtype=complex)
    a2 = np.empty(n + 1, dtype=complex)
    b2 = np.empty(n + 1, dtype=complex)
    for i, l in enumerate(lam):
        am, apm, sa = A.eval_log(l)
        bm, bpm, sb = B.eval_log(l)
        for name, val, s in (("ab", am * bm, sa + sb),
                             ("a2", am * am, 2 * sa), ("b2", bm * bm, 2 * sb)):
            sr = s.real if isinstance(s, complex) else s
            if abs(sr) > _EXP_CAP and val != 0:
                raise OverflowError(
                    "basis product %s exceeds float range at lam = %g; "
                    "shrink the window" % (name, l))
        ea = cmath.exp(sa) if isinstance(sa, complex) else math.exp(sa)
        eb = cmath.exp(sb) if isinstance(sb, complex) else math.exp(sb)
        av[i], bv[i] = am * ea, bm * eb
        ab[i] = am * bm * (ea * eb)
        a2[i] = am * am * ea * ea
        b2[i] = bm * bm * eb * eb
    Ev = np.array([E(z) for z in zetas], dtype=complex)
    Fv = np.array([F(z) for z in zetas], dtype=complex)
    pref = hp / wr
    anchor_at_right = (anchor != "graph")
    wn = WeightedNorm(norm_kind, kap, sig, h)

    def integrate(vals):
        # antiderivative vanishing at the anchor
        real = ChebFun(vals.real.copy(), z_low, Z).antideriv()
        imag = ChebFun(vals.imag.copy(), z_low, Z).antideriv()
        off = (real(Z) + 1j * imag(Z)) if anchor_at_right else \
            (real(z_low) + 1j * imag(z_low))
        return np.array([real(z) + 1j * imag(z) for z in zetas]) - off

    al = np.zeros(n + 1, dtype=complex)
    be = np.zeros(n + 1, dtype=complex)
    factors, update_norms = [], []
    prev_norm = None
    for it in range(niter + 1):
        d_al = pref * (Ev * (-ab * al - b2 * be) + Fv * bv)
        d_be = pref * (Ev * (a2 * al + ab * be) - Fv * av)
        al_new = integrate(d_al)
        be_new = integrate(d_be)
        upd = max(wn.sup(zetas, al_new - al), wn.sup(zetas, be_new - be))
        update_norms.append(upd)
        if prev_norm is not None and prev_norm > 0:
            fac = upd / prev_norm
            factors.append(fac)
            if fac >= 1.0:
                raise RuntimeError(
                    "no contraction: measured factor %.3f >= 1" % fac)
        prev_norm = upd
        al, be = al_new, be_new
    al_f = _complex_cheb(al, z_low, Z)
    be_f = _complex_cheb(be, z_low, Z)
    return VopSolution(A=A, B=B, h=h, kappa=kap, anchor=anchor, zetas=zetas,
                       aleph=al_f, beth=be_f, factors=factors,
                       update_norms=update_norms)


def _complex_cheb(vals, a, b):
    re = ChebFun(vals.real.copy(), a, b)
    im = ChebFun(vals.imag.copy(), a, b)
    if np.max(np.abs(vals.imag)) <= 1e-14 * max(np.max(np.abs(vals.real)),
                                                1e-300):
        return re
    return lambda z: re(z) + 1j * im(z)


def contraction_norm(A, B, E, h, Z, lambda0, nsamp=400):
    """Operator-norm bound for one variation-of-parameters sweep.

    Sigma is the sum of three weighted sups over lam >= lambda0 of
    lam^{-1} |A B|, e^{-2 Theta t} lam^{-1} |B|^2 and
    e^{+2 Theta t} lam^{-1} |A|^2 with t = 2 lam^{(kappa+2)/2}/(kappa+2)
    and Theta = (1+sigma)/2; in the original variable the exponent is the
    weight 4 Theta zeta^{(kappa+2)/2} / ((kappa+2) h).  The bound is
    Sigma * Z * sup |zeta E / Wr|.
    It decays like lambda0^{-(kappa+2)/2} as the anchor moves outward.
    """
    kap, sig = A.kappa, A.sigma
    theta = 0.5 * (1 + sig)
    hp = h ** (2.0 / (kap + 2))
    lam_top = Z / hp
    if lam_top <= lambda0:
        raise ValueError("lambda0 beyond the outer boundary Z h^{-p}")
    lams = np.geomspace(lambda0, lam_top, nsamp)
    t1 = t2 = t3 = -math.inf
    for l in lams:
        am, apm, sa = A.eval_log(l)
        bm, bpm, sb = B.eval_log(l)
        sa = sa.real if isinstance(sa, complex) else sa
        sb = sb.real if isinstance(sb, complex) else sb
        t = 2.0 * l ** ((kap + 2) / 2.0) / (kap + 2)
        ll = math.log(l)
        if am != 0 and bm != 0:
            t1 = max(t1, math.log(abs(am * bm)) + sa + sb - ll)
        if bm != 0:
            t2 = max(t2, 2 * (math.log(abs(bm)) + sb) - 2 * theta * t - ll)
        if am != 0:
            t3 = max(t3, 2 * (math.log(abs(am)) + sa) + 2 * theta * t - ll)
    sigma_sum = sum(math.exp(t) for t in (t1, t2, t3) if t > -math.inf)
    wr = abs(wronskian(A, B))
    zs = np.geomspace(max(lambda0 * hp, 1e-8 * Z), Z, nsamp)
    e_hat = max(abs(z * E(z)) for z in zs) / wr
    return sigma_sum * Z * e_hat


# ---------------------------------------------------------------------------
# order-by-order solve along the h = 0 boundary
# ---------------------------------------------------------------------------
@dataclass
class CornerSolution:
    """Per-rho solutions of the forced, rho-modified model equation.

    slices maps rho -> (callable lam -> v(lam), basis pair); every slice
    has v(Lam) = v'(Lam) = 0 by homogeneous subtraction.
    """
    rho_list: tuple
    Lam: float
    slices: dict = field(repr=False, default_factory=dict)

    def eval(self, lam, rho):
        if rho not in self.slices:
            raise KeyError("rho = %r was not solved" % (rho,))
        return self.slices[rho][0](lam)


def be_corner_solve(spec, F, E, rho_list, Lam, tol=1e-9, min_rate_margin=0.05):
    """Solve (N + rho^2 E(lam rho)) v = F(., rho) slice by slice in rho.

    spec is the unmodified ModelSpec (the rho = 0 slice); each rho > 0
    slice folds lam^2 rho^2 E(lam rho) into the perturbation Psi and is
    solved by the Green construction with the recessive mode at lam = 0
    and the decaying mode at infinity, then corrected by a homogeneous
    solution so that v(Lam) = v'(Lam) = 0.  The rho-modification is only
    meaningful while lam rho stays bounded, so it is tapered smoothly to
    zero over [Lam, 2 Lam]; the slice operator is exact on [0, Lam].
    This requires 2 Lam to lie below the large-lam matching radius.

    The forcing must be integrable against the recessive branch: its
    power rate at lam = 0 is fitted and required to exceed
    -3/2 - Re alpha (within min_rate_margin), else a ValueError.
    """
    if spec.sigma <= 0:
        raise ValueError("the Green construction needs sigma > 0 "
                         "(a decaying mode at infinity)")
    # admissibility of the forcing at lam = 0
    lams = np.geomspace(1e-3, 3e-2, 12)
    f0 = np.array([abs(F(l, rho_list[0])) for l in lams])
    if np.max(f0) > 0:
        good = f0 > 0
        rate = np.polyfit(np.log(lams[good]), np.log(f0[good]), 1)[0]
        floor = -1.5 - float(np.real(spec.alpha))
        if rate <= floor + min_rate_margin:
            raise ValueError(
                "forcing rate lam^%.3f at 0 violates the integrability "
                "hypothesis (needs > lam^%.3f)" % (rate, floor))
    if 2.0 * Lam > spec.lam_max and any(r != 0 for r in rho_list):
        raise ValueError("2 Lam = %g exceeds the matching radius %g"
                         % (2 * Lam, spec.lam_max))
    sol = CornerSolution(rho_list=tuple(rho_list), Lam=Lam)
    for rho in rho_list:
        if rho == 0:
            mspec = spec
        else:
            base = spec.eval_psi

            def psi_mod(lam, _r=rho):
                return base(lam) + _chi(lam / Lam) * lam * lam * _r * _r \
                    * E(lam * _r)

            mspec = ModelSpec(kappa=spec.kappa, sigma=spec.sigma,
                              alpha=spec.alpha, Psi=psi_mod)
        q_rec = recessive_mode(mspec, tol=tol)
        q_dec = solve_model(mspec, tol=tol)[0]

        def v_part(lam, _qd=q_dec, _qr=q_rec, _r=rho):
            return green_apply(_qd, _qr, lambda l: F(l, _r), lam, tol=tol)

        # homogeneous subtraction: match value and derivative at Lam
        eps = 1e-6 * Lam
        vL = v_part(Lam)
        dvL = (v_part(Lam + eps) - v_part(Lam - eps)) / (2 * eps)
        a1, d1 = q_rec.eval(Lam)
        a2, d2 = q_dec.eval(Lam)
        M = np.array([[a1, a2], [d1, d2]], dtype=float)
        c = np.linalg.solve(M, np.array([vL, dvL], dtype=float))

        def v(lam, _qr=q_rec, _qd=q_dec, _c=c, _vp=v_part):
            return _vp(lam) - (_c[0] * _qr(lam) + _c[1] * _qd(lam))

        sol.slices[rho] = (v, (q_rec, q_dec))
    return sol


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------
def solution_to_csv(path, rows):
    """Write (z, h, u, u', residual) rows; complex values are split into
    real and imaginary columns, floats via shortest round-trip repr."""
    with open(path, "w") as fh:
        fh.write("z,h,re_u,im_u,re_du,im_du,residual\n")
        for (z, h, u, du, res) in rows:
            u, du = complex(u), complex(du)
            fh.write("%r,%r,%r,%r,%r,%r,%r\n"
                     % (float(z), float(h), u.real, u.imag,
                        du.real, du.imag, float(res)))
