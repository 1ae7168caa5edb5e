"""Coefficient recurrences and assembly of uniform semiclassical solutions.

Two engines produce the correction coefficients beta_k(zeta), gamma_k(zeta)
multiplying a transition-point quasimode Q and its derivative:

* ``lo_coefficients`` -- the general ("body") engine.  Coefficients are
  computed on a Chebyshev grid in log(zeta) down to a floor zeta_min > 0;
  they may blow up polyhomogeneously (powers and logs of zeta) as
  zeta -> 0, with the admissible (power, log-power) pairs supplied by
  :mod:`uwkb.indexsets`.  Each gamma_k involves an integration constant
  C_k fixed by removing the constant term of the small-zeta expansion of
  the integral bracket (least-squares fit against the admissible basis).

* ``collapsed_coefficients`` -- the smooth-data engine for kappa in
  {-1, 0, 1}.  Coefficients extend continuously to zeta = 0; integrals
  with the weight omega**(-kappa/2) are regularised by the substitution
  omega = t**2.

``assemble`` combines a coefficient table, a quasimode and (optionally) a
Langer map into an evaluator for the uniform solution and its first two
z-derivatives, with overflow-safe log-scaled evaluation.
"""
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._cheb import ChebFun, cheb_nodes
from .geometry import check_kappa
from .indexsets import IndexSet, closed_form_F


def _as_float(x):
    return float(x)


@dataclass
class ProblemSpec:
    """Data of a reduced problem (potential already normalised to 1 by the
    Langer change of variables) on zeta in (0, Z].

    Parameters
    ----------
    kappa, sigma : int
        Transition order and sign of the leading potential term.
    alpha : float
        Indicial parameter (Re alpha > 0).
    Z : float
        Right endpoint of the zeta-interval.
    E_list : sequence of callables
        Taylor coefficients in h**2 of the subleading term, as functions
        of zeta.  May be singular as zeta -> 0 (the engine only samples
        zeta > 0).
    psi_coeffs : sequence of floats
        Coefficients p_m of the large-argument expansion of the model
        perturbation, Psi(lam) = sum p_m lam**(-m(kappa+2)); they feed the
        phi-terms of the gamma-recurrence.
    c : float
        Extra first-order coefficient, only meaningful for kappa = -1.
    """
    kappa: int
    sigma: int
    alpha: float = 0.5
    Z: float = 1.0
    E_list: tuple = ()
    psi_coeffs: tuple = ()
    c: float = 0.0

    def __post_init__(self):
        check_kappa(self.kappa)
        if self.sigma not in (-1, 1):
            raise ValueError("sigma must be +1 or -1")
        if self.Z <= 0:
            raise ValueError("Z must be positive")
        if self.c != 0.0 and self.kappa != -1:
            raise ValueError("c is only supported for kappa = -1")
        self.E_list = tuple(self.E_list)
        self.psi_coeffs = tuple(float(p) for p in self.psi_coeffs)

    def eval_E(self, j, zeta):
        if j < len(self.E_list):
            return self.E_list[j](zeta)
        return 0.0

    def phi(self, j):
        """(phi_j, phi_j') as callables of zeta.

        phi_0 = (alpha^2 - 1/4 + p_0) zeta^-2 and, for j >= 1,
        phi_j = p_j zeta^(-2 - j(kappa+2)).
        """
        n = self.kappa + 2
        if j == 0:
            a = self.alpha ** 2 - 0.25
            a += self.psi_coeffs[0] if self.psi_coeffs else 0.0
            return (lambda z: a / z ** 2,
                    lambda z: -2.0 * a / z ** 3)
        if j < len(self.psi_coeffs):
            p = self.psi_coeffs[j]
            e = -2.0 - j * n
            return (lambda z: p * z ** e,
                    lambda z: p * e * z ** (e - 1.0))
        return (lambda z: 0.0, lambda z: 0.0)


# ----------------------------------------------------------------------
# coefficient tables


@dataclass
class CoefficientTable:
    """beta_k, gamma_k for k <= K with first and second zeta-derivatives.

    ``betas[k]`` etc. are plain callables of zeta, valid on
    [zeta_min, Z] for the body engine and [0, Z] (continuously through 0)
    for the collapsed engine.  ``C`` holds the constants fixed by the
    constant-killing rule (body engine; zeros for collapsed), ``c`` the
    conventional extra constants (all zero).  ``annotations[k]`` is the
    index set whose points bound the admissible small-zeta behaviour of
    gamma_k's integral bracket.
    """
    kappa: int
    sigma: int
    K: int
    Z: float
    zeta_min: float
    engine: str  # 'body' | 'collapsed'
    betas: list = field(default_factory=list)
    dbetas: list = field(default_factory=list)
    d2betas: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    dgammas: list = field(default_factory=list)
    d2gammas: list = field(default_factory=list)
    C: list = field(default_factory=list)
    c: list = field(default_factory=list)
    annotations: list = field(default_factory=list)
    brackets: list = field(default_factory=list)
    grid: np.ndarray = None
    _residual_data: list = field(default_factory=list, repr=False)

    def beta_sum(self, zeta, h):
        """sum_k h^{2k} beta_k(zeta) (beta_0 = 1 included)."""
        return math.fsum(h ** (2 * k) * self.betas[k](zeta)
                         for k in range(self.K + 1))

    def gamma_sum(self, zeta, h):
        """sum_k h^{2k+1} gamma_k(zeta)."""
        return math.fsum(h ** (2 * k + 1) * self.gammas[k](zeta)
                         for k in range(len(self.gammas)))

    def gamma_residual(self, k, n_sample=25):
        """Max mismatch between d/dzeta of the gamma_k integral formula
        and its integrand, on interior sample points (consistency check of
        the quadrature/differentiation pipeline)."""
        lo = max(self.zeta_min, 1e-12) * 1.5 if self.engine == "body" \
            else self.Z * 1e-3
        zs = np.geomspace(lo, 0.9 * self.Z, n_sample)
        bracket_d, integrand, scale = self._residual_data[k]
        worst = 0.0
        for z in zs:
            r = abs(bracket_d(z) - integrand(z))
            worst = max(worst, r / max(scale, 1.0))
        return worst

    def to_csv(self, path):
        """Write the table as CSV with columns zeta, k, beta_k, gamma_k."""
        with open(path, "w") as fh:
            fh.write("zeta,k,beta_k,gamma_k\n")
            for k in range(self.K + 1):
                g = self.gammas[k] if k < len(self.gammas) else None
                for z in self.grid:
                    if self.engine == "body" and z < self.zeta_min:
                        continue
                    gv = g(z) if g is not None else 0.0
                    fh.write("%r,%d,%r,%r\n" % (float(z), k,
                                                float(self.betas[k](z)),
                                                float(gv)))


def _range_chk(z, zmin, Z):
    if not zmin * (1.0 - 1e-9) <= z <= Z * (1.0 + 1e-9):
        raise ValueError("zeta=%g outside table range [%g, %g]"
                         % (z, zmin, Z))


def _fit_basis_points(kappa, k, max_pow=3, max_log=6):
    """Admissible (power, log-power) pairs for the small-zeta expansion of
    the gamma_k integral bracket, from the closed-form gamma index set
    shifted to bracket normalisation."""
    n = kappa + 2
    S = closed_form_F(kappa).shift(Fraction(kappa, 2) - k * n)
    pts = [(0.0, 0)]
    for (lp, r), m in S.classes.items():
        if lp > max_log:
            continue
        j = m
        while j <= max_pow:
            pt = (float(j), lp)
            if pt not in pts:
                pts.append(pt)
            j += 1
    pts.sort(key=lambda p: (p[0], p[1]))
    if len(pts) > 30:
        pts = pts[:30]
        if (0.0, 0) not in pts:
            pts.append((0.0, 0))
    return pts, S


def _fit_constant(zs, ys, points, max_terms=10):
    """Coefficient of the constant basis element of a fit of
    sum c_{j,m} zeta^j log^m zeta through (zs, ys).

    The admissible basis is heavily collinear on a one-decade window, so
    a dense least-squares fit cannot pin down the constant.  Instead,
    basis terms are admitted greedily (most correlated with the current
    residual first, joint refit after each addition) until the residual
    stops improving; only terms genuinely present in the data survive,
    and the final small subsystem is well conditioned."""
    ys = np.asarray(ys, dtype=float)
    scale = np.max(np.abs(ys))
    if scale == 0.0:
        return 0.0
    # equalise relative accuracy across the window (the bracket may span
    # many orders of magnitude when singular terms are present)
    w = 1.0 / np.maximum(np.abs(ys), 1e-30 * scale)
    A = np.column_stack([zs ** j * np.log(zs) ** m for (j, m) in points])
    Aw = A * w[:, None]
    nrm = np.linalg.norm(Aw, axis=0)
    nrm[nrm == 0.0] = 1.0
    Aw = Aw / nrm
    yw = ys * w
    # the constant column is always part of the model: locally-constant
    # content must be attributed to it, not to slowly-varying logs
    i0 = points.index((0.0, 0))
    sel = [i0]
    coef, *_ = np.linalg.lstsq(Aw[:, sel], yw, rcond=None)
    best = np.linalg.norm(yw - Aw[:, sel] @ coef)
    r = yw - Aw[:, sel] @ coef
    for _ in range(min(max_terms, len(points)) - 1):
        corr = np.abs(Aw.T @ r)
        corr[sel] = -1.0
        i = int(np.argmax(corr))
        trial = sel + [i]
        c, *_ = np.linalg.lstsq(Aw[:, trial], yw, rcond=None)
        rn = np.linalg.norm(yw - Aw[:, trial] @ c)
        if rn >= 0.999 * best:
            break
        sel, coef, best = trial, c, rn
        r = yw - Aw[:, sel] @ coef
        if best <= 1e-13 * np.linalg.norm(yw):
            break
    return float(coef[sel.index(i0)] / nrm[i0])


def lo_coefficients(spec, K, zeta_min=1e-4, n=256, fit_window=10.0):
    """General coefficient recurrences on [zeta_min, Z].

    beta_0 = 1;
    gamma_k = (sigma / 2 zeta^{kappa/2}) [ int_zeta^Z (beta_k'' -
        sum_j E_j beta_{k-j} + sum_{j<=k-1} (2 phi_j gamma_{k-j-1}' +
        phi_j' gamma_{k-j-1})) omega^{-kappa/2} d omega + C_k ];
    beta_{k+1} = 1/2 int_zeta^Z (gamma_k'' - sum_j E_j gamma_{k-j})
        d omega,
    with C_k removing the constant term of the bracket's small-zeta
    expansion (fitted on [zeta_min, fit_window * zeta_min] against the
    index-set basis) and the remaining constants c_k = 0.
    """
    if K > 8:
        raise ValueError("K <= 8 supported")
    if not 0 < zeta_min < spec.Z:
        raise ValueError("zeta_min must lie in (0, Z)")
    kap = spec.kappa
    sg = spec.sigma
    lo, hi = math.log(zeta_min), math.log(spec.Z)
    s_nodes = cheb_nodes(n, lo, hi)
    z_nodes = np.exp(s_nodes)

    table = CoefficientTable(kap, sg, K, spec.Z, zeta_min, "body",
                             grid=z_nodes.copy())
    one = ChebFun(np.ones(n + 1), lo, hi)
    table.betas.append(lambda z: 1.0)
    table.dbetas.append(lambda z: 0.0)
    table.d2betas.append(lambda z: 0.0)

    nfit = 60
    zfit = np.geomspace(zeta_min, min(fit_window * zeta_min, 0.3 * spec.Z),
                        nfit)

    for k in range(K + 1):
        # ---- gamma_k -------------------------------------------------
        def g_integrand(z, k=k):
            acc = table.d2betas[k](z)
            for j in range(k + 1):
                acc -= spec.eval_E(j, z) * table.betas[k - j](z)
            for j in range(k):
                f, fp = spec.phi(j)
                acc += 2.0 * f(z) * table.dgammas[k - j - 1](z)
                acc += fp(z) * table.gammas[k - j - 1](z)
            return acc

        ivals = np.array([g_integrand(z) * z ** (-kap / 2.0) * z
                          for z in z_nodes])
        J = ChebFun(ivals, lo, hi).antideriv()
        Jtop = float(J(hi))

        def bracket0(z, J=J, Jtop=Jtop):
            return Jtop - float(J(math.log(z)))

        points, S = _fit_basis_points(kap, k)
        c0 = _fit_constant(zfit, [bracket0(z) for z in zfit], points)
        Ck = -c0
        table.C.append(Ck)
        table.c.append(0.0)
        table.annotations.append(S)
        table.brackets.append(lambda z, bracket0=bracket0, Ck=Ck:
                              bracket0(z) + Ck)

        # value from the bracket; first derivative analytically from the
        # integral formula (one numeric derivative only enters at second
        # order -- differentiating twice on the log grid would divide
        # interpolation noise by zeta^2)
        def gv(z, bracket0=bracket0, Ck=Ck):
            _range_chk(z, zeta_min, spec.Z)
            return (sg / 2.0) * z ** (-kap / 2.0) * (bracket0(z) + Ck)

        def gd(z, bracket0=bracket0, Ck=Ck, k=k):
            _range_chk(z, zeta_min, spec.Z)
            return (sg / 2.0) * (
                -(kap / 2.0) * z ** (-kap / 2.0 - 1.0) * (bracket0(z) + Ck)
                - z ** (-float(kap)) * g_integrand(z, k))

        Gd = ChebFun(np.array([gd(z) for z in z_nodes]), lo, hi)
        Gdd = Gd.deriv()

        def gdd(z, Gdd=Gdd):
            _range_chk(z, zeta_min, spec.Z)
            return float(Gdd(math.log(z))) / z

        table.gammas.append(gv)
        table.dgammas.append(gd)
        table.d2gammas.append(gdd)

        def bracket_d(z, k=k):
            # d/dzeta of (2/sigma) zeta^{kappa/2} gamma_k, by central
            # differences of the stored values (independent of the
            # analytic derivative formulas)
            eps = 1e-6 * z
            fp = z + eps
            fm = z - eps
            gp = fp ** (kap / 2.0) * table.gammas[k](fp)
            gm = fm ** (kap / 2.0) * table.gammas[k](fm)
            return (2.0 / sg) * (gp - gm) / (2.0 * eps)

        def integrand_neg(z, k=k):
            return -g_integrand(z, k) * z ** (-kap / 2.0)

        scale = max(abs(g_integrand(z) * z ** (-kap / 2.0))
                    for z in z_nodes[n // 2:])
        table._residual_data.append((bracket_d, integrand_neg, scale))

        # ---- beta_{k+1} ----------------------------------------------
        if k == K:
            break

        def b_integrand(z, k=k):
            acc = table.d2gammas[k](z)
            for j in range(k + 1):
                acc -= spec.eval_E(j, z) * table.gammas[k - j](z)
            return acc

        bvals = np.array([b_integrand(z) * z for z in z_nodes])
        Jb = ChebFun(bvals, lo, hi).antideriv()
        Jb_top = float(Jb(hi))

        def bv(z, Jb=Jb, Jb_top=Jb_top):
            _range_chk(z, zeta_min, spec.Z)
            return 0.5 * (Jb_top - float(Jb(math.log(z))))

        def bd(z, k=k):
            _range_chk(z, zeta_min, spec.Z)
            return -0.5 * b_integrand(z, k)

        Bd = ChebFun(np.array([bd(z) for z in z_nodes]), lo, hi)
        Bdd = Bd.deriv()

        def bdd(z, Bdd=Bdd):
            _range_chk(z, zeta_min, spec.Z)
            return float(Bdd(math.log(z))) / z

        table.betas.append(bv)
        table.dbetas.append(bd)
        table.d2betas.append(bdd)

    return table


# ----------------------------------------------------------------------
# collapsed engine


def _sqrt_funcs(F, T, n=64):
    """Wrap a ChebFun in t = sqrt(zeta) on [0, T] as callables of zeta
    with zeta-derivatives.  The coefficients are smooth in zeta = t**2
    (F is even in t), so derivatives are taken after resampling onto a
    plain zeta-Chebyshev grid, avoiding ill-conditioned chain-rule
    ratios at t = 0."""
    Z = T * T
    Fz = ChebFun.from_function(lambda z: float(F(math.sqrt(z))), 0.0, Z, n)
    return _plain_funcs(Fz, Z)


def _check_range(z, Z):
    if not -1e-12 <= z <= Z * (1.0 + 1e-9):
        raise ValueError("zeta=%g outside table range [0, %g]" % (z, Z))


def _plain_funcs(F, Z):
    Fd = F.deriv()
    Fdd = Fd.deriv()

    def val(z):
        _check_range(z, Z)
        return float(F(z))

    def dval(z):
        _check_range(z, Z)
        return float(Fd(z))

    def d2val(z):
        _check_range(z, Z)
        return float(Fdd(z))

    return val, dval, d2val


def collapsed_coefficients(spec, K, n=96):
    """Smooth-data recurrences for kappa in {-1, 0, 1} on [0, Z]:

    gamma_k = -(sigma / 2 zeta^{kappa/2}) int_0^zeta (beta_k'' -
        sum_j E_j beta_{k-j} + (2c/omega) d/domega(gamma_{k-1}/omega))
        omega^{-kappa/2} d omega;
    beta_{k+1} = -1/2 int_0^zeta (gamma_k'' - sum_j E_j gamma_{k-j})
        d omega,   beta_0 = 1.

    The weight omega^{-kappa/2} is regularised by omega = t**2 for
    kappa = +-1; coefficients come out smooth through zeta = 0.  The
    extra c-term requires kappa = -1 (c = 0 otherwise).
    """
    kap = spec.kappa
    if kap not in (-1, 0, 1):
        raise ValueError("collapsed engine requires kappa in {-1, 0, 1}")
    if spec.c != 0.0 and kap != -1:
        raise ValueError("c != 0 requires kappa = -1")
    sg = spec.sigma
    Z = spec.Z
    teps = 1e-7

    if kap == 0:
        nodes = cheb_nodes(n, 0.0, Z)
        wrap = lambda F: _plain_funcs(F, Z)
        zeta_of = lambda x: x
        a, b = 0.0, Z
    else:
        T = math.sqrt(Z)
        nodes = cheb_nodes(n, 0.0, T)
        wrap = lambda F: _sqrt_funcs(F, T)
        zeta_of = lambda x: x * x
        a, b = 0.0, T

    def grid_eval(f):
        """Evaluate f(zeta) on the grid, nudging the zeta = 0 node."""
        out = np.empty(len(nodes))
        for i, x in enumerate(nodes):
            xx = max(x, teps)
            out[i] = f(zeta_of(xx))
        return out

    table = CoefficientTable(kap, sg, K, Z, 0.0, "collapsed",
                             grid=np.array([zeta_of(x) for x in nodes]))
    table.betas.append(lambda z: 1.0)
    table.dbetas.append(lambda z: 0.0)
    table.d2betas.append(lambda z: 0.0)

    for k in range(K + 1):
        # ---- gamma_k -------------------------------------------------
        def g_core(z, k=k):
            acc = table.d2betas[k](z)
            for j in range(k + 1):
                acc -= spec.eval_E(j, z) * table.betas[k - j](z)
            if spec.c != 0.0 and k >= 1:
                # (2c/omega) d/domega (gamma_{k-1}/omega)
                g = table.gammas[k - 1]
                gd = table.dgammas[k - 1]
                acc += (2.0 * spec.c / z) * (gd(z) / z - g(z) / z ** 2)
            return acc

        if kap == 0:
            ivals = grid_eval(g_core)
        elif kap == 1:
            # omega^{-1/2} d omega = 2 dt
            ivals = 2.0 * grid_eval(g_core)
        else:
            # omega^{+1/2} d omega = 2 t^2 dt
            ivals = np.array([2.0 * max(x, teps) ** 2
                              * g_core(zeta_of(max(x, teps)))
                              for x in nodes])
        I = ChebFun(ivals, a, b).antideriv()
        Id = I.deriv()

        if kap == 0:
            gvals = -(sg / 2.0) * I.vals
        elif kap == 1:
            # gamma = -(sg/2) I(t)/t; limit I'(0) at t = 0
            gvals = np.empty(n + 1)
            for i, x in enumerate(nodes):
                if x < 1e-9:
                    gvals[i] = -(sg / 2.0) * float(Id(0.0))
                else:
                    gvals[i] = -(sg / 2.0) * float(I(x)) / x
        else:
            # gamma = -(sg/2) t I(t)
            gvals = np.array([-(sg / 2.0) * x * float(I(x))
                              for x in nodes])
        Gf = ChebFun(gvals, a, b)
        gv, gd, gdd = wrap(Gf)
        table.gammas.append(gv)
        table.dgammas.append(gd)
        table.d2gammas.append(gdd)
        table.C.append(0.0)
        table.c.append(0.0)
        table.annotations.append(IndexSet([(Fraction(0), 0)]))

        def bracket_d(z, k=k):
            # d/dzeta of -(2/sigma) zeta^{kappa/2} gamma_k
            return -(2.0 / sg) * (kap / 2.0 * z ** (kap / 2.0 - 1.0)
                                  * table.gammas[k](z)
                                  + z ** (kap / 2.0) * table.dgammas[k](z))

        def integrand(z, k=k):
            return g_core(z, k) * z ** (-kap / 2.0)

        scale = max(abs(v) for v in grid_eval(lambda z: g_core(z)))
        table._residual_data.append((bracket_d, integrand, scale))

        # ---- beta_{k+1} ----------------------------------------------
        if k == K:
            break

        def b_core(z, k=k):
            acc = table.d2gammas[k](z)
            for j in range(k + 1):
                acc -= spec.eval_E(j, z) * table.gammas[k - j](z)
            return acc

        if kap == 0:
            bvals = grid_eval(b_core)
        else:
            # d omega = 2 t dt
            bvals = np.array([2.0 * max(x, teps)
                              * b_core(zeta_of(max(x, teps)))
                              for x in nodes])
        Ib = ChebFun(bvals, a, b).antideriv()
        Bf = ChebFun(-0.5 * Ib.vals, a, b)
        bv, bd, bdd = wrap(Bf)
        table.betas.append(bv)
        table.dbetas.append(bd)
        table.d2betas.append(bdd)

    return table


# ----------------------------------------------------------------------
# assembly


@dataclass
class UniformSolution:
    """Evaluator u(z, h) = P(z) [B Q(lam) + h^{kappa/(kappa+2)} G Q'(lam)]
    with lam = zeta(z)/h^{2/(kappa+2)}, B = sum h^{2k} beta_k(zeta),
    G = sum h^{2k+1} gamma_k(zeta), and P the Langer conjugation
    multiplier (1 for a reduced problem).

    ``mode`` records the assembly convention ('raw', 'collapsed' or
    'thm2'); the partial sums coincide numerically, the modes differ in
    the regularity bookkeeping of the table they expect (body table for
    'raw'/'thm2', collapsed table for 'collapsed') and in whether an
    optional interface correction ``delta`` is attached ('thm2' only).
    """
    Q: object
    table: CoefficientTable
    lmap: object = None
    mode: str = "raw"
    h0: float = 0.25
    delta: object = None  # optional correction term delta(z, h)
    delta_bound: float = 0.0
    _aux: dict = field(default_factory=dict, repr=False)

    @property
    def K(self):
        return self.table.K

    def _geometry(self, z):
        """(zeta, dzeta/dz, d2zeta/dz2, P, P', P'') at z."""
        if self.lmap is None:
            return z, 1.0, 0.0, 1.0, 0.0, 0.0
        aux = self._aux
        if "P" not in aux:
            from ._cheb import ChebFun as _CF
            from .langer import conjugation_multiplier
            zlo = aux.get("zlo", max(1e-3, 1e-3 * self.lmap.pot.Z))
            Zp = self.lmap.pot.Z
            P = _CF.from_function(
                lambda zz: conjugation_multiplier(self.lmap, zz),
                zlo, Zp, 200)
            dz = _CF.from_function(self.lmap.dzeta, zlo, Zp, 200)
            aux["P"], aux["Pd"] = P, P.deriv()
            aux["Pdd"] = aux["Pd"].deriv()
            aux["dz"], aux["dzd"] = dz, dz.deriv()
        zeta = self.lmap.zeta(z)
        return (zeta, float(aux["dz"](z)), float(aux["dzd"](z)),
                float(aux["P"](z)), float(aux["Pd"](z)),
                float(aux["Pdd"](z)))

    def eval_log(self, z, h, nderiv=1):
        """(values, s): mantissas of (u, u', ...) up to ``nderiv``
        z-derivatives, sharing the exponent s (u^{(j)} = values[j] e^s)."""
        if h <= 0 or h > self.h0 or z <= 0:
            raise ValueError("need z > 0 and 0 < h <= h0=%g" % self.h0)
        kap = self.table.kappa
        p = 2.0 / (kap + 2)
        zeta, dz, d2z, P, Pd, Pdd = self._geometry(z)
        lam = zeta / h ** p
        q, qp, s = self.Q.eval_log(lam)
        sp = self.Q.spec
        V = sp.potential(lam)
        q2 = V * q

        T = self.table
        B = T.beta_sum(zeta, h)
        cg = h ** (kap / (kap + 2.0))
        G = cg * T.gamma_sum(zeta, h)
        S0 = B * q + G * qp
        u = P * S0
        if self.delta is not None:
            u = u + self.delta(z, h) * math.exp(-s.real if hasattr(s, "real") else -s)
        if nderiv == 0:
            return (u,), s

        Bd = math.fsum(h ** (2 * k) * T.dbetas[k](zeta)
                       for k in range(T.K + 1))
        Gd = cg * math.fsum(h ** (2 * k + 1) * T.dgammas[k](zeta)
                            for k in range(len(T.gammas)))
        lp = dz / h ** p
        S1 = (Bd * dz * q + B * qp * lp + Gd * dz * qp + G * q2 * lp)
        du = Pd * S0 + P * S1
        if nderiv == 1:
            return (u, du), s

        Bdd = math.fsum(h ** (2 * k) * T.d2betas[k](zeta)
                        for k in range(T.K + 1))
        Gdd = cg * math.fsum(h ** (2 * k + 1) * T.d2gammas[k](zeta)
                             for k in range(len(T.gammas)))
        # dV/dlam for Q''' = V' Q + V Q'
        a2 = sp.alpha ** 2 - 0.25
        dV = (sp.sigma * kap * lam ** (kap - 1.0)
              - 2.0 * (a2 + sp.eval_psi(lam)) / lam ** 3
              + sp._dpsi(lam) / lam ** 2) if hasattr(sp, "_dpsi") else \
            (sp.sigma * kap * lam ** (kap - 1.0)
             - 2.0 * (a2 + sp.eval_psi(lam)) / lam ** 3
             + _dpsi_num(sp, lam) / lam ** 2)
        q3 = dV * q + V * qp
        lpp = d2z / h ** p
        S2 = (Bdd * dz * dz * q + Bd * d2z * q + 2.0 * Bd * dz * qp * lp
              + B * q2 * lp * lp + B * qp * lpp
              + Gdd * dz * dz * qp + Gd * d2z * qp
              + 2.0 * Gd * dz * q2 * lp
              + G * q3 * lp * lp + G * q2 * lpp)
        d2u = Pdd * S0 + 2.0 * Pd * S1 + P * S2
        return (u, du, d2u), s

    def eval(self, z, h):
        """(u, du/dz); may overflow for strongly growing quasimodes --
        use eval_log then."""
        (u, du), s = self.eval_log(z, h, nderiv=1)
        es = np.exp(s)
        return u * es, du * es

    def eval2(self, z, h):
        """(u, u', u'')."""
        (u, du, d2u), s = self.eval_log(z, h, nderiv=2)
        es = np.exp(s)
        return u * es, du * es, d2u * es

    def error_estimate(self, z, h):
        """Heuristic size of the first omitted term: h^2 times the last
        included correction."""
        T = self.table
        zeta = z if self.lmap is None else self.lmap.zeta(z)
        kap = T.kappa
        last = (h ** (2 * T.K) * abs(T.betas[T.K](zeta))
                + h ** (kap / (kap + 2.0)) * h ** (2 * T.K + 1)
                * abs(T.gammas[T.K](zeta)))
        return h * h * last


def _dpsi_num(sp, lam, eps=1e-6):
    return (sp.eval_psi(lam + eps) - sp.eval_psi(lam - eps)) / (2 * eps)


def assemble(Q, table, lmap=None, mode="raw", h0=0.25, delta=None,
             delta_bound=0.0):
    """Combine quasimode, coefficient table and optional Langer map into a
    :class:`UniformSolution`.

    Consistency is enforced: quasimode and table must share kappa and
    sigma, and a 'collapsed' assembly requires a collapsed table.
    """
    if Q.spec.kappa != table.kappa or Q.spec.sigma != table.sigma:
        raise ValueError("quasimode and table disagree on (kappa, sigma)")
    if mode not in ("raw", "collapsed", "thm2"):
        raise ValueError("mode must be 'raw', 'collapsed' or 'thm2'")
    if mode == "collapsed" and table.engine != "collapsed":
        raise ValueError("collapsed assembly needs a collapsed table")
    if lmap is not None and abs(lmap.zeta(lmap.pot.Z) - table.Z) > 1e-8 * table.Z:
        raise ValueError("Langer map range does not match table interval")
    if delta is not None and mode != "thm2":
        raise ValueError("delta correction only attaches in 'thm2' mode")
    return UniformSolution(Q, table, lmap, mode, h0, delta, delta_bound)


# ----------------------------------------------------------------------
# fe-corner term-by-term series


@dataclass
class CornerOrder:
    """One order of the transition-face corner series: coefficients b, c
    (vanishing below lambda0), compactly supported remainder R and the
    solved profile v."""
    b: object
    c: object
    R: object
    v: object


def fe_corner_series(Q, partner, f_list, E_fe, lambda0, lambda1, Lam,
                     tol=1e-9):
    """Order-by-order inversion of the model operator at the transition
    face corner.

    Order j solves N v_j = F_j + R_j with
    F_j = (f_j - sum_{j'} E_{j-j'-2} b_{j'}) Q - (sum_{j'} E_{j-j'-2}
    c_{j'}) Q', where f_j are the supplied forcing coefficients
    (supported in (lambda1, inf)) and E_m the corner Taylor coefficients
    of the subleading term.  Returns a list of :class:`CornerOrder`.
    """
    from .quasimode import normal_solve_corrected
    if len(f_list) > 4:
        raise ValueError("at most 4 orders supported")
    orders = []
    for j, fj in enumerate(f_list):
        def f_eff(lam, j=j, fj=fj):
            acc = fj(lam)
            for jp in range(j - 1):
                m = j - jp - 2
                if m < len(E_fe):
                    acc -= E_fe[m](lam) * orders[jp].b(lam)
            return acc

        def g_eff(lam, j=j):
            acc = 0.0
            for jp in range(j - 1):
                m = j - jp - 2
                if m < len(E_fe):
                    acc -= E_fe[m](lam) * orders[jp].c(lam)
            return acc

        b, c, R, v = normal_solve_corrected(Q, partner, f_eff, g_eff,
                                            lambda0, lambda1, Lam, tol=tol)
        orders.append(CornerOrder(b, c, R, v))
    return orders
