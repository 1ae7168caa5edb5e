"""Quasimodes of the model transition-point operator

    N = -d^2/dlam^2 + sigma lam^kappa + lam^{-2} (alpha^2 - 1/4 + Psi(lam)),

their normalizations at lam -> 0 (Frobenius series at the regular singular
point) and lam -> infinity (exponential/oscillatory laws), the modulus
function, the model Green operator, and the corrected normal-operator solve.

Evaluation is piecewise: Frobenius series below lam = 0.1, a dense
high-order Runge-Kutta solution in the middle, and an asymptotic series in
1/t beyond lam_max, where t = 2 lam^{(kappa+2)/2} / (kappa+2).  Exponential
factors are carried explicitly (every mode evaluates as Q = q * e^s with s
the known phase/exponent), so no overflow occurs at large lam.
"""
from dataclasses import dataclass, field
import cmath
import math

import numpy as np
from scipy.integrate import quad, solve_ivp

from .geometry import check_kappa

LAM_SWITCH = 0.1


# ---------------------------------------------------------------------------
# model specification
# ---------------------------------------------------------------------------
@dataclass
class ModelSpec:
    """Data of the model operator N.

    Psi may be supplied as a callable plus Taylor data: ``psi_taylor`` are the
    Taylor coefficients of Psi at lam = 0 starting with the linear term, and
    ``psi_rho2`` the coefficients of Psi(rho^{-2/(kappa+2)}) in powers of
    rho^2 (used by the large-lam series).  Defaults encode Psi = 0.
    """
    kappa: int
    sigma: int
    alpha: complex = 0.5
    Psi: object = None
    psi_taylor: tuple = ()
    psi_rho2: tuple = ()

    def __post_init__(self):
        self.kappa = check_kappa(self.kappa)
        if self.sigma not in (+1, -1):
            raise ValueError("sigma must be +1 or -1")
        if not (np.real(self.alpha) > 0):
            raise ValueError("alpha must have positive real part")
        if self.Psi is not None:
            lams = np.geomspace(1e-6, 1e-2, 9)
            vals = np.array([abs(self.Psi(l)) for l in lams])
            if not np.all(np.isfinite(vals / lams)) or vals[0] > 1e-2:
                raise ValueError("Psi must vanish linearly at 0 (Psi(0) = 0)")

    def eval_psi(self, lam):
        if self.Psi is not None:
            return self.Psi(lam)
        if self.psi_taylor:
            out = 0.0
            for c in reversed(self.psi_taylor):
                out = lam * (c + out)
            return out
        return 0.0

    def potential(self, lam):
        """V(lam) with N = -d^2/dlam^2 + V."""
        a2 = self.alpha * self.alpha - 0.25
        return self.sigma * lam ** self.kappa + (a2 + self.eval_psi(lam)) / lam ** 2

    def phase_t(self, lam):
        n = self.kappa + 2
        return 2.0 * lam ** (n / 2.0) / n

    @property
    def nu(self):
        return 2.0 * self.alpha / (self.kappa + 2)

    @property
    def lam_max(self):
        n = self.kappa + 2
        return max(30.0, (10.0 * n) ** (2.0 / n))


# ---------------------------------------------------------------------------
# Frobenius series at the regular singular point
# ---------------------------------------------------------------------------
@dataclass
class FrobeniusBasis:
    """Two formal solutions at lam = 0: the recessive branch lam^{1/2+alpha}
    and a second branch lam^{1/2-alpha}, with a log term (coefficient
    ``log_coef`` times the recessive branch) when the resonance 2 alpha in Z
    is actually obstructed."""
    spec: object
    order: int
    s_rec: complex
    s_sec: complex
    coef_rec: list
    coef_sec: list
    log_coef: complex
    has_log: bool

    def eval_rec(self, lam):
        return _eval_series(self.s_rec, self.coef_rec, lam)

    def eval_sec(self, lam):
        u, du = _eval_series(self.s_sec, self.coef_sec, lam)
        if self.has_log and self.log_coef != 0:
            ur, dur = self.eval_rec(lam)
            L = math.log(lam)
            u = u + self.log_coef * ur * L
            du = du + self.log_coef * (dur * L + ur / lam)
        return u, du


def _eval_series(s, coef, lam):
    acc = 0.0
    dacc = 0.0
    for n in range(len(coef) - 1, -1, -1):
        acc = coef[n] + lam * acc
    for n in range(len(coef) - 1, -1, -1):
        dacc = (s + n) * coef[n] + lam * dacc
    # u = lam^s sum, u' = lam^{s-1} sum (s+n) c_n lam^n
    ls = lam ** s if not isinstance(s, complex) else cmath.exp(s * cmath.log(lam))
    return ls * acc, ls / lam * dacc


def frobenius_basis(spec, order=40):
    """Frobenius series of N at lam = 0 through ``order`` powers.

    Coefficient arithmetic follows the field of the inputs: with Fraction
    alpha/psi data the recurrence stays exact.
    """
    kap = spec.kappa
    n_shift = kap + 2
    half = type(spec.alpha)(1) / 2 if hasattr(spec.alpha, "denominator") else 0.5
    s1 = half + spec.alpha          # recessive
    s2 = half - spec.alpha
    psi = list(spec.psi_taylor)

    def I(x):
        return -x * x + x + (spec.alpha * spec.alpha - half * half)

    def rhs(coef, n):
        # -(sigma * c_{n-kappa-2} + sum_m psi_m c_{n-m})
        b = 0
        if n - n_shift >= 0:
            b = b + spec.sigma * coef[n - n_shift]
        for m, pm in enumerate(psi, start=1):
            if n - m >= 0 and pm != 0:
                b = b + pm * coef[n - m]
        return -b

    # recessive branch: I(s1+n) = -n(n+2 alpha) never vanishes for n >= 1
    c1 = [1]
    for n in range(1, order + 1):
        c1.append(rhs(c1, n) / I(s1 + n))

    # second branch; resonance at n* = 2 alpha if integral
    two_alpha = 2 * spec.alpha
    res_n = None
    if abs(complex(two_alpha).imag) == 0:
        ta = complex(two_alpha).real
        if abs(ta - round(ta)) < 1e-12 and round(ta) >= 1:
            res_n = int(round(ta))
    c2 = [1]
    log_coef = 0
    has_log = False
    for n in range(1, order + 1):
        b = rhs(c2, n)
        if res_n is not None and n == res_n:
            # I(s2 + n*) = 0: the obstruction b forces the log term, via
            # b + C (1 - 2 s1) c1_0 = 0 with 1 - 2 s1 = -2 alpha
            if b != 0:
                log_coef = b / two_alpha
                has_log = True
            c2.append(0 * c2[0])
            continue
        if res_n is not None and has_log and n > res_n:
            m = n - res_n
            b = b - log_coef * (1 - 2 * (s1 + m)) * c1[m]
        c2.append(b / I(s2 + n))
    return FrobeniusBasis(spec, order, s1, s2, c1, c2, log_coef, has_log)


# ---------------------------------------------------------------------------
# large-argument asymptotic series
# ---------------------------------------------------------------------------
def _tail_coeffs(spec, kind, nmax=30):
    """Coefficients g_j of the asymptotic factor g(1/t) in

        Q = e^{phase} lam^{-kappa/4} g(1/t),   phase in {-t, +t, +it, -it},

    derived from the model ODE in the Bessel-type variable t.  ``kind`` is
    the sign of the phase: 'dec', 'grow', 'osc+', 'osc-'.
    """
    nu = complex(spec.nu)
    c = 2.0 / (spec.kappa + 2)
    q = [c ** (2 * m + 2) * pm for m, pm in enumerate(spec.psi_rho2, start=1)]
    if kind == "dec":
        den = lambda j: -2.0 * j
    elif kind == "grow":
        den = lambda j: 2.0 * j
    elif kind == "osc+":
        den = lambda j: 2.0j * j
    else:
        den = lambda j: -2.0j * j
    g = [1.0 + 0.0j]
    for j in range(1, nmax + 1):
        val = ((j - 1) * j + 0.25 - nu * nu) * g[j - 1]
        for m, qm in enumerate(q, start=1):
            if j - 1 - 2 * m >= 0:
                val -= qm * g[j - 1 - 2 * m]
        g.append(val / den(j))
    return g


def _eval_tail(spec, g, sign_phase, lam):
    """(q, qp, s) with Q = q e^s, Q' = qp e^s, from the asymptotic series.

    sign_phase: -1, +1, +1j or -1j multiplying t(lam).
    """
    n = spec.kappa + 2
    t = spec.phase_t(lam)
    x = 1.0 / t
    # optimally truncated evaluation
    acc = 0.0j
    dacc = 0.0j        # dg/dx accumulated
    best = math.inf
    term = 1.0 + 0.0j
    for j, gj in enumerate(g):
        term = gj * x ** j
        if abs(term) > best:
            break
        best = abs(term)
        acc += term
        if j >= 1:
            dacc += j * gj * x ** (j - 1)
    pref = lam ** (-spec.kappa / 4.0)
    q = pref * acc
    # dQ/dlam = e^{phase} [ (sign t' - kappa/(4 lam)) q + pref g'(x) x'(lam) ]
    tp = lam ** (spec.kappa / 2.0)
    xp = -tp * x * x
    qp = (sign_phase * tp - spec.kappa / (4.0 * lam)) * q + pref * dacc * xp
    return q, qp, sign_phase * t


# ---------------------------------------------------------------------------
# quasimode object
# ---------------------------------------------------------------------------
class Quasimode:
    """Piecewise evaluator of one element of ker N.

    eval(lam)   -> (Q, Q')            (may overflow only if |s| > 700)
    eval_log(lam) -> (q, qp, s) with Q = q e^s, Q' = qp e^s, s real or
    imaginary (phase); s = 0 below the mid region.
    """

    def __init__(self, spec, tag, frob, c_frob, mid_sol, mid_span, scale_sign,
                 tail_g, tail_phase):
        self.spec = spec
        self.tag = tag
        self.kappa = spec.kappa
        self.sigma = spec.sigma
        self.alpha = spec.alpha
        self._frob = frob
        self._c = c_frob            # (c1, c2) coefficients on (rec, sec)
        self._mid = mid_sol         # dense solution of the scaled ODE or None
        self._span = mid_span
        self._ssign = scale_sign    # Q = mid * exp(ssign * t)
        self._g = tail_g
        self._phase = tail_phase    # sign multiplying t in the tail

    # -- evaluation --------------------------------------------------------
    def eval_log(self, lam):
        lam = float(lam)
        if lam <= 0:
            raise ValueError("lam must be positive")
        a, b = self._span
        if lam < a or self._mid is None:
            c1, c2 = self._c
            u1, du1 = self._frob.eval_rec(lam)
            u2, du2 = self._frob.eval_sec(lam)
            return c1 * u1 + c2 * u2, c1 * du1 + c2 * du2, 0.0
        if lam <= b:
            v, dv = self._mid(lam)
            if self._ssign == 0:
                return v, dv, 0.0
            tp = lam ** (self.kappa / 2.0)
            s = self._ssign * self.spec.phase_t(lam)
            # Q = v e^{ssign t}: Q' = (v' + ssign tp v) e^{ssign t}
            return v, dv + self._ssign * tp * v, s
        return _eval_tail(self.spec, self._g, self._phase, lam)

    def eval(self, lam):
        q, qp, s = self.eval_log(lam)
        e = cmath.exp(s) if isinstance(s, complex) else math.exp(s)
        Q, Qp = q * e, qp * e
        if not isinstance(s, complex) and abs(complex(Q).imag) < 1e-13 * abs(Q):
            return complex(Q).real, complex(Qp).real
        return Q, Qp

    def __call__(self, lam):
        return self.eval(lam)[0]

    # -- modulus -----------------------------------------------------------
    def modulus_log(self, lam):
        """(m, s): the modulus function is m * e^s."""
        q, qp, s = self.eval_log(lam)
        w = _mod_weight(self.kappa, lam)
        sr = s.real if isinstance(s, complex) else s
        return abs(q) ** 2 + w * abs(qp) ** 2, 2.0 * sr

    def modulus(self, lam):
        m, s = self.modulus_log(lam)
        return m * math.exp(s)


def _chi(t):
    t = abs(t)
    if t <= 1.0:
        return 1.0
    if t >= 2.0:
        return 0.0
    y = 2.0 - t
    return y * y * y * (10.0 - 15.0 * y + 6.0 * y * y)


def _mod_weight(kappa, lam):
    # lam^2 <chi(1/lam) lam^{(kappa+2)/2}>^{-2}
    x = _chi(1.0 / lam) * lam ** ((kappa + 2) / 2.0)
    return lam * lam / (1.0 + x * x)


def modulus(q, lam):
    """Mod_Q(lam) = |Q|^2 + lam^2 <chi(1/lam) lam^{(kappa+2)/2}>^{-2} |Q'|^2."""
    return q.modulus(lam)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------
def _scaled_rhs(spec, ssign):
    """RHS of the ODE for v with Q = v e^{ssign t}:
    v'' = -2 ssign t' v' + (V - lam^kappa_part corrections) v."""
    kap = spec.kappa

    def rhs(lam, y):
        v, dv = y
        tp = lam ** (kap / 2.0)
        a2 = spec.alpha * spec.alpha - 0.25
        if ssign == 0:
            acc = spec.sigma * lam ** kap + (a2 + spec.eval_psi(lam)) / lam ** 2
            return [dv, acc * v]
        # sigma = +1 here (exponential scaling only used then);
        # Q = v e^{ssign t}  =>  v'' = -2 ssign t' v' + ((a2+Psi)/lam^2 - ssign t'') v
        coef = (a2 + spec.eval_psi(lam)) / lam ** 2 - ssign * (kap / 2.0) * lam ** (kap / 2.0 - 1.0)
        return [dv, -2.0 * ssign * tp * dv + coef * v]

    return rhs


def _integrate(spec, ssign, lam0, lam1, y0, tol, complex_ok=False):
    rhs = _scaled_rhs(spec, ssign)
    if complex_ok:
        # integrate real/imag stacked
        def rhs_c(lam, y):
            v = y[0] + 1j * y[1]
            dv = y[2] + 1j * y[3]
            out = rhs(lam, [v, dv])
            return [out[0].real, out[0].imag, out[1].real, out[1].imag]
        y0r = [y0[0].real, y0[0].imag, y0[1].real, y0[1].imag]
        sol = solve_ivp(rhs_c, (lam0, lam1), y0r, method="DOP853",
                        rtol=tol / 10.0, atol=tol * 1e-3, dense_output=True)
        if not sol.success:
            raise RuntimeError("quasimode integration failed: " + sol.message)
        def mid(lam):
            y = sol.sol(lam)
            return y[0] + 1j * y[1], y[2] + 1j * y[3]
        return mid
    sol = solve_ivp(rhs, (lam0, lam1), [float(y0[0]), float(y0[1])],
                    method="DOP853", rtol=tol / 10.0, atol=tol * 1e-3,
                    dense_output=True)
    if not sol.success:
        raise RuntimeError("quasimode integration failed: " + sol.message)

    def mid(lam):
        y = sol.sol(lam)
        return y[0], y[1]

    return mid


def _match_frobenius(frob, lam, Q, Qp):
    """Coefficients (c1, c2) with Q = c1 u_rec + c2 u_sec at lam."""
    u1, du1 = frob.eval_rec(lam)
    u2, du2 = frob.eval_sec(lam)
    det = u1 * du2 - du1 * u2
    c1 = (Q * du2 - Qp * u2) / det
    c2 = (Qp * u1 - Q * du1) / det
    return c1, c2


def solve_model(spec, tol=1e-10):
    """Basis of ker N.

    sigma > 0: (Q_inf tagged 'decaying', Qhat tagged 'generic'); Q_inf is
    normalized by Q_inf e^{+t} lam^{kappa/4} -> 1.
    sigma < 0: (Q_minus, Q_plus) tagged 'oscillatory-/+', normalized by
    |Q_pm| lam^{kappa/4} -> 1 with phases e^{-it}, e^{+it}.
    """
    if not (1e-12 <= tol <= 1e-6):
        raise ValueError("tol must lie in [1e-12, 1e-6]")
    frob = frobenius_basis(spec)
    lam_max = spec.lam_max
    if spec.sigma > 0:
        # decaying mode: asymptotic seed at lam_max, integrate backward
        g = _tail_coeffs(spec, "dec")
        q0, qp0, _ = _eval_tail(spec, g, -1.0, lam_max)
        # scaled variable v = Q e^{+t}: v = q, v' = qp + t' q
        tp = lam_max ** (spec.kappa / 2.0)
        v0 = complex(q0).real
        dv0 = complex(qp0).real + tp * v0
        mid = _integrate(spec, -1, lam_max, LAM_SWITCH, (v0, dv0), tol)
        vS, dvS = mid(LAM_SWITCH)
        tpS = LAM_SWITCH ** (spec.kappa / 2.0)
        tS = spec.phase_t(LAM_SWITCH)
        QS = vS * math.exp(-tS)
        QpS = (dvS - tpS * vS) * math.exp(-tS)
        c = _match_frobenius(frob, LAM_SWITCH, QS, QpS)
        q_inf = Quasimode(spec, "decaying", frob, c, mid, (LAM_SWITCH, lam_max),
                          -1, g, -1.0)
        _drift_check(q_inf, spec, tol)
        # generic growing mode from the dominant Frobenius branch
        u2, du2 = frob.eval_sec(LAM_SWITCH)
        tS = spec.phase_t(LAM_SWITCH)
        w0 = u2 * math.exp(-tS)      # w = Q e^{-t}
        dw0 = (du2 - LAM_SWITCH ** (spec.kappa / 2.0) * u2) * math.exp(-tS)
        midg = _integrate(spec, +1, LAM_SWITCH, lam_max, (w0, dw0), tol)
        gg = _tail_coeffs(spec, "grow")
        # match the tail amplitude at lam_max
        wM, dwM = midg(lam_max)
        qM, _, _ = _eval_tail(spec, gg, +1.0, lam_max)
        amp = wM / complex(qM).real
        gg = [amp * x for x in gg]
        q_hat = Quasimode(spec, "generic", frob, (0.0, 1.0), midg,
                          (LAM_SWITCH, lam_max), +1, gg, +1.0)
        return q_inf, q_hat
    # sigma < 0: oscillatory pair
    u1, du1 = frob.eval_rec(LAM_SWITCH)
    u2, du2 = frob.eval_sec(LAM_SWITCH)
    mid1 = _integrate(spec, 0, LAM_SWITCH, lam_max, (u1, du1), tol)
    mid2 = _integrate(spec, 0, LAM_SWITCH, lam_max, (u2, du2), tol)
    gp = _tail_coeffs(spec, "osc+")
    gm = _tail_coeffs(spec, "osc-")
    # least-squares phase/amplitude match on [lam_max/2, lam_max]
    win = np.linspace(lam_max / 2.0, lam_max, 25)
    rows, tgt_p, tgt_m = [], [], []
    for lam in win:
        a1, da1 = mid1(lam)
        a2, da2 = mid2(lam)
        qp_, dqp_, sp_ = _eval_tail(spec, gp, +1.0j, lam)
        qm_, dqm_, sm_ = _eval_tail(spec, gm, -1.0j, lam)
        ep, em = cmath.exp(sp_), cmath.exp(sm_)
        rows.append([a1, a2])
        rows.append([da1, da2])
        tgt_p += [qp_ * ep, dqp_ * ep]
        tgt_m += [qm_ * em, dqm_ * em]
    A = np.array(rows, dtype=complex)
    cp, *_ = np.linalg.lstsq(A, np.array(tgt_p), rcond=None)
    cm, *_ = np.linalg.lstsq(A, np.array(tgt_m), rcond=None)

    def combo(c):
        def mid(lam):
            a1, da1 = mid1(lam)
            a2, da2 = mid2(lam)
            return c[0] * a1 + c[1] * a2, c[0] * da1 + c[1] * da2
        return mid

    q_m = Quasimode(spec, "oscillatory-", frob, (cm[0], cm[1]), combo(cm),
                    (LAM_SWITCH, lam_max), 0, gm, -1.0j)
    q_p = Quasimode(spec, "oscillatory+", frob, (cp[0], cp[1]), combo(cp),
                    (LAM_SWITCH, lam_max), 0, gp, +1.0j)
    for qq in (q_m, q_p):
        _drift_check(qq, spec, tol)
    return q_m, q_p


def _drift_check(q, spec, tol):
    """Relative agreement between mid solution and tail series on the
    matching window."""
    lam_max = spec.lam_max
    drift = 0.0
    for lam in (0.9 * lam_max, 0.97 * lam_max):
        v, dv = q._mid(lam)
        qt, qpt, st = _eval_tail(spec, q._g, q._phase, lam)
        if q._ssign == 0:
            vt = qt * cmath.exp(st)     # mid carries the full (bounded) value
        else:
            vt = qt                      # mid is the scaled amplitude
        drift = max(drift, abs(v - vt) / max(abs(vt), 1e-300))
    if drift > 100 * tol:
        raise RuntimeError("large-lam matching drift %g" % drift)


def recessive_mode(spec, tol=1e-10):
    """The recessive solution, normalized by lam^{-1/2-alpha} Q -> 1 at 0."""
    frob = frobenius_basis(spec)
    lam_max = spec.lam_max
    u1, du1 = frob.eval_rec(LAM_SWITCH)
    if spec.sigma > 0:
        tS = spec.phase_t(LAM_SWITCH)
        w0 = u1 * math.exp(-tS)
        dw0 = (du1 - LAM_SWITCH ** (spec.kappa / 2.0) * u1) * math.exp(-tS)
        mid = _integrate(spec, +1, LAM_SWITCH, lam_max, (w0, dw0), tol)
        gg = _tail_coeffs(spec, "grow")
        wM, _ = mid(lam_max)
        qM, _, _ = _eval_tail(spec, gg, +1.0, lam_max)
        gg = [w for w in gg]
        gg = [wM / complex(qM).real * x for x in gg]
        return Quasimode(spec, "recessive", frob, (1.0, 0.0), mid,
                         (LAM_SWITCH, lam_max), +1, gg, +1.0)
    mid = _integrate(spec, 0, LAM_SWITCH, lam_max, (u1, du1), tol)
    # represent beyond lam_max by matching onto the oscillatory pair
    gp = _tail_coeffs(spec, "osc+")
    gm = _tail_coeffs(spec, "osc-")
    win = np.linspace(lam_max / 2.0, lam_max, 12)
    A, b = [], []
    for lam in win:
        qp_, dqp_, sp_ = _eval_tail(spec, gp, +1.0j, lam)
        qm_, dqm_, sm_ = _eval_tail(spec, gm, -1.0j, lam)
        v, dv = mid(lam)
        A.append([qp_ * cmath.exp(sp_), qm_ * cmath.exp(sm_)])
        A.append([dqp_ * cmath.exp(sp_), dqm_ * cmath.exp(sm_)])
        b += [v, dv]
    (ap, am), *_ = np.linalg.lstsq(np.array(A, dtype=complex),
                                   np.array(b, dtype=complex), rcond=None)

    # tail evaluator: a+ e^{it} branch + a- e^{-it} branch, folded into a
    # phase-free representation (s = 0, bounded amplitude)
    def tail_eval(lam):
        qp_, dqp_, sp_ = _eval_tail(spec, gp, +1.0j, lam)
        qm_, dqm_, sm_ = _eval_tail(spec, gm, -1.0j, lam)
        return (ap * qp_ * cmath.exp(sp_) + am * qm_ * cmath.exp(sm_),
                ap * dqp_ * cmath.exp(sp_) + am * dqm_ * cmath.exp(sm_))

    q = Quasimode(spec, "recessive", frob, (1.0, 0.0), mid,
                  (LAM_SWITCH, lam_max), 0, None, None)
    q._osc_tail = tail_eval
    # widen mid region indefinitely via tail_eval
    orig = q.eval_log

    def eval_log(lam):
        lam = float(lam)
        if lam > lam_max:
            v, dv = tail_eval(lam)
            return v, dv, 0.0
        return orig(lam)

    q.eval_log = eval_log
    return q


def wronskian(q1, q2, lam=1.0):
    """Q1 Q2' - Q1' Q2 evaluated at lam (constant in lam)."""
    a, ap, s1 = q1.eval_log(lam)
    b, bp, s2 = q2.eval_log(lam)
    s = s1 + s2
    e = cmath.exp(s) if (isinstance(s, complex) and s.imag != 0) else math.exp(
        s.real if isinstance(s, complex) else s)
    w = (a * bp - ap * b) * e
    if abs(complex(w).imag) < 1e-12 * abs(complex(w)):
        return complex(w).real
    return w


# ---------------------------------------------------------------------------
# Green operator and corrected normal solve
# ---------------------------------------------------------------------------
def _quad_c(f, a, b, **kw):
    val, _ = quad(f, a, b, complex_func=True, limit=200, **kw)
    return val


def green_apply(q1, q2, F, lam, tol=1e-10):
    """v(lam) with N v = F via the split kernel

        K(lam, lam') = W^{-1} { Q1(lam) Q2(lam'),  lam > lam'
                              { Q2(lam) Q1(lam'),  lam < lam'

    (for sigma > 0, q1 must be the decaying mode).  The upper tail integral
    is evaluated in the variable rho = lam'^{-(kappa+2)/2} and truncated when
    the integrand falls below 1e-3 * tol * |accumulated value|.
    """
    W = wronskian(q1, q2, max(1.0, lam))
    if abs(W) < tol:
        raise ValueError("quasimode basis is numerically dependent")
    lam = float(lam)
    n = q1.spec.kappa + 2
    a_l, _, s1_l = q1.eval_log(lam)
    b_l, _, s2_l = q2.eval_log(lam)

    def low_ig(lp):
        b, bp, s2 = q2.eval_log(lp)
        return a_l * b * F(lp) * cmath.exp(s1_l + s2)

    low = _quad_c(low_ig, 0.0, lam, epsabs=tol * 1e-2, epsrel=tol)

    def up_ig(lp):
        a, ap, s1 = q1.eval_log(lp)
        return a * b_l * F(lp) * cmath.exp(s1 + s2_l)

    lam_c = max(lam, q1.spec.lam_max)
    up1 = _quad_c(up_ig, lam, lam_c, epsabs=tol * 1e-2, epsrel=tol)
    # tail in rho (smooth there by the large-argument law)
    rho_c = lam_c ** (-n / 2.0)

    def tail_ig(rho):
        if rho <= 0.0:
            return 0.0
        lp = rho ** (-2.0 / n)
        jac = (2.0 / n) * lp / rho
        return up_ig(lp) * jac

    scale = abs(low) + abs(up1)
    up2 = _quad_c(tail_ig, 0.0, rho_c,
                  epsabs=max(1e-3 * tol * scale, 1e-300), epsrel=tol)
    out = (low + up1 + up2) / W
    if abs(out.imag) < 1e-12 * max(abs(out), 1.0):
        return out.real
    return out


def _bump(lam, a, b):
    """Smooth bump supported on [a, b]."""
    if lam <= a or lam >= b:
        return 0.0
    y = (lam - a) / (b - a)
    return math.exp(-1.0 / (y * (1.0 - y))) * math.e ** 4


def normal_solve_corrected(q, partner, f, g, lambda0, lambda1, Lam, tol=1e-9):
    """Solve N v = F + R with F = f Q + g Q', f, g supported in
    (lambda1, inf), by adding a compact correction R supported in
    [lambda1, Lam] chosen so that both moment integrals of F + R against the
    basis vanish; then v = beta Q + gamma Q' with beta, gamma vanishing for
    lam < lambda0.

    Returns (beta, gamma, R, v): callables beta(lam), gamma(lam), R(lam),
    v(lam).
    """
    if not (lambda0 < lambda1 < Lam):
        raise ValueError("need lambda0 < lambda1 < Lambda")
    spec = q.spec

    def F(lam):
        if lam <= lambda1:
            return 0.0
        Q, Qp = q.eval(lam)
        return f(lam) * Q + g(lam) * Qp

    # two bump directions inside [lambda1, Lam]
    mid = 0.5 * (lambda1 + Lam)
    B1 = lambda lam: _bump(lam, lambda1, mid)
    B2 = lambda lam: _bump(lam, mid, Lam)

    def moment_bump(qq, func, lo, hi):
        def ig(lp):
            a, ap, s = qq.eval_log(lp)
            return a * func(lp) * cmath.exp(s)
        return _quad_c(ig, lo, hi, epsabs=tol * 1e-2, epsrel=tol)

    def moment_F(qq, lo, hi):
        # moment of F = f Q + g Q' against qq, with the exponential factors
        # of both modes paired before exponentiation (overflow-safe)
        def ig(lp):
            aq, aqp, sq = q.eval_log(lp)
            b, bp, sb = qq.eval_log(lp)
            return b * (f(lp) * aq + g(lp) * aqp) * cmath.exp(sq + sb)
        return _quad_c(ig, lo, hi, epsabs=tol * 1e-2, epsrel=tol)

    lam_hi = max(Lam, spec.lam_max) * 2.0
    M = np.array([[moment_bump(q, B1, lambda1, mid), moment_bump(q, B2, mid, Lam)],
                  [moment_bump(partner, B1, lambda1, mid),
                   moment_bump(partner, B2, mid, Lam)]])
    rhs = -np.array([moment_F(q, lambda1, lam_hi),
                     moment_F(partner, lambda1, lam_hi)])
    try:
        c = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("compact correction system is singular") from exc

    def R(lam):
        return c[0] * B1(lam) + c[1] * B2(lam)

    def FR(lam):
        return F(lam) + R(lam)

    def v(lam):
        if lam < lambda0:
            return 0.0
        return green_apply(q, partner, FR, lam, tol=tol)

    def beta(lam):
        if lam < lambda0:
            return 0.0
        Q, Qp = q.eval(lam)
        return v(lam) * Q / (abs(Q) ** 2 + abs(Qp) ** 2)

    def gamma(lam):
        if lam < lambda0:
            return 0.0
        Q, Qp = q.eval(lam)
        return v(lam) * Qp / (abs(Q) ** 2 + abs(Qp) ** 2)

    return beta, gamma, R, v
