"""Exact index-set algebra for polyhomogeneous expansions.

An index set is a set of points (j, k) with j an exact rational
(``fractions.Fraction``), k a nonnegative integer, truncated at ``j <= cap``
and closed under the two laws

    (j, k) in S  =>  (j + 1, k) in S   (whenever j + 1 <= cap),
    (j, k) in S  =>  (j, k - 1) in S   (whenever k >= 1).

A term (j, k) stands for a contribution x^j log^k(1/x) in an expansion at
x = 0.  Because of upward closure in j, the set decomposes into classes
indexed by (k, j mod 1), each an arithmetic progression {m, m+1, ...}; the
implementation stores only the minima m, which keeps every operation exact
and O(#classes).

The operations ``derive`` / ``integrate`` / ``integrate_c`` track how the
expansion type transforms under d/dx and under integration from x (with and
without a free constant term).  ``lo_recursion`` produces the index sets of
the transition-point expansion coefficients (beta_k, gamma_k in their
x^{k(kappa+2)}-weighted form) and ``closed_form_E`` the closed-form envelope
containing them.
"""
from fractions import Fraction


def _frac(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float) and x == int(x):
        return Fraction(int(x))
    return Fraction(x)


def _residue(j):
    return j - (j.numerator // j.denominator)


class IndexSet:
    """A capped set of exact (j, k) points, closed under the index-set laws."""

    def __init__(self, points=(), cap=40, _classes=None):
        self.cap = _frac(cap)
        if _classes is not None:
            self.classes = self._normalize(_classes)
        else:
            cls = {}
            for j, k in points:
                j = _frac(j)
                k = int(k)
                if k < 0:
                    raise ValueError("log power k must be >= 0")
                key = (k, _residue(j))
                if key not in cls or j < cls[key]:
                    cls[key] = j
            self.classes = self._normalize(cls)

    def _normalize(self, cls):
        """Apply downward log-closure and the cap; minimize minima."""
        out = {}
        if not cls:
            return out
        kmax = max(k for k, _ in cls)
        for k in range(kmax, -1, -1):
            for (kk, r), m in list(cls.items()):
                if kk != k:
                    continue
                for k2 in range(k, -1, -1):
                    key = (k2, r)
                    if key not in out or m < out[key]:
                        out[key] = m
        return {key: m for key, m in out.items() if m <= self.cap}

    # -- construction -----------------------------------------------------
    @classmethod
    def generated(cls, gens, cap=40):
        return cls(gens, cap=cap)

    @classmethod
    def smooth(cls, cap=40):
        """The index set of smooth functions: (0,0) generated."""
        return cls([(Fraction(0), 0)], cap=cap)

    # -- basic protocol ---------------------------------------------------
    def __contains__(self, pt):
        j, k = _frac(pt[0]), int(pt[1])
        if j > self.cap:
            return False
        m = self.classes.get((k, _residue(j)))
        return m is not None and j >= m

    def __iter__(self):
        return iter(self.sorted_points())

    def __bool__(self):
        return bool(self.classes)

    def __eq__(self, other):
        return isinstance(other, IndexSet) and self.classes == other.classes \
            and self.cap == other.cap

    def __hash__(self):
        return hash((frozenset(self.classes.items()), self.cap))

    def issubset(self, other):
        for (k, r), m in self.classes.items():
            mo = other.classes.get((k, r))
            if mo is None or mo > m:
                return False
        return True

    def __le__(self, other):
        return self.issubset(other)

    def sorted_points(self):
        pts = []
        for (k, r), m in self.classes.items():
            j = m
            while j <= self.cap:
                pts.append((j, k))
                j += 1
        return sorted(pts, key=lambda p: (p[0], p[1]))

    def min_exponent(self):
        """Smallest j present (None if empty)."""
        return min(self.classes.values(), default=None)

    def generators(self):
        """A minimal generating set under the closure laws."""
        gens = []
        for (k, r), m in sorted(self.classes.items()):
            mu = self.classes.get((k + 1, r))
            if mu is not None and mu <= m:
                continue  # implied by downward closure from level k+1
            gens.append((m, k))
        return sorted(gens, key=lambda p: (p[0], p[1]))

    def __repr__(self):
        body = " u ".join("(%s,%d)" % (j, k) for j, k in self.generators())
        return "IndexSet[%s; cap=%s]" % (body, self.cap)

    # -- algebra ----------------------------------------------------------
    def union(self, other):
        cls = dict(self.classes)
        for key, m in other.classes.items():
            if key not in cls or m < cls[key]:
                cls[key] = m
        return IndexSet(cap=self.cap, _classes=cls)

    def shift(self, a):
        """S + a (translate all j by the exact rational a)."""
        a = _frac(a)
        cls = {}
        for (k, r), m in self.classes.items():
            cls[(k, _residue(r + a))] = m + a
        return IndexSet(cap=self.cap, _classes=cls)

    def derive(self):
        """Index set of dF/dx for F of this type."""
        pts = []
        for (k, r), m in self.classes.items():
            # {(j-1, k): j != 0}: smallest admissible j in the class is m,
            # unless m == 0 in which case it is 1.
            pts.append(((m - 1) if m != 0 else Fraction(0), k))
            if k >= 1:
                pts.append((m - 1, k - 1))
        return IndexSet(pts, cap=self.cap)

    def integrate(self):
        """Index set of C + int_x^X F, with the constant chosen to kill the
        constant term (the '+' operation)."""
        pts = []
        for (k, r), m in self.classes.items():
            pts.append((m + 1, k))
            if r == 0 and m <= -1:
                pts.append((Fraction(0), k + 1))
        return IndexSet(pts, cap=self.cap)

    def integrate_c(self):
        """Index set of int_x^X F with a generic constant term ('+c')."""
        return self.integrate().union(IndexSet([(Fraction(0), 0)], cap=self.cap))

    def filter_logs(self, kmax):
        """Subset with log power k <= kmax (still a closed index set)."""
        cls = {key: m for key, m in self.classes.items() if key[0] <= kmax}
        return IndexSet(cap=self.cap, _classes=cls)


def _E0(cap):
    return IndexSet([(Fraction(0), 0)], cap=cap)


def _F0(kappa, cap):
    # F0 = (E0 - 1 - kappa/2)_+ - kappa/2
    hk = Fraction(kappa, 2)
    return _E0(cap).shift(-1 - hk).integrate().shift(-hk)


def lo_recursion(kappa, k_max, cap=40):
    """Index sets (E_k, F_k) of the weighted expansion coefficients
    x^{k(kappa+2)} beta_k and x^{k(kappa+2)} gamma_k.

    Parameters
    ----------
    kappa : int
        Transition-point order, kappa >= -1.
    k_max : int
        Largest coefficient order computed (<= 20).
    cap : exact rational
        Truncation level for exponents.

    Returns
    -------
    (E_list, F_list) : lists of IndexSet, length k_max + 1.
    """
    kappa = int(kappa)
    if kappa < -1:
        raise ValueError("kappa must be an integer >= -1")
    if k_max > 20:
        raise ValueError("k_max must be <= 20")
    cap = _frac(cap)
    n = kappa + 2
    hk = Fraction(kappa, 2)
    E = [_E0(cap)]
    F = [_F0(kappa, cap)]
    for k in range(1, k_max + 1):
        Fp_prev = F[k - 1].shift(-(k - 1) * n)
        Ek = Fp_prev.derive().derive().union(Fp_prev.shift(-1)) \
            .integrate_c().shift(k * n)
        if k >= 2:
            Ek = Ek.union(E[k - 1])
        E.append(Ek)
        Ep = Ek.shift(-k * n)
        core = Ep.derive().derive() \
            .union(Ep.shift(-1)) \
            .union(_E0(cap).shift(-1 - k * n)) \
            .union(Fp_prev.shift(-3))
        Fk = core.shift(-hk).integrate().shift(-hk + k * n).union(F[k - 1])
        F.append(Fk)
    return E, F


def _closed_form_gens(kappa, cap):
    kappa = int(kappa)
    if kappa < -1:
        raise ValueError("kappa must be an integer >= -1")
    n = kappa + 2
    # enumerate generators past the cap so that the shifted envelope
    # F = E - kappa - 1 keeps all of its sub-cap classes; out-of-cap points
    # are dropped by the IndexSet constructor.
    reach = cap + kappa + 1
    gens = [(Fraction(1), 0)]
    if kappa >= 0 and kappa % 2 == 0:
        hk = Fraction(kappa, 2)
        gens.append((hk + 1, 1))
        j = 1
        while Fraction(n * j) <= reach:
            gens.append((Fraction(n * j), 2 * j))
            gens.append((Fraction(n * j) + hk + 1, 2 * j + 1))
            j += 1
    else:
        j = 1
        while Fraction(n * j) <= reach:
            gens.append((Fraction(n * j), j))
            j += 1
    return gens


def closed_form_E(kappa, cap=40):
    """Closed-form envelope index set E (the F envelope is E - kappa - 1)."""
    cap = _frac(cap)
    return IndexSet(_closed_form_gens(kappa, cap), cap=cap)


def closed_form_F(kappa, cap=40):
    cap = _frac(cap)
    gens = [(j - kappa - 1, k) for j, k in _closed_form_gens(kappa, cap)]
    return IndexSet(gens, cap=cap)


def envelope(kappa, K, cap=40):
    """Truncated closed-form envelopes (Ebar_K, Fbar_K) that contain the
    recursively computed E_K, F_K."""
    E = closed_form_E(kappa, cap=cap)
    Fset = closed_form_F(kappa, cap=cap)
    if kappa >= 0 and kappa % 2 == 0:
        return E.filter_logs(2 * K), Fset.filter_logs(2 * K + 1)
    return E.filter_logs(K), Fset.filter_logs(K)


def e1_table(kappa, cap=40):
    """Closed-form first beta index set E_1, by case on kappa."""
    kappa = int(kappa)
    if kappa == -1:
        gens = [(1, 0)]
    elif kappa == 0:
        gens = [(1, 0), (2, 2)]
    elif kappa % 2 == 1:
        gens = [(1, 0), (kappa + 2, 1)]
    else:
        gens = [(1, 0), (Fraction(kappa, 2) + 1, 1), (kappa + 2, 2)]
    return IndexSet(gens, cap=cap)


def format_points(S):
    """Sorted '(j,k)' lines for CLI output."""
    return ["(%s,%d)" % (j, k) for j, k in S.sorted_points()]
