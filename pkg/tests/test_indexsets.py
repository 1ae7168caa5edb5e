from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from uwkb.indexsets import (IndexSet, closed_form_E, closed_form_F, e1_table,
                            envelope, format_points, lo_recursion)

points = st.lists(
    st.tuples(st.fractions(min_value=-3, max_value=8,
                           max_denominator=4),
              st.integers(0, 3)),
    min_size=0, max_size=5)


class TestIndexSetAlgebra:
    def test_membership_closure_upward(self):
        S = IndexSet([(Fraction(1, 2), 1)], cap=10)
        assert (Fraction(1, 2), 1) in S
        assert (Fraction(3, 2), 1) in S      # same residue class, larger j
        assert (Fraction(1, 2), 0) in S      # lower log power is implied
        assert (Fraction(0), 1) not in S

    def test_smooth_set(self):
        S = IndexSet.smooth(cap=5)
        assert (Fraction(0), 0) in S
        assert (Fraction(3), 0) in S
        assert (Fraction(1), 1) not in S

    @given(points)
    @settings(max_examples=100)
    def test_union_is_upper_bound(self, pts):
        A = IndexSet(pts, cap=10)
        B = IndexSet([(Fraction(1), 0)], cap=10)
        U = A.union(B)
        assert A.issubset(U) and B.issubset(U)

    @given(points, st.fractions(min_value=-2, max_value=2,
                                max_denominator=2))
    @settings(max_examples=100)
    def test_shift_roundtrip(self, pts, a):
        A = IndexSet(pts, cap=10)
        assert A.shift(a).shift(-a).classes == A.classes

    @given(points)
    @settings(max_examples=100)
    def test_generators_regenerate(self, pts):
        A = IndexSet(pts, cap=10)
        B = IndexSet(A.generators(), cap=10)
        assert A == B

    def test_subset_reflexive_and_ordering(self):
        A = IndexSet([(Fraction(1), 0)], cap=10)
        B = IndexSet([(Fraction(0), 0), (Fraction(1), 1)], cap=10)
        assert A.issubset(A)
        assert A <= A.union(B)
        assert not B.issubset(A)

    def test_derive_shifts_down(self):
        S = IndexSet([(Fraction(2), 0)], cap=10)
        assert (Fraction(1), 0) in S.derive()

    def test_derive_drops_log(self):
        # d/dx (log x) produces x^{-1} with one log less
        S = IndexSet([(Fraction(0), 1)], cap=10)
        D = S.derive()
        assert (Fraction(-1), 0) in D

    def test_integrate_raises_exponent(self):
        S = IndexSet([(Fraction(1), 0)], cap=10)
        assert (Fraction(2), 0) in S.integrate()
        assert (Fraction(1), 0) not in S.integrate()

    def test_integrate_minus_one_makes_log(self):
        S = IndexSet([(Fraction(-1), 0)], cap=10)
        assert (Fraction(0), 1) in S.integrate()

    def test_filter_logs(self):
        S = IndexSet([(Fraction(1), 0), (Fraction(2), 2)], cap=10)
        F = S.filter_logs(1)
        assert (Fraction(1), 0) in F
        assert (Fraction(2), 2) not in F


class TestRecursion:
    def test_e0_starts_smooth(self):
        for kap in (-1, 0, 1, 3):
            E, F = lo_recursion(kap, 1)
            assert (Fraction(0), 0) in E[0]

    def test_e1_matches_closed_table(self):
        for kap in (-1, 0, 1, 2, 3, 4, 5, 6):
            E, _ = lo_recursion(kap, 1)
            assert E[1].sorted_points() == e1_table(kap).sorted_points()

    def test_containment_in_closed_form(self):
        for kap in (-1, 0, 2, 3):
            E, F = lo_recursion(kap, 8)
            cE, cF = closed_form_E(kap), closed_form_F(kap)
            for k in range(1, 9):
                assert E[k].issubset(cE), (kap, k)
                assert F[k].issubset(cF), (kap, k)
            assert F[0].issubset(cF)

    def test_envelope_truncates_logs(self):
        Ebar, Fbar = envelope(2, 1)
        assert all(k <= 2 for _, k in Ebar.sorted_points())
        assert all(k <= 3 for _, k in Fbar.sorted_points())

    def test_closed_form_F_is_shifted_E(self):
        # agreement away from the truncation cap (shifts move classes
        # across the cap boundary, creating edge artifacts at j = cap)
        for kap in (0, 1, 2):
            E = closed_form_E(kap)
            F = closed_form_F(kap)
            shifted = {p for p in E.shift(-kap - 1).sorted_points()
                       if p[0] <= 30}
            direct = {p for p in F.sorted_points() if p[0] <= 30}
            assert shifted == direct


class TestFormatting:
    def test_format_points_deterministic(self):
        S = IndexSet([(Fraction(1, 2), 1), (Fraction(1), 0)], cap=3)
        out = format_points(S)
        assert out == format_points(S)
        assert all(isinstance(t, str) for t in out)

    def test_repr_shows_generators(self):
        S = IndexSet([(Fraction(2), 0)], cap=10)
        assert "2" in repr(S)
