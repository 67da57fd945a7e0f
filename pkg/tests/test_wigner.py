"""Tests for exact Wigner 3j/6j symbols, Clebsch-Gordan and Gaunt values.

Pinned values come from the classic tables for small angular momenta; the
property tests check the identities that make these symbols what they are:
orthogonality, permutation symmetry with its phase, unitarity of the
Clebsch-Gordan transform, the uniform 6j bound, and agreement of every
memoized lookup with the raw summation path.
"""

import math
import random
from decimal import Decimal
from fractions import Fraction
from math import factorial

import numpy as np
import pytest

from sphbispec.wigner import (
    GauntValue,
    SignedSqrtRational,
    cg_chain_coefficient,
    cg_chain_coefficient_exact,
    clebsch_gordan,
    gaunt,
    wigner3j,
    wigner6j,
)


def ssr(sign, num, den):
    return SignedSqrtRational.from_sign_and_square(sign, Fraction(num, den))


# --------------------------------------------------------------------------
# SignedSqrtRational
# --------------------------------------------------------------------------


def test_signed_sqrt_rational_basic_algebra():
    a = ssr(1, 2, 15)
    b = ssr(-1, 3, 10)
    assert a.squared() == Fraction(2, 15)
    assert b.signed_square() == Fraction(-3, 10)
    assert (a * b).signed_square() == Fraction(-1, 25)
    assert (-a).sign == -1
    assert (a * SignedSqrtRational.zero()).is_zero()
    assert a.scale_sqrt(Fraction(15, 2)).signed_square() == 1


def test_signed_sqrt_rational_reduces_to_lowest_terms():
    v = SignedSqrtRational.from_signed_square(Fraction(8, 50))
    assert (v.radicand_num, v.radicand_den) == (4, 25)
    assert v.as_exact_fraction() == Fraction(2, 5)
    with pytest.raises(ValueError):
        ssr(1, 2, 15).as_exact_fraction()  # sqrt(2/15) is irrational


def test_signed_sqrt_rational_float_and_decimal():
    v = ssr(-1, 2, 15)
    assert v.to_float() == pytest.approx(-math.sqrt(2 / 15), rel=1e-15)
    d = v.to_decimal(30)
    assert str(d).startswith("-0.36514837167011074230464652186")
    assert SignedSqrtRational.zero().to_decimal(10) == Decimal(0)


def test_exact_format_round_trip_on_random_values():
    rng = random.Random(20260815)
    for _ in range(100):
        sign = rng.choice([-1, 0, 1])
        num = rng.randrange(0, 10**6) if sign else 0
        den = rng.randrange(1, 10**6)
        v = SignedSqrtRational.from_sign_and_square(
            sign if num else 0, Fraction(num if sign else 0, den)
        )
        assert SignedSqrtRational.parse_exact(v.format_exact()) == v
    assert SignedSqrtRational.parse_exact("+sqrt(2/15)") == ssr(1, 2, 15)
    assert SignedSqrtRational.parse_exact("0").is_zero()
    with pytest.raises(ValueError):
        SignedSqrtRational.parse_exact("sqrt(2/15)")  # sign is mandatory


# --------------------------------------------------------------------------
# 3j values and selection rules
# --------------------------------------------------------------------------


def test_threej_pinned_table_values():
    assert wigner3j(1, 1, 2, 0, 0, 0) == ssr(1, 2, 15)
    assert wigner3j(1, 1, 2, 1, -1, 0) == ssr(1, 1, 30)
    assert wigner3j(2, 2, 2, 0, 0, 0) == ssr(-1, 2, 35)
    assert wigner3j(1, 1, 1, 1, 0, -1) == ssr(-1, 1, 6)
    assert wigner3j(3, 2, 1, 0, 0, 0) == ssr(-1, 3, 35)
    assert wigner3j(2, 1, 1, 0, 0, 0) == ssr(1, 2, 15)
    assert wigner3j(4, 4, 4, 0, 0, 0) == ssr(1, 18, 1001)
    assert wigner3j(2, 2, 2, 1, -1, 0) == ssr(1, 1, 70)
    assert wigner3j(3, 3, 2, 1, -1, 0) == ssr(-1, 3, 140)
    # stretched triple: l3 = l1 + l2 with extreme m
    assert wigner3j(2, 2, 4, 2, 2, -4) == ssr(1, 1, 9)


def test_threej_selection_rule_zeros():
    assert wigner3j(1, 1, 3, 0, 0, 0).is_zero()          # triangle fails
    assert wigner3j(1, 1, 1, 0, 0, 0).is_zero()          # odd sum, all m zero
    assert wigner3j(1, 1, 2, 1, 0, 0).is_zero()          # m-sum nonzero
    assert wigner3j(5, 3, 1, 0, 0, 0).is_zero()          # triangle fails
    assert not wigner3j(1, 1, 1, 1, 0, -1).is_zero()     # odd sum, m nonzero


def test_threej_rejects_caller_errors():
    with pytest.raises(ValueError):
        wigner3j(1, 1, 2, 0, 0, 9)   # |m3| > l3
    with pytest.raises(ValueError):
        wigner3j(-1, 1, 2, 0, 0, 0)  # negative l
    with pytest.raises(ValueError):
        wigner3j(1.5, 1, 2, 0, 0, 0)  # non-integer


def test_threej_all_zero_m_closed_form():
    # (l1 l2 l3; 0 0 0) has the classic closed form in terms of g = S/2:
    # (-1)^g sqrt(tri) g! / ((g-l1)!(g-l2)!(g-l3)!), an independent oracle.
    for l1 in range(0, 9):
        for l2 in range(0, 9):
            for l3 in range(abs(l1 - l2), l1 + l2 + 1):
                w = wigner3j(l1, l2, l3, 0, 0, 0)
                s = l1 + l2 + l3
                if s % 2:
                    assert w.is_zero()
                    continue
                g = s // 2
                tri = Fraction(
                    factorial(l1 + l2 - l3)
                    * factorial(l1 - l2 + l3)
                    * factorial(-l1 + l2 + l3),
                    factorial(s + 1),
                )
                ratio = Fraction(
                    factorial(g),
                    factorial(g - l1) * factorial(g - l2) * factorial(g - l3),
                )
                assert w.squared() == tri * ratio**2
                if not w.is_zero():
                    assert w.sign == (-1) ** g


def test_threej_stretched_closed_form():
    # l3 = l1 + l2 admits a single-term closed form; exercised over all m.
    for l1 in range(0, 5):
        for l2 in range(0, 5):
            l3 = l1 + l2
            for m1 in range(-l1, l1 + 1):
                for m2 in range(-l2, l2 + 1):
                    w = wigner3j(l1, l2, l3, m1, m2, -m1 - m2)
                    sq = Fraction(
                        factorial(2 * l1)
                        * factorial(2 * l2)
                        * factorial(l3 + m1 + m2)
                        * factorial(l3 - m1 - m2),
                        factorial(2 * l3 + 1)
                        * factorial(l1 + m1)
                        * factorial(l1 - m1)
                        * factorial(l2 + m2)
                        * factorial(l2 - m2),
                    )
                    assert w.squared() == sq
                    assert w.sign == (-1) ** (l1 - l2 + m1 + m2)


def test_threej_orthogonality_exact_small_multipoles():
    # sum over m1 of (2 l3 + 1) * 3j^2 at fixed m3 is exactly 1.
    for l1, l2, l3 in [(1, 1, 2), (2, 3, 4), (3, 3, 3), (2, 2, 2), (1, 4, 5), (4, 5, 6)]:
        for m3 in range(-l3, l3 + 1):
            total = Fraction(0)
            for m1 in range(-l1, l1 + 1):
                m2 = -m3 - m1
                if abs(m2) > l2:
                    continue
                total += (2 * l3 + 1) * wigner3j(l1, l2, l3, m1, m2, m3).squared()
            assert total == 1


def test_threej_permutation_symmetry_phases():
    rng = random.Random(7)
    for _ in range(200):
        l1, l2, l3 = rng.randrange(0, 7), rng.randrange(0, 7), rng.randrange(0, 7)
        if not abs(l1 - l2) <= l3 <= l1 + l2:
            continue
        m1 = rng.randrange(-l1, l1 + 1)
        m2 = rng.randrange(-l2, l2 + 1)
        m3 = -m1 - m2
        if abs(m3) > l3:
            continue
        base = wigner3j(l1, l2, l3, m1, m2, m3)
        phase = (-1) ** (l1 + l2 + l3)
        # even (cyclic) permutations leave the symbol unchanged
        assert wigner3j(l2, l3, l1, m2, m3, m1) == base
        assert wigner3j(l3, l1, l2, m3, m1, m2) == base
        # odd permutations and m-negation pick up (-1)^(l1+l2+l3)
        swapped = wigner3j(l2, l1, l3, m2, m1, m3)
        negated = wigner3j(l1, l2, l3, -m1, -m2, -m3)
        for other in (swapped, negated):
            assert other.squared() == base.squared()
            assert other.sign == phase * base.sign


def test_threej_cache_matches_raw_path():
    rng = random.Random(123)
    for _ in range(300):
        l1, l2, l3 = (rng.randrange(0, 9) for _ in range(3))
        m1 = rng.randrange(-l1, l1 + 1) if l1 else 0
        m2 = rng.randrange(-l2, l2 + 1) if l2 else 0
        m3 = -m1 - m2
        if abs(m3) > l3:
            continue
        assert wigner3j(l1, l2, l3, m1, m2, m3) == wigner3j(
            l1, l2, l3, m1, m2, m3, use_cache=False
        )


# --------------------------------------------------------------------------
# Clebsch-Gordan
# --------------------------------------------------------------------------


def test_clebsch_gordan_pinned_values():
    assert clebsch_gordan(1, 1, 1, 0, 1, 1) == ssr(1, 1, 2)
    assert clebsch_gordan(1, 0, 1, 0, 2, 0) == ssr(1, 2, 3)
    assert clebsch_gordan(1, 1, 1, -1, 0, 0) == ssr(1, 1, 3)
    assert clebsch_gordan(1, 0, 1, 0, 0, 0) == ssr(-1, 1, 3)
    assert clebsch_gordan(2, 2, 2, -2, 0, 0) == ssr(1, 1, 5)
    assert clebsch_gordan(1, 1, 1, -1, 1, 0) == ssr(1, 1, 2)
    assert clebsch_gordan(1, 0, 1, 0, 1, 0).is_zero()


def test_clebsch_gordan_zero_rules_and_stretched_state():
    assert clebsch_gordan(1, 1, 1, 0, 2, 0).is_zero()   # m != m1 + m2
    assert clebsch_gordan(1, 1, 1, 0, 3, 1).is_zero()   # triangle fails
    for l1 in range(0, 5):
        for l2 in range(0, 5):
            v = clebsch_gordan(l1, l1, l2, l2, l1 + l2, l1 + l2)
            assert v.signed_square() == 1
    with pytest.raises(ValueError):
        clebsch_gordan(1, 2, 1, 0, 2, 2)


def test_clebsch_gordan_unitarity_exact():
    # row sums: for fixed (m1, m2), sum over (l, m) of C^2 = 1
    for l1 in range(0, 5):
        for l2 in range(0, 5):
            for m1 in range(-l1, l1 + 1):
                for m2 in range(-l2, l2 + 1):
                    total = Fraction(0)
                    for l in range(abs(l1 - l2), l1 + l2 + 1):
                        if abs(m1 + m2) <= l:
                            total += clebsch_gordan(l1, m1, l2, m2, l, m1 + m2).squared()
                    assert total == 1
    # column sums: for fixed (l, m), sum over (m1, m2) of C^2 = 1
    for l1 in range(0, 5):
        for l2 in range(0, 5):
            for l in range(abs(l1 - l2), l1 + l2 + 1):
                for m in range(-l, l + 1):
                    total = Fraction(0)
                    for m1 in range(-l1, l1 + 1):
                        m2 = m - m1
                        if abs(m2) <= l2:
                            total += clebsch_gordan(l1, m1, l2, m2, l, m).squared()
                    assert total == 1


# --------------------------------------------------------------------------
# 6j symbols
# --------------------------------------------------------------------------


def test_sixj_pinned_values():
    assert wigner6j(1, 1, 1, 1, 1, 1).as_exact_fraction() == Fraction(1, 6)
    assert wigner6j(1, 1, 2, 1, 1, 2).as_exact_fraction() == Fraction(1, 30)
    assert wigner6j(2, 2, 2, 2, 2, 2).as_exact_fraction() == Fraction(-3, 70)
    assert wigner6j(1, 2, 3, 1, 2, 3).as_exact_fraction() == Fraction(1, 105)
    assert wigner6j(2, 1, 1, 2, 1, 1).as_exact_fraction() == Fraction(1, 30)


def test_sixj_triad_zeros_and_validation():
    assert wigner6j(1, 1, 3, 1, 1, 1).is_zero()  # (a,b,e) fails
    assert wigner6j(0, 2, 2, 3, 5, 4).is_zero()  # (a,d,f): (0,5,4) fails
    with pytest.raises(ValueError):
        wigner6j(1, 1, -1, 1, 1, 1)
    with pytest.raises(ValueError):
        wigner6j(1, 1, 1.5, 1, 1, 1)


def test_sixj_diagonal_stretched_closed_form():
    # {l1 l2 l1+l2; l1 l2 l1+l2} = (2l1)! (2l2)! / (2l1+2l2+1)!
    for l1 in range(0, 6):
        for l2 in range(0, 6):
            e = l1 + l2
            expected = Fraction(
                factorial(2 * l1) * factorial(2 * l2), factorial(2 * l1 + 2 * l2 + 1)
            )
            assert wigner6j(l1, l2, e, l1, l2, e).as_exact_fraction() == expected


def test_sixj_orthogonality_exact():
    # sum over e of (2e+1)(2f+1) {a b e; c d f}^2 = 1 when (a,d,f),(b,c,f) couple
    for a, b, c, d, f in [(1, 2, 2, 1, 1), (2, 2, 2, 2, 2), (3, 2, 1, 2, 2), (4, 3, 2, 3, 2)]:
        total = Fraction(0)
        for e in range(0, a + b + 1):
            total += (2 * e + 1) * (2 * f + 1) * wigner6j(a, b, e, c, d, f).squared()
        assert total == 1


def test_sixj_uniform_bound_small_sweep():
    # |{a b e; c d f}| <= min over opposite pairs of 1/sqrt((2x+1)(2y+1))
    for a in range(5):
        for b in range(5):
            for e in range(5):
                for c in range(5):
                    for d in range(5):
                        for f in range(5):
                            sq = wigner6j(a, b, e, c, d, f).squared()
                            bound = min(
                                Fraction(1, (2 * a + 1) * (2 * c + 1)),
                                Fraction(1, (2 * b + 1) * (2 * d + 1)),
                                Fraction(1, (2 * e + 1) * (2 * f + 1)),
                            )
                            assert sq <= bound


def test_sixj_cache_matches_raw_path():
    rng = random.Random(99)
    for _ in range(200):
        args = tuple(rng.randrange(0, 7) for _ in range(6))
        assert wigner6j(*args) == wigner6j(*args, use_cache=False)


def test_sixj_column_permutation_invariance():
    rng = random.Random(5)
    for _ in range(100):
        a, b, e, c, d, f = (rng.randrange(0, 6) for _ in range(6))
        base = wigner6j(a, b, e, c, d, f)
        assert wigner6j(b, a, e, d, c, f) == base      # swap columns 1,2
        assert wigner6j(e, b, a, f, d, c) == base      # swap columns 1,3
        assert wigner6j(a, d, f, c, b, e) == base      # flip columns 2,3
        assert wigner6j(c, d, e, a, b, f) == base      # flip columns 1,2


# --------------------------------------------------------------------------
# Gaunt integrals
# --------------------------------------------------------------------------


def test_gaunt_values_and_zero_rules():
    g = gaunt(1, 1, 2, 0, 0, 0)
    assert isinstance(g, GauntValue)
    assert g.algebraic == ssr(1, 4, 5)
    assert g.inv_sqrt_4pi
    assert g.to_float() == pytest.approx(math.sqrt(4 / 5) / math.sqrt(4 * math.pi))
    assert gaunt(1, 1, 2, 1, 0, 0).algebraic.is_zero()   # m-sum nonzero
    assert gaunt(1, 1, 1, 1, 0, -1).algebraic.is_zero()  # odd l-sum
    assert gaunt(1, 1, 3, 0, 0, 0).algebraic.is_zero()   # triangle fails
    with pytest.raises(ValueError):
        gaunt(1, 1, 2, 0, 0, 5)


def _spherical_harmonic(l, m, theta, phi):
    import scipy.special

    if hasattr(scipy.special, "sph_harm_y"):
        return scipy.special.sph_harm_y(l, m, theta, phi)
    return scipy.special.sph_harm(m, l, phi, theta)


def test_gaunt_matches_spherical_harmonic_quadrature():
    # Gauss-Legendre in cos(theta) + uniform trapezoid in phi integrates
    # products of three spherical harmonics exactly (up to roundoff).
    nodes, weights = np.polynomial.legendre.leggauss(24)
    theta = np.arccos(nodes)[:, None]
    phi = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)[None, :]
    dphi = 2.0 * math.pi / 64
    for l1, l2, l3, m1, m2, m3 in [
        (1, 1, 2, 0, 0, 0),
        (2, 2, 2, 1, 1, -2),
        (1, 2, 3, 1, -1, 0),
        (2, 3, 5, 2, 1, -3),
        (1, 1, 2, 1, -1, 0),
    ]:
        integrand = (
            _spherical_harmonic(l1, m1, theta, phi)
            * _spherical_harmonic(l2, m2, theta, phi)
            * _spherical_harmonic(l3, m3, theta, phi)
        )
        numeric = float((weights @ integrand.real.sum(axis=1) * dphi))
        assert gaunt(l1, l2, l3, m1, m2, m3).to_float() == pytest.approx(
            numeric, abs=1e-12
        )


# --------------------------------------------------------------------------
# chained Clebsch-Gordan couplings
# --------------------------------------------------------------------------


def test_cg_chain_two_momenta_reduces_to_single_coefficient():
    for l1, m1, l2, m2, lam, mu in [
        (1, 1, 1, 0, 1, 1),
        (2, 1, 1, -1, 2, 0),
        (1, 0, 1, 0, 2, 0),
    ]:
        chained = cg_chain_coefficient_exact([l1, l2], [m1, m2], [lam], mu)
        assert chained == clebsch_gordan(l1, m1, l2, m2, lam, mu)


def test_cg_chain_three_momenta_matches_brute_composition():
    # coupling (1,1,1) -> lambda1 -> (1, mu): the chain equals the double sum
    l_list = [1, 1, 1]
    lambda_list = [1, 1]
    for m_list in [(1, 0, -1), (0, 0, 0), (1, -1, 0), (-1, 1, 0)]:
        mu = sum(m_list)
        chained = cg_chain_coefficient_exact(l_list, list(m_list), lambda_list, mu)
        direct = clebsch_gordan(1, m_list[0], 1, m_list[1], 1, m_list[0] + m_list[1])
        direct = direct * clebsch_gordan(
            1, m_list[0] + m_list[1], 1, m_list[2], 1, mu
        )
        assert chained == direct
    decimal_value = cg_chain_coefficient([1, 1, 1], [1, 0, -1], [1, 1], 0, digits=30)
    exact = cg_chain_coefficient_exact([1, 1, 1], [1, 0, -1], [1, 1], 0)
    assert decimal_value == exact.to_decimal(30)


def test_cg_chain_unitarity_and_infeasible_path():
    # fixed coupling path: sum over all m assignments of coefficient^2 = 1
    l_list = [1, 1, 2]
    lambda_list = [2, 2]
    mu = 1
    total = Fraction(0)
    for m1 in range(-1, 2):
        for m2 in range(-1, 2):
            m3 = mu - m1 - m2
            if abs(m3) > 2:
                continue
            total += cg_chain_coefficient_exact(l_list, [m1, m2, m3], lambda_list, mu).squared()
    assert total == 1
    with pytest.raises(ValueError):
        cg_chain_coefficient_exact([1, 1, 1], [0, 0, 0], [3, 1], 0)
