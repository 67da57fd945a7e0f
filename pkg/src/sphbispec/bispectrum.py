"""Angle-averaged bispectrum estimators and their closed-form moments.

The sample bispectrum of a field couples three harmonic coefficients through
a Wigner 3j symbol; normalized by the power spectrum (known or estimated) it
becomes model-independent, and under Gaussianity every moment of the
normalized statistic reduces to combinatorial factors, 1/(2l+1) corrections
and one diagonal 6j symbol.  This module implements the estimators, the
exact fourth-order cumulant and moment formulas, the moment expansion and
recursion in the sample size 2l+1, and the Edgeworth-corrected CDF of the
standardized statistic.  Everything here is cross-checked against the
brute-force diagram oracle in :mod:`sphbispec.diagrams` by the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .fieldsim import AngularPowerSpectrum, HarmonicCoefficients, estimate_cl
from .wigner import wigner3j, wigner6j

__all__ = [
    "MultipoleTriple",
    "MomentPrediction",
    "EdgeworthCdf",
    "ThreeJPlan",
    "threej_plan",
    "sample_bispectrum",
    "normalized_bispectrum",
    "feasible_normalized_bispectrum",
    "delta_factor",
    "g_factor",
    "big_g_factor",
    "kappa4_closed_form",
    "fourth_moment_exact",
    "fourth_moment_exact_feasible",
    "moment_expansion",
    "moment_recursion",
    "edgeworth_cdf",
]


@dataclass(frozen=True, order=True)
class MultipoleTriple:
    """A sorted triple of positive multipoles l1 <= l2 <= l3."""

    l1: int
    l2: int
    l3: int

    def __post_init__(self):
        for l in (self.l1, self.l2, self.l3):
            if not isinstance(l, int) or l < 1:
                raise ValueError(f"multipoles must be positive integers, got {self}")
        if not self.l1 <= self.l2 <= self.l3:
            raise ValueError(f"triple must be sorted: {self}")

    @classmethod
    def from_multipoles(cls, ls: Sequence[int]) -> "MultipoleTriple":
        if len(ls) != 3:
            raise ValueError(f"need exactly 3 multipoles, got {len(ls)}")
        a, b, c = sorted(ls)
        return cls(a, b, c)

    @property
    def parity_even(self) -> bool:
        return (self.l1 + self.l2 + self.l3) % 2 == 0

    @property
    def triangle_ok(self) -> bool:
        return self.l3 <= self.l1 + self.l2

    def astuple(self) -> tuple[int, int, int]:
        return (self.l1, self.l2, self.l3)


def _as_triple(t) -> MultipoleTriple:
    if isinstance(t, MultipoleTriple):
        return t
    return MultipoleTriple.from_multipoles(tuple(t))


def _require_sorted(t) -> MultipoleTriple:
    if isinstance(t, MultipoleTriple):
        return t
    ls = tuple(t)
    if list(ls) != sorted(ls):
        raise ValueError(f"triple must be sorted ascending, got {ls}")
    return MultipoleTriple.from_multipoles(ls)


def _double_factorial(n: int) -> int:
    """n!! for odd n >= -1."""
    return math.prod(range(n, 0, -2)) if n > 0 else 1


# --------------------------------------------------------------------------
# estimators
# --------------------------------------------------------------------------


class ThreeJPlan(NamedTuple):
    """Vectorized m-sum support of one sorted triple: the nonzero 3j terms.

    Shared between the per-field estimators here and the chunked Monte Carlo
    driver, so each triple's symbols are computed exactly once per process.
    """

    triple: tuple[int, int, int]
    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=128)
def threej_plan(triple: tuple[int, int, int]) -> ThreeJPlan:
    l1, l2, l3 = triple
    m1s: list[int] = []
    m2s: list[int] = []
    ws: list[float] = []
    for m1 in range(-l1, l1 + 1):
        for m2 in range(max(-l2, -l3 - m1), min(l2, l3 - m1) + 1):
            w = wigner3j(l1, l2, l3, m1, m2, -m1 - m2)
            if not w.is_zero():
                m1s.append(m1)
                m2s.append(m2)
                ws.append(w.to_float())
    m1a = np.array(m1s, dtype=np.int64)
    m2a = np.array(m2s, dtype=np.int64)
    plan = ThreeJPlan(triple, m1a, m2a, -m1a - m2a, np.array(ws))
    for arr in plan[1:]:
        arr.flags.writeable = False
    return plan


def sample_bispectrum(a: HarmonicCoefficients, t) -> float:
    """Angle-averaged sample bispectrum B^ = sum 3j * a_l1m1 a_l2m2 a_l3m3.

    Identically zero for parity-odd and triangle-violating triples, without
    touching the field.  The m-sum runs over (m1, m2) only, with m3 forced;
    the imaginary part must vanish up to rounding and only the real part is
    returned.  Arguments may come in any order; the result is bit-identical
    across all six orderings.
    """
    t = _as_triple(t)
    if t.l3 > a.lmax:
        raise ValueError(f"triple {t.astuple()} exceeds the field's lmax = {a.lmax}")
    if not t.parity_even or not t.triangle_ok:
        return 0.0
    plan = threej_plan(t.astuple())
    a1 = a.full_array(t.l1)
    a2 = a.full_array(t.l2)
    a3 = a.full_array(t.l3)
    value = np.sum(
        plan.weights
        * a1[plan.m1 + t.l1]
        * a2[plan.m2 + t.l2]
        * a3[plan.m3 + t.l3]
    )
    assert abs(value.imag) <= 1e-10 * abs(value.real) + 1e-12, value
    return float(value.real)


def _phase(t: MultipoleTriple) -> int:
    return -1 if ((t.l1 + t.l2 + t.l3) // 2) % 2 else 1


def normalized_bispectrum(a: HarmonicCoefficients, t, spec: AngularPowerSpectrum) -> float:
    """I = (-1)^((l1+l2+l3)/2) B^ / sqrt(C_l1 C_l2 C_l3), model-independent.

    Parity-odd triples return 0: B^ vanishes there and the phase exponent
    would be half-integer, so it is never evaluated.
    """
    t = _as_triple(t)
    if not t.parity_even or not t.triangle_ok:
        return 0.0
    b = sample_bispectrum(a, t)
    norm = math.sqrt(spec[t.l1] * spec[t.l2] * spec[t.l3])
    return _phase(t) * b / norm


def feasible_normalized_bispectrum(a: HarmonicCoefficients, t) -> float:
    """I^ : the normalized bispectrum with C_l replaced by its estimate."""
    t = _as_triple(t)
    if not t.parity_even or not t.triangle_ok:
        return 0.0
    b = sample_bispectrum(a, t)
    norm = math.sqrt(
        estimate_cl(a, t.l1) * estimate_cl(a, t.l2) * estimate_cl(a, t.l3)
    )
    return _phase(t) * b / norm


# --------------------------------------------------------------------------
# closed-form moments
# --------------------------------------------------------------------------


def delta_factor(t) -> int:
    """Variance factor of I: 1, 2 or 6 for distinct / one pair / all equal."""
    t = _require_sorted(t)
    if t.l1 == t.l2 == t.l3:
        return 6
    if t.l1 == t.l2 or t.l2 == t.l3:
        return 2
    return 1


def g_factor(l: int, p: int) -> Fraction:
    """g(l; p) = prod_{k=1}^p (2l+1)/(2l+2k-1), the feasible-moment shrink."""
    if not isinstance(l, int) or l < 1:
        raise ValueError(f"l must be a positive integer, got {l}")
    if not isinstance(p, int) or p < 0:
        raise ValueError(f"p must be a nonnegative integer, got {p}")
    out = Fraction(1)
    for k in range(1, p + 1):
        out *= Fraction(2 * l + 1, 2 * l + 2 * k - 1)
    return out


def big_g_factor(assignments: Sequence[tuple[Sequence[int], int]]) -> Fraction:
    """G-factor of E prod_i I^(2 p_i): the exact hatted/unhatted moment ratio.

    Counts how often each multipole value occurs among the 3 * sum(2 p_i)
    slots (triple t_i contributes its three l's 2*p_i times each) and
    multiplies g(l, n_l / 2) over the distinct values.  Every count is even
    by construction.
    """
    counts: dict[int, int] = {}
    for triple, p in assignments:
        t = _as_triple(triple)
        if not isinstance(p, int) or p < 1:
            raise ValueError(f"each power must be a positive integer, got {p}")
        for l in t.astuple():
            counts[l] = counts.get(l, 0) + 2 * p
    out = Fraction(1)
    for l, n in sorted(counts.items()):
        assert n % 2 == 0
        out *= g_factor(l, n // 2)
    return out


@lru_cache(maxsize=4096)
def _diagonal_sixj(t: tuple[int, int, int]) -> Fraction:
    """{l1 l2 l3; l1 l2 l3} is rational: all four triads coincide."""
    return wigner6j(*t, *t).as_exact_fraction()


def kappa4_closed_form(t) -> Fraction:
    """Fourth cumulant of I as an exact rational, by the four-case formula.

    With W the diagonal 6j symbol {l1 l2 l3; l1 l2 l3}:

    * l1 < l2 < l3:  6/(2l1+1) + 6/(2l2+1) + 6/(2l3+1) + 6 W
    * l1 = l2 < l3:  96/(2l2+1) + 24/(2l3+1) + 48 W
    * l1 < l2 = l3:  96/(2l2+1) + 24/(2l1+1) + 48 W
    * l1 = l2 = l3:  6*18^2/(2l+1) + 6^4 W

    Each case is validated against the connected-diagram oracle by the test
    suite; the formula itself is parity-blind.
    """
    t = _require_sorted(t)
    if not t.triangle_ok:
        raise ValueError(f"triple {t.astuple()} violates the triangle rule")
    l1, l2, l3 = t.astuple()
    w = _diagonal_sixj(t.astuple())
    if l1 == l2 == l3:
        return Fraction(6 * 18**2, 2 * l1 + 1) + 6**4 * w
    if l1 == l2:
        return Fraction(96, 2 * l2 + 1) + Fraction(24, 2 * l3 + 1) + 48 * w
    if l2 == l3:
        return Fraction(96, 2 * l2 + 1) + Fraction(24, 2 * l1 + 1) + 48 * w
    return (
        Fraction(6, 2 * l1 + 1)
        + Fraction(6, 2 * l2 + 1)
        + Fraction(6, 2 * l3 + 1)
        + 6 * w
    )


def fourth_moment_exact(t) -> Fraction:
    """E I^4 = 3 Delta^2 + kappa4, exact for every sorted valid triple."""
    t = _require_sorted(t)
    return 3 * Fraction(delta_factor(t)) ** 2 + kappa4_closed_form(t)


def fourth_moment_exact_feasible(t) -> Fraction:
    """E I^^4 = E I^4 * G, the feasible statistic's exact fourth moment."""
    t = _require_sorted(t)
    return fourth_moment_exact(t) * big_g_factor([(t.astuple(), 2)])


@dataclass(frozen=True)
class MomentPrediction:
    """Closed-form prediction of E I^(2p) and its feasible counterpart.

    ``leading + kappa4_correction`` approximates E I^(2p) with a remainder
    of scale ``order_bound``; multiplying by ``g_correction`` gives the
    prediction for the spectrum-estimated statistic.
    """

    leading: Fraction
    kappa4_correction: Fraction
    g_correction: Fraction
    order_bound: float

    @property
    def prediction(self) -> Fraction:
        return self.leading + self.kappa4_correction

    @property
    def feasible_prediction(self) -> Fraction:
        return self.prediction * self.g_correction


def moment_expansion(t, p: int) -> MomentPrediction:
    """Moment expansion E I^(2p) = (2p-1)!! Delta^p (1 + correction + ...).

    The leading term is the Gaussian moment; the first correction is
    (p(p-1)/6) (2p-1)!! Delta^(p-2) kappa4, and the neglected remainder is
    of order (2l1+1)^-2 relative to the leading term (exactly zero for
    p <= 2).
    """
    t = _require_sorted(t)
    if not isinstance(p, int) or p < 1:
        raise ValueError(f"p must be a positive integer, got {p}")
    delta = Fraction(delta_factor(t))
    leading = _double_factorial(2 * p - 1) * delta**p
    correction = (
        Fraction(p * (p - 1), 6)
        * _double_factorial(2 * p - 1)
        * delta ** (p - 2)
        * kappa4_closed_form(t)
    )
    return MomentPrediction(
        leading=leading,
        kappa4_correction=correction,
        g_correction=big_g_factor([(t.astuple(), p)]),
        order_bound=(2 * t.l1 + 1) ** -2,
    )


def moment_recursion(t, p: int, known_moments: Mapping[int, object], kappa_2p=0):
    """E I^(2p) from lower even moments, exact when kappa_2p is supplied.

    known_moments maps exponents 2k (2 <= k < p) to E I^(2k); the recursion

        E I^(2p) = (2p-1)!! Delta^p
                 + sum_k C(2p,2k) (2p-2k-1)!! Delta^(p-k) [E I^(2k) - (2k-1)!! Delta^k]
                 + kappa_2p

    neglects kappa_2p when the default 0 is kept.  Arithmetic follows the
    type of the supplied moments (Fraction, Decimal, float).
    """
    t = _require_sorted(t)
    if not isinstance(p, int) or p < 1:
        raise ValueError(f"p must be a positive integer, got {p}")
    delta = delta_factor(t)
    total = _double_factorial(2 * p - 1) * delta**p + kappa_2p
    for k in range(2, p):
        if 2 * k not in known_moments:
            raise ValueError(f"missing E I^{2 * k} in known_moments")
        central = known_moments[2 * k] - _double_factorial(2 * k - 1) * delta**k
        total += math.comb(2 * p, 2 * k) * _double_factorial(2 * p - 2 * k - 1) * delta ** (p - k) * central
    return total


class EdgeworthCdf(NamedTuple):
    value: float
    clamped: bool


def edgeworth_cdf(t, x: float) -> EdgeworthCdf:
    """Edgeworth-corrected CDF of the standardized statistic I / sqrt(Delta).

    F(x) = Phi(x) + (kappa4 / (24 Delta^2)) * integral_{-inf}^x H4(z) phi(z) dz
    with H4(z) = z^4 - 6z^2 + 3, whose integral closes to -H3(x) phi(x) with
    H3(z) = z^3 - 3z.  kappa4/Delta^2 is the fourth cumulant of I/sqrt(Delta).
    The result is clamped to [0, 1]; the flag reports when clamping fired.
    """
    t = _require_sorted(t)
    kappa = kappa4_closed_form(t) / Fraction(delta_factor(t)) ** 2
    phi = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    big_phi = 0.5 * math.erfc(-x / math.sqrt(2.0))
    h3 = x**3 - 3.0 * x
    value = big_phi - float(kappa) / 24.0 * h3 * phi
    clamped = not 0.0 <= value <= 1.0
    return EdgeworthCdf(min(1.0, max(0.0, value)), clamped)
