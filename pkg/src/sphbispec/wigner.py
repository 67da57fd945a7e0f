"""Exact Wigner 3j / 6j symbols, Clebsch-Gordan coefficients and Gaunt integrals.

Every symbol value of integer angular momenta is of the form s*sqrt(n/d) with
s in {-1,0,+1} and n/d a nonnegative rational, so we compute them exactly:
factorials are handled as prime-exponent vectors (Legendre's formula), the
alternating Racah sums run over big rationals, and results are returned as
:class:`SignedSqrtRational` values that convert losslessly to decimals of any
requested precision.

Conventions follow Varshalovich, Moskalev & Khersonskii, "Quantum Theory of
Angular Momentum" (the 3j single-sum formula 8.2.1.5 and the 6j single-sum
formula).  Memoization uses the Regge-square canonical form for 3j symbols
(cf. Rasch & Yu, SIAM J. Sci. Comput. 25 (2003) 1416) and the classical
24-element symmetry group for 6j symbols.

Only integer (bosonic) angular momenta are supported.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal, localcontext
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from typing import NamedTuple

__all__ = [
    "SignedSqrtRational",
    "ThreeJArgs",
    "GauntValue",
    "wigner3j",
    "clebsch_gordan",
    "wigner6j",
    "gaunt",
    "cg_chain_coefficient",
    "cg_chain_coefficient_exact",
]

_CACHE_SIZE = 1 << 20


# --------------------------------------------------------------------------
# prime-exponent factorial arithmetic
# --------------------------------------------------------------------------

_sieve_primes: list[int] = [2, 3, 5, 7, 11, 13]


def _primes_upto(n: int) -> list[int]:
    """All primes <= n, extending a module-level sieve as needed."""
    global _sieve_primes
    if _sieve_primes[-1] < n:
        limit = max(n, 2 * _sieve_primes[-1])
        sieve = bytearray([1]) * (limit + 1)
        sieve[0:2] = b"\x00\x00"
        for p in range(2, math.isqrt(limit) + 1):
            if sieve[p]:
                sieve[p * p :: p] = bytearray(len(sieve[p * p :: p]))
        _sieve_primes = [i for i, v in enumerate(sieve) if v]
    return [p for p in _sieve_primes if p <= n]


@lru_cache(maxsize=4096)
def _factorial_exponents(n: int) -> tuple[tuple[int, int], ...]:
    """Prime factorization of n! as ((p, e), ...) via Legendre's formula."""
    out = []
    for p in _primes_upto(n):
        e, q = 0, n
        while q:
            q //= p
            e += q
        if e:
            out.append((p, e))
    return tuple(out)


class _FactorialProduct:
    """A product of factorials and their inverses, as a prime-exponent vector.

    Multiplying in a factorial is pure exponent addition; the final
    conversion to a Fraction needs no gcd because positive and negative
    exponents can never share a prime.
    """

    __slots__ = ("exp",)

    def __init__(self) -> None:
        self.exp: dict[int, int] = {}

    def mul_factorial(self, n: int, power: int = 1) -> "_FactorialProduct":
        if n < 0:
            raise ValueError(f"negative factorial argument {n}")
        for p, e in _factorial_exponents(n):
            self.exp[p] = self.exp.get(p, 0) + e * power
        return self

    def to_fraction(self) -> Fraction:
        num = den = 1
        for p, e in self.exp.items():
            if e > 0:
                num *= p**e
            elif e < 0:
                den *= p**-e
        return Fraction(num, den)

    def sqrt_split(self) -> tuple[Fraction, Fraction]:
        """Write sqrt(self) = c * sqrt(k) with k squarefree; return (c, k)."""
        c_num = c_den = k_num = k_den = 1
        for p, e in self.exp.items():
            half, odd = divmod(abs(e), 2)
            if e > 0:
                c_num *= p**half
                if odd:
                    k_num *= p
            elif e < 0:
                c_den *= p**half
                if odd:
                    k_den *= p
        return Fraction(c_num, c_den), Fraction(k_num, k_den)


# --------------------------------------------------------------------------
# exact value container
# --------------------------------------------------------------------------

_EXACT_RE = re.compile(r"^([+-])sqrt\((\d+)/(\d+)\)$")


@dataclass(frozen=True)
class SignedSqrtRational:
    """The exact number sign * sqrt(radicand_num / radicand_den).

    The radicand is stored in lowest terms and sign == 0 iff the value is
    zero.  Conversion to decimal is carried out at the requested precision
    with guard digits, so any number of digits can be obtained exactly.
    """

    sign: int
    radicand_num: int
    radicand_den: int

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign}")
        if self.radicand_den <= 0 or self.radicand_num < 0:
            raise ValueError("radicand must be a nonnegative rational")
        if (self.sign == 0) != (self.radicand_num == 0):
            raise ValueError("sign == 0 must coincide with a zero radicand")
        if math.gcd(self.radicand_num, self.radicand_den) != 1:
            raise ValueError("radicand must be stored in lowest terms")

    @classmethod
    def zero(cls) -> "SignedSqrtRational":
        return cls(0, 0, 1)

    @classmethod
    def from_sign_and_square(cls, sign: int, square: Fraction) -> "SignedSqrtRational":
        if square < 0:
            raise ValueError("radicand must be nonnegative")
        if sign == 0 or square == 0:
            return cls.zero()
        return cls(1 if sign > 0 else -1, square.numerator, square.denominator)

    @classmethod
    def from_signed_square(cls, signed_square: Fraction) -> "SignedSqrtRational":
        """Build from q = sign * value**2 (the natural exact carrier)."""
        if signed_square == 0:
            return cls.zero()
        sign = 1 if signed_square > 0 else -1
        return cls(sign, abs(signed_square).numerator, abs(signed_square).denominator)

    # -- queries ----------------------------------------------------------

    def is_zero(self) -> bool:
        return self.sign == 0

    def squared(self) -> Fraction:
        return Fraction(self.radicand_num, self.radicand_den)

    def signed_square(self) -> Fraction:
        """sign * value**2; addition-free exact transport of the value."""
        return self.sign * self.squared()

    def as_exact_fraction(self) -> Fraction:
        """The value as a Fraction; raises if the radicand is not a perfect square."""
        rn = math.isqrt(self.radicand_num)
        rd = math.isqrt(self.radicand_den)
        if rn * rn != self.radicand_num or rd * rd != self.radicand_den:
            raise ValueError("value is irrational; radicand is not a perfect square")
        return Fraction(self.sign * rn, rd)

    # -- conversions ------------------------------------------------------

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        try:
            ratio = float(Fraction(self.radicand_num, self.radicand_den))
        except OverflowError:
            return float(self.to_decimal(25))
        return self.sign * math.sqrt(ratio)

    __float__ = to_float

    def to_decimal(self, digits: int = 50) -> Decimal:
        """Correctly rounded decimal value with `digits` significant digits."""
        if digits < 1:
            raise ValueError("digits must be positive")
        if self.sign == 0:
            return Decimal(0)
        with localcontext() as ctx:
            ctx.prec = digits + 16
            root = (Decimal(self.radicand_num) / Decimal(self.radicand_den)).sqrt()
            if self.sign < 0:
                root = -root
        with localcontext() as ctx:
            ctx.prec = digits
            return +root

    # -- algebra ----------------------------------------------------------

    def __mul__(self, other: "SignedSqrtRational") -> "SignedSqrtRational":
        if not isinstance(other, SignedSqrtRational):
            return NotImplemented
        return SignedSqrtRational.from_sign_and_square(
            self.sign * other.sign,
            Fraction(
                self.radicand_num * other.radicand_num,
                self.radicand_den * other.radicand_den,
            ),
        )

    def __neg__(self) -> "SignedSqrtRational":
        if self.sign == 0:
            return self
        return SignedSqrtRational(-self.sign, self.radicand_num, self.radicand_den)

    def scale_sqrt(self, q: Fraction | int) -> "SignedSqrtRational":
        """Multiply the value by sqrt(q) for a nonnegative rational q."""
        q = Fraction(q)
        return self * SignedSqrtRational.from_sign_and_square(1 if q else 0, q)

    def __bool__(self) -> bool:
        return self.sign != 0

    # -- text form --------------------------------------------------------

    def format_exact(self) -> str:
        if self.sign == 0:
            return "0"
        s = "+" if self.sign > 0 else "-"
        return f"{s}sqrt({self.radicand_num}/{self.radicand_den})"

    @classmethod
    def parse_exact(cls, text: str) -> "SignedSqrtRational":
        text = text.strip()
        if text == "0":
            return cls.zero()
        m = _EXACT_RE.match(text)
        if m is None:
            raise ValueError(f"not an exact sqrt-rational literal: {text!r}")
        sign = 1 if m.group(1) == "+" else -1
        return cls.from_sign_and_square(sign, Fraction(int(m.group(2)), int(m.group(3))))


_ZERO = SignedSqrtRational.zero()


class ThreeJArgs(NamedTuple):
    """Argument bundle for a 3j symbol; unpack with wigner3j(*args)."""

    l1: int
    l2: int
    l3: int
    m1: int
    m2: int
    m3: int


class GauntValue(NamedTuple):
    """Exact algebraic part of a Gaunt integral plus its symbolic 1/sqrt(4*pi).

    The true integral of three spherical harmonics equals
    ``algebraic * 1/sqrt(4*pi)``; the factor is kept symbolic so the
    algebraic part stays an exact sqrt-rational.
    """

    algebraic: SignedSqrtRational
    inv_sqrt_4pi: bool

    def to_float(self) -> float:
        value = self.algebraic.to_float()
        if self.inv_sqrt_4pi:
            value /= math.sqrt(4.0 * math.pi)
        return value


# --------------------------------------------------------------------------
# 3j symbol
# --------------------------------------------------------------------------


def _check_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int,)):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return value


def _triangle_ok(a: int, b: int, c: int) -> bool:
    return abs(a - b) <= c <= a + b


def _triangle_coefficient(a: int, b: int, c: int) -> Fraction:
    """(a+b-c)! (a-b+c)! (-a+b+c)! / (a+b+c+1)! as an exact Fraction."""
    fp = _FactorialProduct()
    fp.mul_factorial(a + b - c)
    fp.mul_factorial(a - b + c)
    fp.mul_factorial(-a + b + c)
    fp.mul_factorial(a + b + c + 1, -1)
    return fp.to_fraction()


def _threej_raw(l1, l2, l3, m1, m2, m3) -> SignedSqrtRational:
    """Racah single-sum evaluation over exact rationals (no caching)."""
    if m1 + m2 + m3 != 0 or not _triangle_ok(l1, l2, l3):
        return _ZERO

    kmin = max(0, l2 - l3 - m1, l1 - l3 + m2)
    kmax = min(l1 + l2 - l3, l1 - m1, l2 + m2)
    if kmin > kmax:
        return _ZERO

    # alternating sum with a multiplicative term recurrence
    c1 = kmin
    c2 = l1 + l2 - l3 - kmin
    c3 = l1 - m1 - kmin
    c4 = l2 + m2 - kmin
    c5 = l3 - l2 + m1 + kmin
    c6 = l3 - l1 - m2 + kmin
    fp = _FactorialProduct()
    for n, p in ((c1, -1), (c2, -1), (c3, -1), (c4, -1), (c5, -1), (c6, -1)):
        fp.mul_factorial(n, p)
    term = fp.to_fraction()
    if kmin % 2:
        term = -term
    total = term
    for _ in range(kmin, kmax):
        term *= Fraction(-c2 * c3 * c4, (c1 + 1) * (c5 + 1) * (c6 + 1))
        c1 += 1
        c5 += 1
        c6 += 1
        c2 -= 1
        c3 -= 1
        c4 -= 1
        total += term
    if total == 0:
        return _ZERO

    fp = _FactorialProduct()
    fp.mul_factorial(l1 + l2 - l3)
    fp.mul_factorial(l1 - l2 + l3)
    fp.mul_factorial(-l1 + l2 + l3)
    fp.mul_factorial(l1 + l2 + l3 + 1, -1)
    for li, mi in ((l1, m1), (l2, m2), (l3, m3)):
        fp.mul_factorial(li - mi)
        fp.mul_factorial(li + mi)
    radicand = fp.to_fraction() * total * total

    sign = 1 if total > 0 else -1
    if (l1 - l2 - m3) % 2:
        sign = -sign
    return SignedSqrtRational.from_sign_and_square(sign, radicand)


def _make_regge_transforms() -> list[tuple[tuple[int, ...], int]]:
    perms = []
    for p in permutations((0, 1, 2)):
        inv = sum(1 for i in range(3) for j in range(i + 1, 3) if p[i] > p[j])
        perms.append((p, inv % 2))
    out = []
    for rp, rpar in perms:
        for cp, cpar in perms:
            for transpose in (False, True):
                if transpose:
                    idx = tuple(3 * cp[c] + rp[r] for r in range(3) for c in range(3))
                else:
                    idx = tuple(3 * rp[r] + cp[c] for r in range(3) for c in range(3))
                out.append((idx, (rpar + cpar) % 2))
    return out


_REGGE_TRANSFORMS = _make_regge_transforms()


def _regge_canonical(l1, l2, l3, m1, m2, m3) -> tuple[tuple[int, ...], int]:
    """Lexicographically minimal Regge square and the parity of the map to it.

    Only squares whose middle/bottom rows have column-wise even sums are
    admitted: the remaining Regge images correspond to half-integer momenta,
    which this integer-only implementation cannot re-evaluate.  The identity
    transform always qualifies, so the candidate set is never empty.
    """
    flat = (
        -l1 + l2 + l3,
        l1 - l2 + l3,
        l1 + l2 - l3,
        l1 - m1,
        l2 - m2,
        l3 - m3,
        l1 + m1,
        l2 + m2,
        l3 + m3,
    )
    best = None
    best_par = 0
    for idx, par in _REGGE_TRANSFORMS:
        cand = tuple(flat[i] for i in idx)
        if ((cand[3] + cand[6]) | (cand[4] + cand[7]) | (cand[5] + cand[8])) & 1:
            continue
        if best is None or cand < best or (cand == best and par < best_par):
            best, best_par = cand, par
    return best, best_par


@lru_cache(maxsize=_CACHE_SIZE)
def _threej_cached(flat: tuple[int, ...]) -> SignedSqrtRational:
    l1 = (flat[3] + flat[6]) // 2
    l2 = (flat[4] + flat[7]) // 2
    l3 = (flat[5] + flat[8]) // 2
    m1 = (flat[6] - flat[3]) // 2
    m2 = (flat[7] - flat[4]) // 2
    m3 = (flat[8] - flat[5]) // 2
    return _threej_raw(l1, l2, l3, m1, m2, m3)


def wigner3j(l1, l2, l3, m1, m2, m3, use_cache: bool = True) -> SignedSqrtRational:
    """Exact Wigner 3j symbol (l1 l2 l3 / m1 m2 m3) for integer arguments.

    Returns an exact zero when m1+m2+m3 != 0, when the triangle rule fails,
    or when all m vanish and l1+l2+l3 is odd.  Raises ValueError when some
    |m_i| > l_i (a caller error rather than a selection rule).
    """
    for name, val in (("l1", l1), ("l2", l2), ("l3", l3), ("m1", m1), ("m2", m2), ("m3", m3)):
        _check_int(name, val)
    for li, mi, nl, nm in ((l1, m1, "l1", "m1"), (l2, m2, "l2", "m2"), (l3, m3, "l3", "m3")):
        if li < 0:
            raise ValueError(f"{nl} must be nonnegative, got {li}")
        if abs(mi) > li:
            raise ValueError(f"|{nm}| = {abs(mi)} exceeds {nl} = {li}")
    if m1 + m2 + m3 != 0 or not _triangle_ok(l1, l2, l3):
        return _ZERO
    if m1 == m2 == m3 == 0 and (l1 + l2 + l3) % 2:
        return _ZERO
    if not use_cache:
        return _threej_raw(l1, l2, l3, m1, m2, m3)
    flat, parity = _regge_canonical(l1, l2, l3, m1, m2, m3)
    value = _threej_cached(flat)
    if parity and (l1 + l2 + l3) % 2:
        value = -value
    return value


# --------------------------------------------------------------------------
# Clebsch-Gordan coefficients
# --------------------------------------------------------------------------


def clebsch_gordan(l1, m1, l2, m2, l, m) -> SignedSqrtRational:
    """Exact <l1 m1, l2 m2 | l m> via the standard 3j conversion.

    C = (-1)^(l1-l2+m) * sqrt(2l+1) * (l1 l2 l / m1 m2 -m).
    Zero when m != m1 + m2 or the triangle rule fails.
    """
    for li, mi, nm in ((l1, m1, "m1"), (l2, m2, "m2"), (l, m, "m")):
        _check_int(nm, mi)
        if abs(mi) > li:
            raise ValueError(f"|{nm}| = {abs(mi)} exceeds its l = {li}")
    if m != m1 + m2 or not _triangle_ok(l1, l2, l):
        return _ZERO
    value = wigner3j(l1, l2, l, m1, m2, -m)
    if value.is_zero():
        return value
    value = value.scale_sqrt(2 * l + 1)
    if (l1 - l2 + m) % 2:
        value = -value
    return value


# --------------------------------------------------------------------------
# 6j symbol
# --------------------------------------------------------------------------


def _make_sixj_transforms() -> list[tuple[int, ...]]:
    # index the arguments (a, b, e, c, d, f) as columns (a|c), (b|d), (e|f);
    # the 6j symbol is invariant under the 6 column permutations and under
    # flipping the upper/lower entries of any two columns (24 maps, no phase).
    cols = ((0, 3), (1, 4), (2, 5))
    flips = ((0, 0, 0), (1, 1, 0), (1, 0, 1), (0, 1, 1))
    out = []
    for p in permutations((0, 1, 2)):
        for fl in flips:
            idx = [0] * 6
            for new_pos, old_col in enumerate(p):
                top, bot = cols[old_col]
                if fl[new_pos]:
                    top, bot = bot, top
                idx[new_pos] = top
                idx[new_pos + 3] = bot
            out.append(tuple(idx))
    return out


_SIXJ_TRANSFORMS = _make_sixj_transforms()


def _sixj_raw(a, b, e, c, d, f) -> SignedSqrtRational:
    triads = ((a, b, e), (c, d, e), (a, d, f), (c, b, f))
    for x, y, z in triads:
        if not _triangle_ok(x, y, z):
            return _ZERO

    t1, t2, t3, t4 = (x + y + z for (x, y, z) in triads)
    q1 = a + b + c + d
    q2 = b + e + d + f
    q3 = a + e + c + f
    zmin = max(t1, t2, t3, t4)
    zmax = min(q1, q2, q3)
    if zmin > zmax:
        return _ZERO

    fp = _FactorialProduct()
    fp.mul_factorial(zmin + 1)
    for t in (t1, t2, t3, t4):
        fp.mul_factorial(zmin - t, -1)
    for q in (q1, q2, q3):
        fp.mul_factorial(q - zmin, -1)
    term = fp.to_fraction()
    if zmin % 2:
        term = -term
    total = term
    for z in range(zmin, zmax):
        term *= Fraction(
            -(z + 2) * (q1 - z) * (q2 - z) * (q3 - z),
            (z + 1 - t1) * (z + 1 - t2) * (z + 1 - t3) * (z + 1 - t4),
        )
        total += term
    if total == 0:
        return _ZERO

    radicand = total * total
    for x, y, z in triads:
        radicand *= _triangle_coefficient(x, y, z)
    return SignedSqrtRational.from_sign_and_square(1 if total > 0 else -1, radicand)


@lru_cache(maxsize=_CACHE_SIZE)
def _sixj_cached(args: tuple[int, ...]) -> SignedSqrtRational:
    return _sixj_raw(*args)


def wigner6j(a, b, e, c, d, f, use_cache: bool = True) -> SignedSqrtRational:
    """Exact Wigner 6j symbol {a b e / c d f} for nonnegative integers.

    Zero whenever one of the four triads (a,b,e), (c,d,e), (a,d,f), (c,b,f)
    violates the triangle rule.
    """
    args = (a, b, e, c, d, f)
    for name, val in zip("abecdf", args):
        _check_int(name, val)
        if val < 0:
            raise ValueError(f"{name} must be nonnegative, got {val}")
    if not use_cache:
        return _sixj_raw(*args)
    canonical = min(tuple(args[i] for i in idx) for idx in _SIXJ_TRANSFORMS)
    return _sixj_cached(canonical)


# --------------------------------------------------------------------------
# Gaunt integral
# --------------------------------------------------------------------------


def gaunt(l1, l2, l3, m1, m2, m3) -> GauntValue:
    """Gaunt integral of three spherical harmonics, exact up to 1/sqrt(4*pi).

    The algebraic part is sqrt((2l1+1)(2l2+1)(2l3+1)) * (l1 l2 l3 / 0 0 0)
    * (l1 l2 l3 / m1 m2 m3); the remaining 1/sqrt(4*pi) factor is reported
    symbolically through the flag so the value stays exact.
    """
    for li, mi, nm in ((l1, m1, "m1"), (l2, m2, "m2"), (l3, m3, "m3")):
        if abs(mi) > li:
            raise ValueError(f"|{nm}| = {abs(mi)} exceeds its l = {li}")
    w0 = wigner3j(l1, l2, l3, 0, 0, 0)
    if w0.is_zero():
        return GauntValue(_ZERO, True)
    wm = wigner3j(l1, l2, l3, m1, m2, m3)
    if wm.is_zero():
        return GauntValue(_ZERO, True)
    value = (w0 * wm).scale_sqrt((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1))
    return GauntValue(value, True)


# --------------------------------------------------------------------------
# chained Clebsch-Gordan coupling coefficients
# --------------------------------------------------------------------------


def cg_chain_coefficient_exact(l_list, m_list, lambda_list, mu) -> SignedSqrtRational:
    """Exact coupling coefficient of the chain ((l1 l2) l3 ...) -> (lambda_last, mu).

    The chain couples l1 with l2 to lambda_1, then lambda_1 with l3 to
    lambda_2, and so on; the nominal sum over intermediate projections
    collapses because each one is forced to m1 + ... + m_j, leaving a single
    product of Clebsch-Gordan coefficients.

    Raises ValueError when the coupling path itself is triangle-infeasible
    (independently of the m's).
    """
    ls = list(l_list)
    ms = list(m_list)
    lambdas = list(lambda_list)
    if len(ls) < 2:
        raise ValueError("need at least two momenta to couple")
    if len(ms) != len(ls):
        raise ValueError("m_list must match l_list in length")
    if len(lambdas) != len(ls) - 1:
        raise ValueError("lambda_list must have one entry fewer than l_list")

    prev = ls[0]
    for j, lam in enumerate(lambdas):
        if not _triangle_ok(prev, ls[j + 1], lam):
            raise ValueError(
                f"coupling step ({prev}, {ls[j + 1]}) -> {lam} violates the triangle rule"
            )
        prev = lam

    if sum(ms) != mu:
        return _ZERO

    value = None
    prev_l, prev_m = ls[0], ms[0]
    for j, lam in enumerate(lambdas):
        target_m = prev_m + ms[j + 1]
        if abs(target_m) > lam:
            return _ZERO
        step = clebsch_gordan(prev_l, prev_m, ls[j + 1], ms[j + 1], lam, target_m)
        value = step if value is None else value * step
        if value.is_zero():
            return _ZERO
        prev_l, prev_m = lam, target_m
    return value


def cg_chain_coefficient(l_list, m_list, lambda_list, mu, digits: int = 50) -> Decimal:
    """Decimal value of the chained coupling coefficient (see the exact variant)."""
    return cg_chain_coefficient_exact(l_list, m_list, lambda_list, mu).to_decimal(digits)
