"""Exact Gaussian-integer arithmetic and the resonance/rectangle geometry on Z[i].

Everything here is integer or rational arithmetic; nothing is ever rounded.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence


@dataclass(frozen=True, slots=True, order=True)
class FreqPoint:
    """A lattice frequency n = re + i*im."""

    re: int
    im: int

    def __add__(self, other: FreqPoint) -> FreqPoint:
        return FreqPoint(self.re + other.re, self.im + other.im)

    def __sub__(self, other: FreqPoint) -> FreqPoint:
        return FreqPoint(self.re - other.re, self.im - other.im)

    def __neg__(self) -> FreqPoint:
        return FreqPoint(-self.re, -self.im)

    def __mul__(self, other: FreqPoint | int) -> FreqPoint:
        if isinstance(other, int):
            return FreqPoint(self.re * other, self.im * other)
        return FreqPoint(self.re * other.re - self.im * other.im,
                         self.re * other.im + self.im * other.re)

    __rmul__ = __mul__

    def norm2(self) -> int:
        return self.re * self.re + self.im * self.im

    def dot(self, other: FreqPoint) -> int:
        return self.re * other.re + self.im * other.im

    def to_json(self) -> list[int]:
        return [self.re, self.im]

    @classmethod
    def from_json(cls, pair: Sequence[int]) -> FreqPoint:
        re, im = pair
        return cls(int(re), int(im))


ORIGIN = FreqPoint(0, 0)


class RationalComplex:
    """Element (re + i*im)/den of Q[i], kept in lowest terms with den > 0."""

    __slots__ = ("re", "im", "den")

    def __init__(self, re: int, im: int = 0, den: int = 1):
        if den == 0:
            raise ZeroDivisionError("denominator must be nonzero")
        if den < 0:
            re, im, den = -re, -im, -den
        g = gcd(gcd(re, im), den)
        if g > 1:
            re, im, den = re // g, im // g, den // g
        self.re = re
        self.im = im
        self.den = den

    @classmethod
    def from_fractions(cls, re: Fraction | int, im: Fraction | int = 0) -> RationalComplex:
        re, im = Fraction(re), Fraction(im)
        den = re.denominator * im.denominator // gcd(re.denominator, im.denominator)
        return cls(re.numerator * (den // re.denominator),
                   im.numerator * (den // im.denominator), den)

    @classmethod
    def from_point(cls, n: FreqPoint) -> RationalComplex:
        return cls(n.re, n.im, 1)

    @property
    def real(self) -> Fraction:
        return Fraction(self.re, self.den)

    @property
    def imag(self) -> Fraction:
        return Fraction(self.im, self.den)

    def __add__(self, other: RationalComplex) -> RationalComplex:
        other = _coerce(other)
        return RationalComplex(self.re * other.den + other.re * self.den,
                               self.im * other.den + other.im * self.den,
                               self.den * other.den)

    __radd__ = __add__

    def __sub__(self, other: RationalComplex) -> RationalComplex:
        other = _coerce(other)
        return RationalComplex(self.re * other.den - other.re * self.den,
                               self.im * other.den - other.im * self.den,
                               self.den * other.den)

    def __rsub__(self, other) -> RationalComplex:
        return _coerce(other) - self

    def __neg__(self) -> RationalComplex:
        return RationalComplex(-self.re, -self.im, self.den)

    def __mul__(self, other: RationalComplex | int) -> RationalComplex:
        other = _coerce(other)
        return RationalComplex(self.re * other.re - self.im * other.im,
                               self.re * other.im + self.im * other.re,
                               self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other: RationalComplex | int) -> RationalComplex:
        other = _coerce(other)
        n2 = other.re * other.re + other.im * other.im
        if n2 == 0:
            raise ZeroDivisionError("division by zero in Q[i]")
        # self / other = self * conj(other) * other.den / |other.num|^2
        return RationalComplex((self.re * other.re + self.im * other.im) * other.den,
                               (self.im * other.re - self.re * other.im) * other.den,
                               self.den * n2)

    def conj(self) -> RationalComplex:
        return RationalComplex(self.re, -self.im, self.den)

    def abs2(self) -> Fraction:
        return Fraction(self.re * self.re + self.im * self.im, self.den * self.den)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_unit(self) -> bool:
        return self.re * self.re + self.im * self.im == self.den * self.den

    def is_gaussian_integer(self) -> bool:
        return self.den == 1

    def to_point(self) -> FreqPoint:
        if self.den != 1:
            raise ValueError(f"{self} is not a Gaussian integer")
        return FreqPoint(self.re, self.im)

    def __complex__(self) -> complex:
        return complex(self.re / self.den, self.im / self.den)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, FreqPoint)):
            other = _coerce(other)
        if not isinstance(other, RationalComplex):
            return NotImplemented
        return (self.re, self.im, self.den) == (other.re, other.im, other.den)

    def __hash__(self) -> int:
        return hash((self.re, self.im, self.den))

    def __repr__(self) -> str:
        if self.den == 1:
            return f"RationalComplex({self.re}, {self.im})"
        return f"RationalComplex({self.re}, {self.im}, {self.den})"


def _coerce(x) -> RationalComplex:
    if isinstance(x, RationalComplex):
        return x
    if isinstance(x, int):
        return RationalComplex(x, 0, 1)
    if isinstance(x, FreqPoint):
        return RationalComplex(x.re, x.im, 1)
    if isinstance(x, Fraction):
        return RationalComplex(x.numerator, 0, x.denominator)
    raise TypeError(f"cannot use {type(x).__name__} as a complex rational")


def lcd(values: Iterable[RationalComplex]) -> int:
    """Least common denominator of a finite set of complex rationals."""
    d = 1
    for v in values:
        d = d * v.den // gcd(d, v.den)
    return d


def omega4(n1: FreqPoint, n2: FreqPoint, n3: FreqPoint, n: FreqPoint) -> int:
    """Phase |n1|^2 - |n2|^2 + |n3|^2 - |n|^2 of the quartic interaction."""
    return n1.norm2() - n2.norm2() + n3.norm2() - n.norm2()


def in_gamma(n1: FreqPoint, n2: FreqPoint, n3: FreqPoint, n: FreqPoint) -> bool:
    """Membership (n1, n2, n3) in Gamma(n): n1 - n2 + n3 = n with n1, n3 != n."""
    return n1 - n2 + n3 == n and n1 != n and n3 != n


def is_resonant(n1: FreqPoint, n2: FreqPoint, n3: FreqPoint, n: FreqPoint) -> bool:
    return in_gamma(n1, n2, n3, n) and omega4(n1, n2, n3, n) == 0


def is_rectangle(n1: FreqPoint, n2: FreqPoint, n3: FreqPoint, n: FreqPoint) -> bool:
    """Nondegenerate rectangle with diagonals n1-n3 and n2-n.

    Tested purely from edge vectors: the four sides walked in the order
    n1 -> n2 -> n3 -> n -> n1 must be nonzero, opposite sides equal and
    consecutive sides orthogonal.
    """
    e1, e2, e3, e4 = n2 - n1, n3 - n2, n - n3, n1 - n
    if ORIGIN in (e1, e2, e3, e4):
        return False
    if e1 != -e3 or e2 != -e4:
        return False
    return e1.dot(e2) == 0 and e2.dot(e3) == 0


def right_angle_at(a: FreqPoint, b: FreqPoint, c: FreqPoint) -> bool:
    """True iff the triangle abc has a right angle at vertex a."""
    if a == b or a == c or b == c:
        raise ValueError("right_angle_at needs three distinct points")
    return (b - a).dot(c - a) == 0


def primitive_direction(dx: int, dy: int) -> tuple[int, int]:
    """Canonical representative of the line direction of a nonzero vector.

    Divides out the gcd and fixes the sign so that v and -v share a key.
    """
    g = gcd(dx, dy)
    dx, dy = dx // g, dy // g
    if dx < 0 or (dx == 0 and dy < 0):
        dx, dy = -dx, -dy
    return dx, dy
