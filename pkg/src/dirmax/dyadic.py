"""Exact dyadic rational scalars: n / 2**e, canonical, no rounding anywhere."""

from __future__ import annotations

import re
from fractions import Fraction

_PARSE_RE = re.compile(r"^(-?\d+)(?:/2\^(\d+))?$")


class DyadicRational:
    """A rational with power-of-two denominator, kept in canonical form.

    Canonical form: exponent == 0, or numerator is odd; zero is 0/2^0.
    Plain integers therefore have exponent 0.  add/sub/mul are closed and
    exact; division raises unless the quotient is again dyadic.
    """

    __slots__ = ("num", "exp")

    def __init__(self, num: int, exp: int = 0):
        if exp < 0:
            num <<= -exp
            exp = 0
        if num == 0:
            exp = 0
        else:
            while exp > 0 and num & 1 == 0:
                num >>= 1
                exp -= 1
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "exp", exp)

    def __setattr__(self, name, value):
        raise AttributeError("DyadicRational is immutable")

    # -- conversions --------------------------------------------------

    @property
    def numerator(self) -> int:
        return self.num

    @property
    def exponent(self) -> int:
        return self.exp

    @classmethod
    def from_fraction(cls, fr: Fraction) -> "DyadicRational":
        den = fr.denominator
        exp = den.bit_length() - 1
        if den != 1 << exp:
            raise ValueError(f"{fr} is not a dyadic rational")
        return cls(fr.numerator, exp)

    def as_fraction(self) -> Fraction:
        return Fraction(self.num, 1 << self.exp)

    def __float__(self) -> float:
        return self.num / (1 << self.exp)

    # -- text form -----------------------------------------------------

    def render(self) -> str:
        if self.exp == 0:
            return str(self.num)
        return f"{self.num}/2^{self.exp}"

    @classmethod
    def parse(cls, text: str) -> "DyadicRational":
        m = _PARSE_RE.match(text.strip())
        if m is None:
            raise ValueError(f"not a dyadic rational literal: {text!r}")
        return cls(int(m.group(1)), int(m.group(2) or 0))

    def __repr__(self) -> str:
        return f"DyadicRational({self.num}, {self.exp})"

    def __str__(self) -> str:
        return self.render()

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        e = max(self.exp, other.exp)
        return DyadicRational(
            (self.num << (e - self.exp)) + (other.num << (e - other.exp)), e
        )

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        e = max(self.exp, other.exp)
        return DyadicRational(
            (self.num << (e - self.exp)) - (other.num << (e - other.exp)), e
        )

    def __rsub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __mul__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return DyadicRational(self.num * other.num, self.exp + other.exp)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        if other.num == 0:
            raise ZeroDivisionError("division by zero dyadic")
        fr = Fraction(self.num, 1) / Fraction(other.num, 1)
        den = fr.denominator
        shift = den.bit_length() - 1
        if den != 1 << shift:
            raise ValueError("quotient is not a dyadic rational")
        return DyadicRational(fr.numerator, self.exp - other.exp + shift)

    def __neg__(self):
        return DyadicRational(-self.num, self.exp)

    def __abs__(self):
        return DyadicRational(abs(self.num), self.exp)

    def __bool__(self) -> bool:
        return self.num != 0

    # -- comparisons (total order; Fraction comparisons supported) ------

    def _cmp(self, other) -> int:
        e = max(self.exp, other.exp)
        a = self.num << (e - self.exp)
        b = other.num << (e - other.exp)
        return (a > b) - (a < b)

    def __eq__(self, other):
        if isinstance(other, Fraction):
            return self.as_fraction() == other
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self.num == other.num and self.exp == other.exp

    def __lt__(self, other):
        if isinstance(other, Fraction):
            return self.as_fraction() < other
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self._cmp(other) < 0

    def __le__(self, other):
        if isinstance(other, Fraction):
            return self.as_fraction() <= other
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self._cmp(other) <= 0

    def __gt__(self, other):
        if isinstance(other, Fraction):
            return self.as_fraction() > other
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self._cmp(other) > 0

    def __ge__(self, other):
        if isinstance(other, Fraction):
            return self.as_fraction() >= other
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self._cmp(other) >= 0

    def __hash__(self):
        return hash((self.num, self.exp))


def _coerce(value) -> DyadicRational | None:
    if isinstance(value, DyadicRational):
        return value
    if isinstance(value, int):
        return DyadicRational(value)
    return None


ZERO = DyadicRational(0)
ONE = DyadicRational(1)
