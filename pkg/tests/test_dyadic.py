"""Exact dyadic scalar arithmetic and canonical form."""

from __future__ import annotations

import random
from fractions import Fraction

import pytest

from dirmax.dyadic import DyadicRational as D


def test_canonical_form():
    assert (D(4, 2).num, D(4, 2).exp) == (1, 0)
    assert (D(6, 1).num, D(6, 1).exp) == (3, 0)
    assert (D(0, 7).num, D(0, 7).exp) == (0, 0)
    assert (D(12, 0).num, D(12, 0).exp) == (12, 0)  # even integers stay at exp 0
    assert (D(5, 3).num, D(5, 3).exp) == (5, 3)
    # negative exponent folds into the numerator
    assert D(3, -2) == D(12)


def test_arithmetic_exact():
    a, b = D(3, 2), D(5, 4)  # 3/4, 5/16
    assert a + b == D(17, 4)
    assert a - b == D(7, 4)
    assert a * b == D(15, 6)
    assert -a == D(-3, 2)
    assert abs(D(-3, 2)) == a
    assert a + 1 == D(7, 2)
    assert 2 * a == D(3, 1)


def test_division_exact_or_raises():
    assert D(3, 2) / D(1, 4) == D(12)  # (3/4) / (1/16)
    assert D(1) / D(4) == D(1, 2)
    with pytest.raises(ValueError):
        D(1) / D(3)
    with pytest.raises(ZeroDivisionError):
        D(1) / D(0)


def test_ordering_and_fraction_interop():
    assert D(1, 1) < D(3, 2) < D(1)
    assert D(1, 1) <= Fraction(1, 2) <= D(1, 1)
    assert D(1, 3) == Fraction(1, 8)
    assert D(1, 3) < Fraction(1, 3)
    assert sorted([D(3, 2), D(1, 3), D(1)]) == [D(1, 3), D(3, 2), D(1)]


def test_parse_render_round_trip():
    rng = random.Random(0)
    for _ in range(300):
        x = D(rng.randrange(-500, 500), rng.randrange(0, 12))
        assert D.parse(x.render()) == x
    assert D.parse("7/2^3") == D(7, 3)
    assert D.parse("-7/2^3") == D(-7, 3)
    assert D.parse("42") == D(42)
    with pytest.raises(ValueError):
        D.parse("1/3")


def test_fraction_round_trip():
    x = D(11, 5)
    assert D.from_fraction(x.as_fraction()) == x
    with pytest.raises(ValueError):
        D.from_fraction(Fraction(1, 3))


def test_immutability_and_hash():
    x = D(3, 1)
    with pytest.raises(AttributeError):
        x.num = 5
    assert len({D(3, 1), D(6, 2), D(12, 3)}) == 1
