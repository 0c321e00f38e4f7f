"""Instance generators: compression trees, squares, fields, the corpus."""

from __future__ import annotations

import random

import pytest

from dirmax.dyadic import DyadicRational as D
from dirmax.family import is_dense
from dirmax.geometry import GridSpec
from dirmax.instances import (
    build_corpus,
    cascade_field,
    identity_field,
    make_kakeya_bundle,
    make_kakeya_instance,
    make_square_instance,
    organized_collections,
    random_field,
)
from dirmax.family import is_good_collection


def test_kakeya_requires_dyadic_delta():
    with pytest.raises(ValueError, match="dyadic delta"):
        make_kakeya_instance(6, D(3, 3))
    with pytest.raises(ValueError, match="dyadic delta"):
        make_kakeya_instance(6, D(1))


def test_kakeya_minimal_depth_one():
    # delta = 1/2: two directions, support is the union of the two pieces,
    # recomputed here independently with Fractions from the digit scheme
    from fractions import Fraction

    bundle = make_kakeya_bundle(4, D(1, 1))
    assert len({r.slope.index for r in bundle.tails.members}) == 1  # top slope has no tail
    f = bundle.indicator
    spec = bundle.spec
    m, n = spec.m, 1
    # t_0 = 1/2, m0 = 1/4; quantizing 1/4 to the w = 1/2 grid rounds up to
    # 1/2, which the containment clamp for the slope-0 tail folds back to 0;
    # the all-bits slope starts at 0 anyway: no compression at depth 1
    offs = [Fraction(0), Fraction(0)]
    want = set()
    for j in (0, 1):
        s = Fraction(2 * j + 1, 4)
        for c in range(1 << (m - 1)):
            x = Fraction(2 * c + 1, 1 << (m + 1))
            lo = s * x + offs[j]
            for r in range(1 << m):
                if lo <= Fraction(2 * r + 1, 1 << (m + 1)) < lo + Fraction(1, 2):
                    want.add((c << m) + r)
    assert set(f.support_cells()) == want
    assert f.support_measure() == D(len(want), 2 * m)
    del n


def test_kakeya_field_is_identity():
    v, f = make_kakeya_instance(7, D(1, 4))
    assert v == identity_field(v.spec)
    assert set(f.nums) <= {0, 1}


def test_kakeya_support_monotone_in_depth():
    delta = D(1, 4)
    sups = [
        make_kakeya_bundle(7, delta, depth).support_measure.as_fraction()
        for depth in range(5)
    ]
    assert all(a >= b for a, b in zip(sups, sups[1:]))
    with pytest.raises(ValueError, match="depth"):
        make_kakeya_bundle(7, delta, 5)


def test_kakeya_tails_are_dense_members():
    bundle = make_kakeya_bundle(7, D(1, 4))
    v = bundle.field
    for r in bundle.tails.members:
        assert r.k == bundle.spec.m_w  # full length
        assert is_dense(r, v, bundle.tails.params.delta)


def test_square_instance():
    delta = D(1, 3)
    v, f = make_square_instance(7, delta)
    spec = f.spec
    assert spec.m_w == 3
    # ||f||_p = delta^(2/p) exactly
    for p in (1.0, 1.5, 2.0):
        assert f.lp_norm(p) == pytest.approx(float(delta.as_fraction()) ** (2 / p))
    assert f.support_measure() == delta * delta
    side = 1 << (7 - 3)
    assert set(f.support_cells()) == {
        (c << 7) + r for c in range(side) for r in range(side)
    }
    with pytest.raises(ValueError):
        make_square_instance(7, D(3, 3))


def test_random_field_on_level_m_grid():
    spec = GridSpec(5, 3, False)
    v = random_field(spec, random.Random(0))
    for x in v.values():
        assert x == D(x.num, x.exp)
        assert (x.as_fraction() * (1 << spec.m)).denominator == 1


def test_cascade_field_values_dyadic_in_range():
    spec = GridSpec(6, 4, False)
    v = cascade_field(spec)
    assert all(D(0) <= x <= D(1) for x in v.values())


def test_organized_collections_distinct_and_good():
    spec = GridSpec(7, 5, False)
    cols = organized_collections(spec, 64)
    assert len(cols) == 64
    keys = {tuple(r.sort_key() for r in col.members) for col in cols}
    assert len(keys) == 64
    for col in cols[:8] + cols[-8:]:
        good, w = is_good_collection(col)
        assert good and w.organized
    with pytest.raises(ValueError, match="too small"):
        organized_collections(GridSpec(4, 2, False), 100)


def test_corpus_composition():
    corpus = build_corpus()
    assert len(corpus) == 60
    assert sum(1 for i in corpus if i.spec.m <= 4) == 50
    assert sum(1 for i in corpus if i.spec.m == 5) == 10
    deltas = {i.delta.render() for i in corpus}
    assert {"1", "1/2^1", "1/2^3"} <= deltas
    offsteps = {i.spec.offstep_code for i in corpus}
    assert offsteps == {"w", "w2"}
    kinds = {i.name.split("_")[2] if i.spec.m <= 4 else i.name.split("_")[1] for i in corpus}
    assert {"const0", "ident", "rand", "cascade"} <= kinds
    # names unique and instances deterministic
    names = [i.name for i in corpus]
    assert len(set(names)) == len(names)
    again = build_corpus()
    assert [i.field == j.field for i, j in zip(corpus, again)]
    assert corpus[7].f == again[7].f
