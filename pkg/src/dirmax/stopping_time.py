"""Stopping-time machinery: slope assignments, Carleson packing, point classes.

Per interval I the assignment walks the dyadic tree top-down, keeping a slope
cell for J only when it is popular and does not contain a cell already used
by a longer ancestor.  Chosen popularity sets are then pairwise disjoint,
which gives the exact packing bound sum mu_J <= |I| and the halving of the
stopping-interval shadow.  Point classes come from antichain layers of the
(interval, slope) order; iterating over generations produces the pairwise
disjoint sets that decompose the linearized operator.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .dyadic import DyadicRational
from .family import RectangleFamily, allowable_slopes
from .geometry import DyadicInterval, SlopeCell
from .grids import GridFunction, OneVarField
from .grids import average as grid_average
from .maximal import ChoiceMap, apply_T, apply_T_adjoint, m2_vertical


@dataclass(frozen=True)
class ThetaPair:
    """A pair (J, s) with s in T(J), ordered per the stopping-time argument."""

    interval: DyadicInterval
    slope: SlopeCell

    def leq(self, other: "ThetaPair") -> bool:
        """(J,s) <= (J',s'): same interval with center(s) <= center(s'), or J strictly inside J'."""
        if self.interval == other.interval:
            return self.slope.center <= other.slope.center
        return other.interval.strictly_contains(self.interval)

    def lt(self, other: "ThetaPair") -> bool:
        return self != other and self.leq(other)

    def comparable(self, other: "ThetaPair") -> bool:
        return self.leq(other) or other.leq(self)

    def sort_key(self):
        return (self.interval.level, self.interval.index, self.slope.index)


@dataclass(frozen=True)
class SlopeAssignment:
    """T(J) for every dyadic J under the root, with exact popularity masses."""

    root: DyadicInterval
    chosen: Mapping[DyadicInterval, tuple[SlopeCell, ...]]
    mu: Mapping[ThetaPair, DyadicRational]

    def theta(self) -> tuple[ThetaPair, ...]:
        pairs = [
            ThetaPair(J, s) for J, cells in self.chosen.items() for s in cells
        ]
        pairs.sort(key=ThetaPair.sort_key)
        return tuple(pairs)

    def mu_of(self, J: DyadicInterval) -> DyadicRational:
        total = DyadicRational(0)
        for s in self.chosen.get(J, ()):
            total = total + self.mu[ThetaPair(J, s)]
        return total


def compute_assignments(
    I: DyadicInterval, v: OneVarField, w: DyadicRational, delta: DyadicRational
) -> SlopeAssignment:
    """Top-down slope assignment under I: popular cells not containing used ones."""
    spec = v.spec
    if w != spec.w or I.level > spec.m_w:
        raise ValueError("interval/width mismatch")
    chosen: dict[DyadicInterval, tuple[SlopeCell, ...]] = {}
    mu: dict[ThetaPair, DyadicRational] = {}

    def visit(J: DyadicInterval, blocked: frozenset[int]) -> None:
        k = spec.m_w - J.level
        keep = tuple(
            s for s in allowable_slopes(J, v, w, delta) if s.index not in blocked
        )
        chosen[J] = keep
        for s in keep:
            mu[ThetaPair(J, s)] = _g_count(J, s, v)
        if k > 0:
            child_blocked = frozenset(
                {b >> 1 for b in blocked} | {s.index >> 1 for s in keep}
            )
            for child in J.children():
                visit(child, child_blocked)

    visit(I, frozenset())
    return SlopeAssignment(I, chosen, mu)


def _g_count(J: DyadicInterval, s: SlopeCell, v: OneVarField) -> DyadicRational:
    spec = v.spec
    c0 = J.index << (spec.m - J.level)
    c1 = (J.index + 1) << (spec.m - J.level)
    count = 0
    for c in range(c0, c1):
        if (v.nums[c] << s.level) >> v.scale == s.index:
            count += 1
    return DyadicRational(count, spec.m)


def carleson_sum(assign: SlopeAssignment) -> DyadicRational:
    """Sum of mu_J over all J under the root; at most |root| by disjointness."""
    total = DyadicRational(0)
    for value in assign.mu.values():
        total = total + value
    return total


def stopping_intervals(assign: SlopeAssignment) -> tuple[DyadicInterval, ...]:
    """Maximal dyadic J under the root where the running density sum reaches 2."""
    out: list[DyadicInterval] = []

    def visit(J: DyadicInterval, acc: DyadicRational) -> None:
        mu = assign.mu_of(J)
        acc = acc + DyadicRational(mu.num, mu.exp - J.level)  # + mu_J / |J|
        if acc >= 2:
            out.append(J)
            return
        for child in J.children():
            if child in assign.chosen:
                visit(child, acc)

    visit(assign.root, DyadicRational(0))
    return tuple(sorted(out, key=lambda J: (J.level, J.index)))


def shadow_measure(intervals: Iterable[DyadicInterval]) -> DyadicRational:
    """Exact measure of a union of pairwise disjoint dyadic intervals."""
    total = DyadicRational(0)
    for J in intervals:
        total = total + J.length
    return total


def partition_theta(
    assign: SlopeAssignment, stops: Sequence[DyadicInterval]
) -> tuple[tuple[ThetaPair, ...], tuple[ThetaPair, ...]]:
    """Split Theta into good pairs and pairs buried inside a stopping interval."""
    good, bad = [], []
    for pair in assign.theta():
        if any(S.contains(pair.interval) for S in stops):
            bad.append(pair)
        else:
            good.append(pair)
    return tuple(good), tuple(bad)


def omega_levels(
    theta_good: Sequence[ThetaPair], theta_full: Sequence[ThetaPair]
) -> tuple[tuple[ThetaPair, ...], ...]:
    """Antichain layers: maximal good pairs, then good members of child sets.

    Children of a pair are the maximal pairs strictly below it in the full
    order on Theta; each layer keeps only the good ones.
    """
    full = sorted(set(theta_full), key=ThetaPair.sort_key)
    good = set(theta_good)
    if not good.issubset(full):
        raise ValueError("good pairs must come from the full pair set")

    def maximal(pairs: Iterable[ThetaPair]) -> list[ThetaPair]:
        pairs = list(pairs)
        return [p for p in pairs if not any(p.lt(q) for q in pairs)]

    levels: list[tuple[ThetaPair, ...]] = []
    current = sorted(maximal(good), key=ThetaPair.sort_key)
    children_cache: dict[ThetaPair, tuple[ThetaPair, ...]] = {}

    def children(p: ThetaPair) -> tuple[ThetaPair, ...]:
        if p not in children_cache:
            below = [q for q in full if q.lt(p)]
            children_cache[p] = tuple(maximal(below))
        return children_cache[p]

    guard = len(full) + 1
    while current and guard:
        levels.append(tuple(current))
        nxt = set()
        for p in current:
            for q in children(p):
                if q in good:
                    nxt.add(q)
        current = sorted(nxt, key=ThetaPair.sort_key)
        guard -= 1
    return tuple(levels)


@dataclass(frozen=True)
class ClassifyResult:
    """Point classes over one interval: F_n layers, good/bad cells, collections."""

    f_sets: tuple[frozenset[int], ...]
    good_cells: frozenset[int]
    bad_cells: frozenset[int]
    collections: tuple[RectangleFamily, ...]


def classify_points(
    cells: Iterable[int],
    rho: ChoiceMap,
    omegas: Sequence[Sequence[ThetaPair]],
    I: DyadicInterval,
) -> ClassifyResult:
    """Sort E-cells into F_n layers by the antichain their choice sits under."""
    fam = rho.fam
    spec = fam.spec
    cells = sorted(set(cells))
    member_levels: dict[int, tuple[int, ...]] = {}

    def levels_for(mi: int) -> tuple[int, ...]:
        if mi not in member_levels:
            r = fam.members[mi]
            if not I.contains(r.base):
                raise ValueError("choice escapes interval")
            matched = []
            for n, layer in enumerate(omegas):
                for J, s in ((p.interval, p.slope) for p in layer):
                    if J.contains(r.base) and r.slope.contains(s):
                        matched.append(n)
                        break
            member_levels[mi] = tuple(matched)
        return member_levels[mi]

    f_sets: list[set[int]] = [set() for _ in omegas]
    good: set[int] = set()
    for idx in cells:
        e = rho.entries[idx]
        if e < 0:
            raise ValueError("cell without a choice cannot be classified")
        for n in levels_for(e):
            f_sets[n].add(idx)
            good.add(idx)
    bad = frozenset(set(cells) - good)
    collections = []
    for fs in f_sets:
        idxs = sorted({rho.entries[i] for i in fs})
        collections.append(fam.subfamily(idxs))
    return ClassifyResult(
        tuple(frozenset(fs) for fs in f_sets),
        frozenset(good),
        bad,
        tuple(collections),
    )


@dataclass(frozen=True)
class IntervalRecord:
    """Everything the iteration produced over one interval of one generation."""

    interval: DyadicInterval
    assignment: SlopeAssignment
    stops: tuple[DyadicInterval, ...]
    theta_good: tuple[ThetaPair, ...]
    theta_bad: tuple[ThetaPair, ...]
    omegas: tuple[tuple[ThetaPair, ...], ...]
    classify: ClassifyResult


@dataclass(frozen=True)
class GenerationRecord:
    index: int
    intervals: tuple[DyadicInterval, ...]
    records: tuple[IntervalRecord, ...]
    good_cells: frozenset[int]
    bad_cells: frozenset[int]


@dataclass(frozen=True)
class DecompositionResult:
    generations: tuple[GenerationRecord, ...]
    truncated: bool

    def a_sets(self) -> list[frozenset[int]]:
        return [g.good_cells for g in self.generations]

    def final_bad(self) -> frozenset[int]:
        if not self.generations:
            return frozenset()
        return self.generations[-1].bad_cells


def run_generations(
    v: OneVarField,
    w: DyadicRational,
    delta: DyadicRational,
    rho: ChoiceMap,
    max_gen: int = 64,
) -> DecompositionResult:
    """Iterate the interval lemma from [0,1] over a fixed linearization."""
    spec = v.spec
    if w != spec.w:
        raise ValueError("interval/width mismatch")
    m = spec.m
    intervals = [DyadicInterval(0, 0)]
    e_cells = frozenset(rho.covered_cells())
    generations: list[GenerationRecord] = []
    truncated = False
    gen = 0
    while intervals and e_cells:
        if gen >= max_gen:
            truncated = True
            break
        records = []
        good_all: set[int] = set()
        bad_all: set[int] = set()
        next_intervals: list[DyadicInterval] = []
        for I in intervals:
            c0 = I.index << (m - I.level)
            c1 = (I.index + 1) << (m - I.level)
            cells_I = [idx for idx in e_cells if c0 <= (idx >> m) < c1]
            assign = compute_assignments(I, v, w, delta)
            stops = stopping_intervals(assign)
            th_good, th_bad = partition_theta(assign, stops)
            omegas = omega_levels(th_good, assign.theta())
            cl = classify_points(cells_I, rho, omegas, I)
            records.append(
                IntervalRecord(I, assign, stops, th_good, th_bad, omegas, cl)
            )
            good_all.update(cl.good_cells)
            bad_all.update(cl.bad_cells)
            next_intervals.extend(stops)
        generations.append(
            GenerationRecord(
                gen,
                tuple(intervals),
                tuple(records),
                frozenset(good_all),
                frozenset(bad_all),
            )
        )
        intervals = sorted(next_intervals, key=lambda J: (J.level, J.index))
        e_cells = frozenset(bad_all)
        gen += 1
    return DecompositionResult(tuple(generations), truncated)


# -- generation pieces and the vertical-maximal domination test ----------------


def piece_cells(result: DecompositionResult, j: int) -> list[tuple[DyadicInterval, int, frozenset[int]]]:
    """(J, n, cells) pieces of generation j; cells take their first matching layer."""
    out = []
    g = result.generations[j]
    for rec in g.records:
        seen: set[int] = set()
        for n, fs in enumerate(rec.classify.f_sets):
            fresh = frozenset(fs - seen)
            seen |= fs
            if fresh:
                out.append((rec.interval, n, fresh))
    return out


@dataclass(frozen=True)
class DominationViolation:
    generation: int
    interval: DyadicInterval
    layer: int
    cell: int
    average: str
    vertical_max: str


def domination_check(
    result: DecompositionResult,
    rho: ChoiceMap,
    f: GridFunction,
    max_pieces: int | None = None,
) -> tuple[list[DominationViolation], int, Fraction]:
    """Compare chosen-rectangle averages of T*(piece f) against m2_vertical.

    Runs over every piece (j, J, n) and every cell of a strictly later
    generation under J -- the domain on which the vertical-transport argument
    operates (the diagonal k = j is controlled by the good-collection bound
    instead).  Returns (violations, tuples checked, worst excess ratio); an
    empty violation list means the pointwise domination held exactly.
    """
    fam = rho.fam
    spec = fam.spec
    m = spec.m
    violations = []
    checked = 0
    worst = Fraction(0)
    a_sets = result.a_sets()
    for j in range(len(result.generations)):
        if j + 1 >= len(result.generations):
            break
        pieces = piece_cells(result, j)
        if max_pieces is not None:
            pieces = pieces[:max_pieces]
        for J, n, cells in pieces:
            g = apply_T_adjoint(rho, f.masked(cells))
            vert = m2_vertical(g)
            c0 = J.index << (m - J.level)
            c1 = (J.index + 1) << (m - J.level)
            avg_cache: dict[int, DyadicRational] = {}
            for k in range(j + 1, len(result.generations)):
                for idx in a_sets[k]:
                    if not c0 <= (idx >> m) < c1:
                        continue
                    checked += 1
                    e = rho.entries[idx]
                    if e not in avg_cache:
                        avg_cache[e] = grid_average(fam.members[e], g)
                    avg = avg_cache[e].as_fraction()
                    rhs = vert.value_at(idx)
                    if avg > rhs:
                        violations.append(
                            DominationViolation(j, J, n, idx, str(avg), str(rhs))
                        )
                        if rhs:
                            worst = max(worst, avg / rhs)
                        else:
                            worst = max(worst, Fraction(-1))
    return violations, checked, worst


# -- measured piece norms and the almost-orthogonality table -------------------


def generation_operator_ratio(
    result: DecompositionResult, rho: ChoiceMap, j: int, f: GridFunction
) -> float:
    """||1_{A_j} T f||_2 / ||f||_2 for a test function, exact norms."""
    den = f.l2_sq()
    if not den:
        raise ValueError("degenerate seed")
    tf = apply_T(rho, f).masked(result.generations[j].good_cells)
    return math.sqrt(float(tf.l2_sq().as_fraction() / den.as_fraction()))


def cross_norm_estimate(
    result: DecompositionResult,
    rho: ChoiceMap,
    j: int,
    k: int,
    seed: GridFunction,
    iters: int = 4,
) -> float:
    """Lower estimate of ||T_j T_k*|| by power ascent on the composition."""
    a_j = result.generations[j].good_cells
    a_k = result.generations[k].good_cells

    def op(g: GridFunction) -> GridFunction:
        return apply_T(rho, apply_T_adjoint(rho, g.masked(a_k))).masked(a_j)

    def op_adj(g: GridFunction) -> GridFunction:
        return apply_T(rho, apply_T_adjoint(rho, g.masked(a_j))).masked(a_k)

    f = seed
    best = 0.0
    for _ in range(iters):
        den = f.l2_sq()
        if not den:
            return best
        tf = op(f)
        num = tf.l2_sq()
        if num:
            best = max(best, math.sqrt(float(num.as_fraction() / den.as_fraction())))
        f = op_adj(tf)
        if f.is_zero():
            break
        if f.scale > 96:
            f = f.rescaled(96)
            if f.is_zero():
                break
        f = f.reduced()
    return best


def orthogonality_table(
    result: DecompositionResult,
    rho: ChoiceMap,
    seed: GridFunction,
    iters: int = 3,
) -> dict[tuple[int, int], float]:
    """Measured ||T_j T_k*|| lower estimates for every generation pair."""
    n = len(result.generations)
    table = {}
    for j in range(n):
        for k in range(j, n):
            val = cross_norm_estimate(result, rho, j, k, seed, iters)
            table[(j, k)] = val
            table[(k, j)] = val
    return table


def cotlar_stein_bound(a: Sequence[float]) -> float:
    """Assembled almost-orthogonality bound a(0)^(1/2) * (sum_n sqrt(a(n)))^(1/2).

    `a` lists a(0), a(1), ... ; the sum symmetrizes over negative n.
    """
    if not a:
        return 0.0
    total = math.sqrt(a[0]) + 2.0 * sum(math.sqrt(x) for x in a[1:])
    return math.sqrt(a[0]) * math.sqrt(total)


# -- structured text export ----------------------------------------------------


def _runs(cells: Iterable[int]) -> list[list[int]]:
    runs = []
    for idx in sorted(cells):
        if runs and runs[-1][0] + runs[-1][1] == idx:
            runs[-1][1] += 1
        else:
            runs.append([idx, 1])
    return runs


def decomposition_to_json(result: DecompositionResult) -> str:
    """Stable-keyed JSON of the full generation tree (cell sets run-length coded)."""
    payload = {
        "truncated": result.truncated,
        "generations": [
            {
                "index": g.index,
                "intervals": [[J.level, J.index] for J in g.intervals],
                "good_cells": _runs(g.good_cells),
                "bad_cells": _runs(g.bad_cells),
                "records": [
                    {
                        "interval": [rec.interval.level, rec.interval.index],
                        "assignment": [
                            {
                                "interval": [J.level, J.index],
                                "slopes": [s.index for s in cells],
                            }
                            for J, cells in sorted(
                                rec.assignment.chosen.items(),
                                key=lambda kv: (kv[0].level, kv[0].index),
                            )
                            if cells
                        ],
                        "stops": [[J.level, J.index] for J in rec.stops],
                        "omegas": [
                            [
                                [p.interval.level, p.interval.index, p.slope.index]
                                for p in layer
                            ]
                            for layer in rec.omegas
                        ],
                        "f_sets": [_runs(fs) for fs in rec.classify.f_sets],
                    }
                    for rec in g.records
                ],
            }
            for g in result.generations
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=1)
