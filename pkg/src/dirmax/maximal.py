"""The maximal operator over a family, its linearization, adjoint, and norms.

M averages a nonnegative grid function over every family member containing a
point and takes the supremum.  On a finite family the supremum is attained,
so the linearization rho picks the argmax member per cell (canonical-order
tie-break) and the linear operator T averages over rho(x).

T* is computed against the exact staircase geometry: the indicator of a
member enters as its per-cell coverage fractions, which is precisely what
makes <Tf, g> = <f, T*g> an exact identity on the grid.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

from .dyadic import DyadicRational
from .family import RectangleFamily
from .geometry import GridSpec
from .grids import GridFunction, RationalGrid, column_prefix, integrate_scaled


@dataclass(frozen=True)
class ChoiceMap:
    """Per-cell argmax member index; -1 exactly on the exceptional set X."""

    fam: RectangleFamily
    entries: tuple[int, ...]

    def __post_init__(self):
        if len(self.entries) != self.fam.spec.n_cells:
            raise ValueError("choice map entry count mismatch")

    @property
    def spec(self) -> GridSpec:
        return self.fam.spec

    def covered_cells(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e >= 0]

    def exceptional_cells(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e < 0]

    def check(self) -> None:
        """Validate cell-center containment and that -1 marks exactly X."""
        members = self.fam.members
        covered = [False] * self.spec.n_cells
        for r in members:
            for idx in r.cell_indices():
                covered[idx] = True
        for idx, e in enumerate(self.entries):
            if e >= 0:
                if not (0 <= e < len(members)):
                    raise ValueError("corrupt choice map")
                c, row = self.spec.cell_coords(idx)
                if not members[e].contains_cell(c, row):
                    raise ValueError("choice map entry outside its rectangle")
            elif covered[idx]:
                raise ValueError("uncovered mark on a covered cell")


def _scaled_averages(fam: RectangleFamily, f: GridFunction) -> tuple[list[int], int]:
    """Per-member averages over a common power-of-two scale."""
    spec = fam.spec
    prefix = column_prefix(f)
    top = 2 * spec.m + 2 + f.scale
    vals = []
    for r in fam.members:
        num, exp = integrate_scaled(r, f, prefix)
        # average = num / 2^(exp - level - m_w); bring to the common scale
        e = exp - r.base.level - spec.m_w
        vals.append(num << (top - e))
    return vals, top


def _require_nonneg(f: GridFunction) -> None:
    if any(n < 0 for n in f.nums):
        raise ValueError("operator input must be nonnegative")


def maximal_apply(
    f: GridFunction, fam: RectangleFamily, workers: int = 1
) -> GridFunction:
    """Mf: per cell, the largest member average among members containing it."""
    spec = fam.spec
    if spec != f.spec:
        raise ValueError("incompatible grids")
    avgs, scale = _scaled_averages(fam, f)

    def splat(member_range) -> list[int]:
        out = [0] * spec.n_cells
        members = fam.members
        for mi in member_range:
            a = avgs[mi]
            if a == 0:
                continue
            r = members[mi]
            m = spec.m
            cnt = 1 << (m - spec.m_w)
            for c in range(r.col_lo, r.col_hi):
                r0, _ = r.center_rows(c)
                base = (c << m) + r0
                for idx in range(base, base + cnt):
                    if a > out[idx]:
                        out[idx] = a
        return out

    if workers <= 1 or len(fam.members) < 2:
        out = splat(range(len(fam.members)))
    else:
        nw = min(workers, len(fam.members))
        size = -(-len(fam.members) // nw)
        ranges = [range(i * size, min((i + 1) * size, len(fam.members))) for i in range(nw)]
        with ThreadPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(splat, ranges))
        out = parts[0]
        for part in parts[1:]:
            for i, vv in enumerate(part):
                if vv > out[i]:
                    out[i] = vv
    return GridFunction(spec, scale, out)


def linearize(f: GridFunction, fam: RectangleFamily) -> ChoiceMap:
    """Argmax member per covered cell; ties broken by canonical member order."""
    spec = fam.spec
    if spec != f.spec:
        raise ValueError("incompatible grids")
    avgs, _ = _scaled_averages(fam, f)
    best = [0] * spec.n_cells
    idxs = [-1] * spec.n_cells
    m = spec.m
    cnt = 1 << (m - spec.m_w)
    for mi, r in enumerate(fam.members):
        a = avgs[mi]
        for c in range(r.col_lo, r.col_hi):
            r0, _ = r.center_rows(c)
            base = (c << m) + r0
            for idx in range(base, base + cnt):
                if a > best[idx] or idxs[idx] < 0:
                    best[idx] = a
                    idxs[idx] = mi
    return ChoiceMap(fam, tuple(idxs))


def apply_T(rho: ChoiceMap, f: GridFunction) -> GridFunction:
    """T_rho f: the average of f over the chosen rectangle, 0 on X."""
    fam = rho.fam
    spec = fam.spec
    if spec != f.spec:
        raise ValueError("incompatible grids")
    avgs, scale = _scaled_averages(fam, f)
    nmem = len(fam.members)
    out = [0] * spec.n_cells
    for idx, e in enumerate(rho.entries):
        if e < 0:
            continue
        if e >= nmem:
            raise ValueError("corrupt choice map")
        out[idx] = avgs[e]
    return GridFunction(spec, scale, out)


def apply_T_adjoint(rho: ChoiceMap, g: GridFunction, workers: int = 1) -> GridFunction:
    """T* g = sum over members of (mass of g on the choosers) * 1_R / |R|.

    1_R enters with exact per-cell coverage fractions of the staircase, so
    adjointness against apply_T holds exactly.  Member chunks may accumulate
    concurrently; exact sums commute, so any worker count gives identical
    output.
    """
    fam = rho.fam
    spec = fam.spec
    if spec != g.spec:
        raise ValueError("incompatible grids")
    nmem = len(fam.members)
    mass = [0] * nmem  # scaled by 2^(g.scale + 2m)
    for idx, e in enumerate(rho.entries):
        if e < 0:
            continue
        if e >= nmem:
            raise ValueError("corrupt choice map")
        mass[e] += g.nums[idx]
    m = spec.m
    scale = g.scale + 2 * m + 2

    def splat(member_range) -> list[int]:
        out = [0] * spec.n_cells
        for mi in member_range:
            if mass[mi] == 0:
                continue
            r = fam.members[mi]
            # contribution per cell: mass * overlap(slab, cell)/cell / |R|
            coef = mass[mi] << (2 * (spec.m_w - r.k))
            u = 1 << (r.y_scale - m)
            for c in range(r.col_lo, r.col_hi):
                lo, hi = r.slab_scaled(c)
                r0 = lo // u
                r1 = (hi - 1) // u
                base = c << m
                if r0 == r1:
                    out[base + r0] += coef * (hi - lo)
                    continue
                out[base + r0] += coef * ((r0 + 1) * u - lo)
                out[base + r1] += coef * (hi - r1 * u)
                full = coef * u
                for row in range(r0 + 1, r1):
                    out[base + row] += full
        return out

    if workers <= 1 or nmem < 2:
        out = splat(range(nmem))
    else:
        nw = min(workers, nmem)
        size = -(-nmem // nw)
        ranges = [range(i * size, min((i + 1) * size, nmem)) for i in range(nw)]
        with ThreadPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(splat, ranges))
        out = parts[0]
        for part in parts[1:]:
            for i, vv in enumerate(part):
                if vv:
                    out[i] += vv
    return GridFunction(spec, scale, out)


def nu(rho: ChoiceMap, cells, member) -> DyadicRational:
    """nu_R^F: measure of the F-cells whose choice is the given member.

    The member may be given as its index or as the parallelogram itself.
    """
    if not isinstance(member, int):
        member = rho.fam.members.index(member)
    entries = rho.entries
    count = sum(1 for idx in cells if entries[idx] == member)
    return DyadicRational(count, 2 * rho.spec.m)


def nu_all(rho: ChoiceMap, cells) -> list[int]:
    """Chooser cell counts for every member (scaled nu: count per member)."""
    counts = [0] * len(rho.fam.members)
    entries = rho.entries
    for idx in cells:
        e = entries[idx]
        if e >= 0:
            counts[e] += 1
    return counts


def _cross(o, a, b) -> int:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _max_slope_to_hull(hull, x: int, y: int, hull_on_left: bool) -> tuple[int, int]:
    """Steepest chord between fixed point (x, y) and a convex chain.

    `hull` lists prefix-sum points sorted by x; the chord slope is computed
    left-to-right so the returned (num, den) has den > 0.  Slope along the
    chain is unimodal, so a binary search on consecutive comparisons finds
    the peak; comparisons are exact integer cross-multiplications.
    """

    def slope(i: int) -> tuple[int, int]:
        ax, ay = hull[i]
        if hull_on_left:
            return y - ay, x - ax
        return ay - y, ax - x

    lo, hi = 0, len(hull) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        n1, d1 = slope(mid)
        n2, d2 = slope(mid + 1)
        if n1 * d2 >= n2 * d1:
            hi = mid
        else:
            lo = mid + 1
    n1, d1 = slope(lo)
    if hi != lo:
        n2, d2 = slope(hi)
        if n2 * d1 > n1 * d2:
            return n2, d2
    return n1, d1


def _column_vertical_max(pref: list[int], n: int) -> list[Fraction]:
    """Per cell, the max average of the column over segments containing it.

    best(r) maximizes (P[r1]-P[r0])/(r1-r0) over r0 <= r < r1: the steepest
    chord of the prefix-sum graph crossing position r.  Divide and conquer
    on the cell range: chords inside a half recurse; crossing chords query
    the static hull of the far side once per endpoint, with a running max.
    """
    best = [(pref[r + 1] - pref[r], 1) for r in range(n)]  # single cells

    def better(cur, cand):
        return cand if cand[0] * cur[1] > cur[0] * cand[1] else cur

    def solve(lo: int, hi: int) -> None:
        if hi - lo <= 1:
            return
        mid = (lo + hi) // 2
        solve(lo, mid)
        solve(mid, hi)
        # crossing chords: r0 in [lo, mid-1], r1 in [mid+1, hi]
        left = [(i, pref[i]) for i in range(lo, mid)]
        lower = []
        for p in left:
            while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
                lower.pop()
            lower.append(p)
        run = None
        for r in range(hi - 1, mid - 1, -1):  # cells right of the split
            cand = _max_slope_to_hull(lower, r + 1, pref[r + 1], True)
            run = cand if run is None else better(run, cand)
            best[r] = better(best[r], run)
        right = [(i, pref[i]) for i in range(mid + 1, hi + 1)]
        upper = []
        for p in right:
            while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) >= 0:
                upper.pop()
            upper.append(p)
        run = None
        for r in range(lo, mid):  # cells left of the split
            cand = _max_slope_to_hull(upper, r, pref[r], False)
            run = cand if run is None else better(run, cand)
            best[r] = better(best[r], run)

    solve(0, n)
    return [Fraction(a, b) for a, b in best]


def m2_vertical(g: GridFunction) -> RationalGrid:
    """Hardy-Littlewood maximal function along vertical cell-aligned segments.

    Exact: per cell, the best average of g over the column segments through
    it.  Averages over odd segment lengths are not dyadic, hence the
    Fraction-valued grid.
    """
    _require_nonneg(g)
    spec = g.spec
    m = spec.m
    n = spec.n
    nums = g.nums
    out: list[Fraction] = [Fraction(0)] * spec.n_cells
    sc = 1 << g.scale
    for c in range(n):
        base = c << m
        pref = [0] * (n + 1)
        for r in range(n):
            pref[r + 1] = pref[r] + nums[base + r]
        col = _column_vertical_max(pref, n)
        for r in range(n):
            out[base + r] = col[r] / sc
    return RationalGrid(spec, out)


# -- norm estimation ----------------------------------------------------------


@dataclass(frozen=True)
class NormReport:
    """Rayleigh-ratio lower estimates for ||M|| on L2 (heuristic ascent)."""

    family_size: int
    rows: tuple[tuple[int, int, float], ...]  # (seed_id, iteration, ratio)
    best_ratio: float

    def to_text(self) -> str:
        lines = [
            f"family_size {self.family_size}",
            f"best_ratio {self.best_ratio:.12g}",
            f"rows {len(self.rows)}",
        ]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["seed_id,iteration,ratio"]
        for sid, it, ratio in self.rows:
            lines.append(f"{sid},{it},{ratio:.12g}")
        return "\n".join(lines) + "\n"


def rayleigh_ratio(f: GridFunction, fam: RectangleFamily) -> float:
    """||Mf||_2 / ||f||_2 from exact squared norms."""
    den = f.l2_sq()
    if not den:
        raise ValueError("degenerate seed")
    num = maximal_apply(f, fam).l2_sq()
    return math.sqrt(float(num.as_fraction() / den.as_fraction()))


_MAX_ASCENT_SCALE = 96


def estimate_norm(
    fam: RectangleFamily, seeds: list[GridFunction], ascent_iters: int
) -> NormReport:
    """Lower estimates of ||M||_2->2: seed ratios plus T*T ascent refreshes.

    The ascent relinearizes at the current iterate and follows f <- T* T f;
    all reported ratios are genuine Rayleigh quotients, so the best ratio is
    a certified lower estimate, never an upper bound.
    """
    rows = []
    best = 0.0
    for sid, seed in enumerate(seeds):
        if seed.spec != fam.spec:
            raise ValueError("incompatible grids")
        if seed.is_zero():
            raise ValueError("degenerate seed")
        f = seed
        for it in range(ascent_iters + 1):
            ratio = rayleigh_ratio(f, fam)
            rows.append((sid, it, ratio))
            if ratio > best:
                best = ratio
            if it == ascent_iters:
                break
            rho = linearize(f, fam)
            nxt = apply_T_adjoint(rho, apply_T(rho, f))
            if nxt.is_zero():
                break
            if nxt.scale > _MAX_ASCENT_SCALE:
                nxt = nxt.rescaled(_MAX_ASCENT_SCALE)
                if nxt.is_zero():
                    break
            f = nxt.reduced()
    return NormReport(len(fam.members), tuple(rows), best)
