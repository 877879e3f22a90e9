"""Point sets, E-free dyadic cubes, volume scales and porosity diagnostics."""

from __future__ import annotations

import bisect
import functools
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import (
    Cube,
    DyadicCube,
    Radical,
    StepFunction,
    ValidationError,
    cell_partition,
    check_budget,
    format_rational,
    integer_root,
    restrict_distribution,
    to_rational,
)
from .median import MedianParams, upper_median


def radical_sum(values) -> Fraction | Radical:
    """Exact sum of Fractions and Radicals without quadratic re-normalisation."""
    rational = Fraction(0)
    by_degree: dict[int, dict] = {}
    for v in values:
        if isinstance(v, Radical):
            bucket = by_degree.setdefault(v.degree, {})
            for b, c in v.terms:
                bucket[b] = bucket.get(b, 0) + c
        else:
            rational += v
    total = rational
    for deg, coeffs in by_degree.items():
        total = total + Radical.build(deg, coeffs)
    return total


# ---------------------------------------------------------------- point sets


class PointSet:
    """A subset E of R^n with exact membership and distance queries.

    kinds: ``finite`` (explicit rational points), ``lattice`` (Z^n),
    ``subspace`` (first ``free_dims`` coordinates free, the rest zero) and
    ``gamma`` ({+-m^gamma : 1 <= m <= bound}, n = 1).
    """

    def __init__(self, kind: str, dim: int, points=(), free_dims=0, gamma=None, bound=0, include_zero=False):
        self.kind = kind
        self.dim = dim
        self.points = tuple(tuple(Fraction(c) for c in pt) for pt in points)
        self.free_dims = free_dims
        self.gamma = Fraction(gamma) if gamma is not None else None
        self.bound = bound
        self.include_zero = include_zero
        if kind == "finite":
            if not self.points:
                raise ValidationError("empty point set")
            if any(len(pt) != dim for pt in self.points):
                raise ValidationError("point of the wrong dimension")
            self._sorted_1d = sorted(pt[0] for pt in self.points) if dim == 1 else None
        elif kind == "gamma":
            if dim != 1:
                raise ValidationError("gamma sets live on the line")
            if not 0 < self.gamma < 1:
                raise ValidationError("gamma must lie in (0, 1)")
            if bound < 2:
                raise ValidationError("bound must be at least 2")
            self._pow_cache: dict = {}
        elif kind == "subspace":
            if not 0 <= free_dims < dim:
                raise ValidationError("subspace dimension must be below the ambient one")
        elif kind != "lattice":
            raise ValidationError(f"unknown point set kind {kind!r}")

    # constructors
    @classmethod
    def finite(cls, points) -> "PointSet":
        pts = [pt if isinstance(pt, (tuple, list)) else (pt,) for pt in points]
        pts = [tuple(to_rational(c) for c in pt) for pt in pts]
        return cls("finite", len(pts[0]) if pts else 1, pts)

    @classmethod
    def single(cls, point) -> "PointSet":
        return cls.finite([point])

    @classmethod
    def lattice(cls, dim: int = 1) -> "PointSet":
        return cls("lattice", dim)

    @classmethod
    def subspace(cls, dim: int, free_dims: int) -> "PointSet":
        return cls("subspace", dim, free_dims=free_dims)

    @classmethod
    def gamma_set(cls, gamma, bound: int, include_zero: bool = False) -> "PointSet":
        return cls("gamma", 1, gamma=to_rational(gamma), bound=int(bound), include_zero=include_zero)

    def describe(self) -> str:
        if self.kind == "finite":
            return f"finite({len(self.points)} points, n={self.dim})"
        if self.kind == "lattice":
            return f"Z^{self.dim}"
        if self.kind == "subspace":
            return f"R^{self.free_dims} x 0 in R^{self.dim}"
        zero = ", with 0" if self.include_zero else ""
        return f"E_gamma(gamma={format_rational(self.gamma)}, bound={self.bound}{zero})"

    # ------------------------------------------------------------ gamma helpers
    def gamma_point(self, m: int):
        v = self._pow_cache.get(m)
        if v is None:
            v = Radical.power(m, self.gamma)
            self._pow_cache[m] = v
        return v

    def _count_pow_le(self, x) -> int:
        """Number of m >= 1 with m^gamma <= x (unbounded)."""
        if x < 1:
            return 0
        p, q = self.gamma.numerator, self.gamma.denominator
        if isinstance(x, Fraction) or isinstance(x, int):
            x = Fraction(x)
            # m^p <= x^q  <=>  m^p * den^q <= num^q
            num, den = x.numerator**q, x.denominator**q
            m = integer_root(num // den, p)
            while (m + 1) ** p * den <= num:
                m += 1
            while m > 0 and m**p * den > num:
                m -= 1
            return m
        guess = max(0, int(float(x) ** (1 / float(self.gamma))))
        m = guess
        while m > 0 and self.gamma_point(m) > x:
            m -= 1
        while self.gamma_point(m + 1) <= x:
            m += 1
        return m

    def _count_pow_lt(self, x) -> int:
        n = self._count_pow_le(x)
        if n >= 1 and self.gamma_point(n) == x:
            return n - 1
        return n

    def points_1d(self, lo, hi, lo_closed=True, hi_closed=False) -> list:
        """Sorted points of E in the interval between lo and hi (exact)."""
        if self.dim != 1:
            raise ValidationError("1D query on a higher-dimensional set")
        if self.kind == "finite":
            pts = self._sorted_1d
            i = bisect.bisect_left(pts, lo) if lo_closed else bisect.bisect_right(pts, lo)
            j = bisect.bisect_right(pts, hi) if hi_closed else bisect.bisect_left(pts, hi)
            return pts[i:j]
        if self.kind == "lattice":
            a = math.ceil(lo) if lo_closed else math.floor(lo) + 1
            b = math.floor(hi) if hi_closed else math.ceil(hi) - 1
            return [Fraction(k) for k in range(a, b + 1)]
        if self.kind == "subspace":
            zero = Fraction(0)
            ok = (lo <= 0 if lo_closed else lo < 0) and (0 <= hi if hi_closed else 0 < hi)
            return [zero] if ok else []
        return self._gamma_points(lo, hi, lo_closed, hi_closed)

    def _gamma_points(self, lo, hi, lo_closed, hi_closed) -> list:
        out = []
        # negative part: -m^gamma in range  <=>  m^gamma in [-hi, -lo] with flipped closure
        if lo < 0:
            top = -lo
            bot = -hi
            m_hi = self._count_pow_le(top) if lo_closed else self._count_pow_lt(top)
            m_lo = (self._count_pow_lt(bot) if hi_closed else self._count_pow_le(bot)) + 1 if bot > 0 else 1
            m_hi = min(m_hi, self.bound)
            for m in range(m_hi, m_lo - 1, -1):
                out.append(-self.gamma_point(m))
        if self.include_zero:
            if (lo <= 0 if lo_closed else lo < 0) and (0 <= hi if hi_closed else 0 < hi):
                out.append(Fraction(0))
        if hi > 0:
            start = (self._count_pow_lt(lo) if lo_closed else self._count_pow_le(lo)) + 1 if lo > 0 else 1
            stop = self._count_pow_le(hi) if hi_closed else self._count_pow_lt(hi)
            stop = min(stop, self.bound)
            for m in range(start, stop + 1):
                out.append(self.gamma_point(m))
        return out

    def extent_1d(self):
        """(min, max) of a 1D bounded set, or None for unbounded kinds."""
        if self.kind == "finite" and self.dim == 1:
            return self._sorted_1d[0], self._sorted_1d[-1]
        if self.kind == "gamma":
            top = self.gamma_point(self.bound)
            return -top, top
        return None

    # ------------------------------------------------------------ membership
    def meets(self, cube: Cube) -> bool:
        """Whether E intersects the half-open cube."""
        if cube.dim != self.dim:
            raise ValidationError("dimension mismatch")
        if self.kind == "lattice":
            return all(math.ceil(a) < a + cube.side for a in cube.corner)
        if self.kind == "subspace":
            return all(a <= 0 < a + cube.side for a in cube.corner[self.free_dims :])
        if self.kind == "finite":
            return any(cube.contains_point(pt) for pt in self.points)
        a = cube.corner[0]
        return bool(self.points_1d(a, a + cube.side))

    def meets_closed(self, cube: Cube) -> bool:
        if self.dim == 1:
            a = cube.corner[0]
            return bool(self.points_1d(a, a + cube.side, True, True))
        return self.closed_box_sq_distance(cube) == 0

    # ------------------------------------------------------------ distances
    def nearest_1d(self, x):
        """(largest point <= x, smallest point >= x), either may be None."""
        if self.kind == "lattice":
            return Fraction(math.floor(x)), Fraction(math.ceil(x))
        if self.kind == "subspace":
            z = Fraction(0)
            return (z if z <= x else None), (z if z >= x else None)
        if self.kind == "finite":
            pts = self._sorted_1d
            i = bisect.bisect_right(pts, x)
            j = bisect.bisect_left(pts, x)
            return (pts[i - 1] if i else None), (pts[j] if j < len(pts) else None)
        # gamma: sorted points are -b^g < ... < -1 < (0) < 1 < ... < b^g
        below = above = None
        if x >= 0:
            m = min(self._count_pow_le(x), self.bound)
            if m >= 1:
                below = self.gamma_point(m)
            elif self.include_zero:
                below = Fraction(0)
            elif self.bound >= 1:
                below = -self.gamma_point(1)
            m2 = self._count_pow_lt(x) + 1
            if self.include_zero and x == 0:
                above = Fraction(0)
            elif m2 <= self.bound:
                above = self.gamma_point(m2)
        else:
            m = min(self._count_pow_le(-x), self.bound)
            if m >= 1:
                above = -self.gamma_point(m)
            elif self.include_zero:
                above = Fraction(0)
            else:
                above = self.gamma_point(1)
            m2 = self._count_pow_lt(-x) + 1
            if m2 <= self.bound:
                below = -self.gamma_point(m2)
        return below, above

    def distance_1d(self, x):
        lo, hi = self.nearest_1d(x)
        cands = [x - lo if lo is not None else None, hi - x if hi is not None else None]
        cands = [c for c in cands if c is not None]
        return cands[0] if len(cands) == 1 else exact_min(*cands)

    def squared_distance(self, x) -> Fraction:
        """Exact squared Euclidean distance (not for gamma sets)."""
        x = tuple(Fraction(c) for c in x)
        if self.kind == "gamma":
            raise ValidationError("use distance_1d for gamma sets")
        if self.kind == "lattice":
            return sum((min(c - math.floor(c), math.ceil(c) - c) ** 2 for c in x), Fraction(0))
        if self.kind == "subspace":
            return sum((c * c for c in x[self.free_dims :]), Fraction(0))
        return min(sum(((a - b) ** 2 for a, b in zip(x, pt)), Fraction(0)) for pt in self.points)

    def closed_box_sq_distance(self, cube: Cube) -> Fraction:
        """Exact inf of the squared distance over the closed cube."""
        lo, hi = cube.corner, cube.upper
        if self.kind == "gamma":
            raise ValidationError("use closed_interval_distance for gamma sets")
        if self.kind == "lattice":
            tot = Fraction(0)
            for a, b in zip(lo, hi):
                if math.ceil(a) <= b:
                    continue
                tot += min(a - math.floor(a), math.ceil(b) - b) ** 2
            return tot
        if self.kind == "subspace":
            tot = Fraction(0)
            for a, b in list(zip(lo, hi))[self.free_dims :]:
                if a > 0:
                    tot += a * a
                elif b < 0:
                    tot += b * b
            return tot
        best = None
        for pt in self.points:
            tot = Fraction(0)
            for a, b, c in zip(lo, hi, pt):
                if c < a:
                    tot += (a - c) ** 2
                elif c > b:
                    tot += (c - b) ** 2
            if best is None or tot < best:
                best = tot
        return best

    def closed_interval_distance(self, a, b):
        """Exact inf over [a, b] of the distance to E (1D)."""
        if self.points_1d(a, b, True, True):
            return Fraction(0)
        return exact_min(self.distance_1d(a), self.distance_1d(b))

    def closed_interval_sup_distance(self, a, b):
        """Exact sup over [a, b] of the distance to E (1D)."""
        cands = [self.distance_1d(a), self.distance_1d(b)]
        inner = self.points_1d(a, b, True, True)
        lo, _ = self.nearest_1d(a)
        _, hi = self.nearest_1d(b)
        chain = ([lo] if lo is not None else []) + inner + ([hi] if hi is not None else [])
        for u, v in zip(chain, chain[1:]):
            mid = (u + v) / 2
            if a <= mid <= b:
                cands.append((v - u) / 2)
        return max(cands)


def distance_to_set(x, E: PointSet):
    """dist(x, E), exact: a Fraction when rational, otherwise a Radical."""
    if not isinstance(x, (tuple, list)):
        x = (x,)
    x = tuple(to_rational(c) if not isinstance(c, (Fraction, Radical)) else c for c in x)
    if len(x) != E.dim:
        raise ValidationError("dimension mismatch")
    if E.dim == 1:
        return E.distance_1d(x[0])
    return Radical.power(E.squared_distance(x), Fraction(1, 2))


# ---------------------------------------------------------------- inventories


@dataclass
class FreeCubeInventory:
    root: Cube
    max_depth: int
    cubes: list
    resolution_floor: Fraction
    root_meets_set: bool = True

    def measures(self) -> list:
        return sorted((c.measure for c in self.cubes), reverse=True)

    def covered(self) -> Fraction:
        return sum((c.measure for c in self.cubes), Fraction(0))


def free_cube_inventory(E: PointSet, Q0: Cube, J: int) -> FreeCubeInventory:
    """Maximal E-free dyadic subcubes of Q0 down to depth J (depth-first scan)."""
    if J < 0:
        raise ValidationError("depth must be nonnegative")
    check_budget((1 << J) ** Q0.dim, "cells of inventory depth")
    out = []
    root = DyadicCube.top(Q0)
    finite = E.kind == "finite"

    def visit(dc: DyadicCube, pts):
        cube = dc.cube
        if finite:
            pts = [pt for pt in pts if cube.contains_point(pt)]
            free = not pts
        else:
            free = not E.meets(cube)
        if free:
            out.append(dc)
        elif dc.level < J:
            for ch in dc.children():
                visit(ch, pts)

    visit(root, list(E.points) if finite else None)
    out.sort(key=lambda d: (d.level, d.offsets))
    meets = not (out and out[0].level == 0)
    return FreeCubeInventory(Q0, J, out, Q0.measure / (1 << (J * Q0.dim)), root_meets_set=meets)


@dataclass(frozen=True)
class VolumeScale:
    value: Fraction | None
    below_resolution: bool
    side: Fraction | None  # L_s = V_s^(1/n); exact because V_s is a cube volume

    def __float__(self):
        return float(self.value) if self.value is not None else 0.0


def vs_volume(inv: FreeCubeInventory, s) -> VolumeScale:
    """Largest delta such that free cubes of measure >= delta cover (1 - s)|Q0|."""
    s = Fraction(s)
    if not 0 < s <= 1:
        raise ValidationError("s must lie in (0, 1]")
    target = (1 - s) * inv.root.measure
    cubes = sorted(inv.cubes, key=lambda d: d.level)
    total = Fraction(0)
    for dc in cubes:
        total += dc.measure
        if total >= target:
            return VolumeScale(dc.measure, False, dc.side)
    return VolumeScale(None, True, None)


def brute_force_vs(E: PointSet, Q0: Cube, J: int, s) -> VolumeScale:
    """V_s by scanning every dyadic cube and every candidate delta (test oracle)."""
    s = Fraction(s)
    target = (1 - s) * Q0.measure
    free_by_level = []
    for lev in range(J + 1):
        n = 1 << lev
        free = [
            DyadicCube(Q0, lev, offs)
            for offs in itertools.product(range(n), repeat=Q0.dim)
            if not E.meets(DyadicCube(Q0, lev, offs).cube)
        ]
        free_by_level.append(free)
    for lev in range(J + 1):
        # union of all free cubes of level <= lev, measured on the level-J grid
        covered = set()
        for l2 in range(lev + 1):
            span = 1 << (J - l2)
            for dc in free_by_level[l2]:
                ranges = [range(o * span, (o + 1) * span) for o in dc.offsets]
                covered.update(itertools.product(*ranges))
        mass = len(covered) * Q0.measure / (1 << (J * Q0.dim))
        if free_by_level[lev] and mass >= target and (s < 1 or mass > 0):
            dc = free_by_level[lev][0]
            return VolumeScale(dc.measure, False, dc.side)
    return VolumeScale(None, True, None)


# ---------------------------------------------------------------- gap scales


def fast_float(x) -> float:
    """Double approximation without an exact enclosure."""
    if isinstance(x, Radical):
        return sum(float(c) * float(b) ** (1.0 / x.degree) for b, c in x.terms)
    return float(x)


@dataclass(frozen=True)
class Gap:
    left: object
    right: object
    approx: float = field(default=0.0, compare=False)

    @classmethod
    def between(cls, left, right) -> "Gap":
        return cls(left, right, fast_float(right) - fast_float(left))

    @property
    def length(self):
        return self.right - self.left

    def __float__(self):
        return self.approx


def interval_gaps(E: PointSet, a, b) -> list[Gap]:
    """Maximal E-free open subintervals of (a, b), left to right."""
    if not a < b:
        raise ValidationError("empty interval")
    pts = E.points_1d(a, b, lo_closed=False, hi_closed=False)
    chain = [a] + pts + [b]
    return [Gap.between(u, v) for u, v in zip(chain, chain[1:])]


def _sorted_gaps(gaps: list[Gap]) -> list[Gap]:
    order = sorted(gaps, key=lambda g: -float(g))
    # settle near-ties exactly with an insertion pass over close neighbours
    for i in range(1, len(order)):
        j = i
        while j > 0 and abs(float(order[j - 1]) - float(order[j])) <= 1e-9 * max(1.0, float(order[j])):
            if order[j - 1].length < order[j].length:
                order[j - 1], order[j] = order[j], order[j - 1]
                j -= 1
            else:
                break
    return order


def greedy_gap_scale(gaps: list[Gap], total_length, s):
    """Last gap length in the shortest descending prefix covering (1 - s) of the length."""
    s = Fraction(s)
    if not 0 < s <= 1:
        raise ValidationError("s must lie in (0, 1]")
    order = _sorted_gaps(gaps)
    if s == 1:
        return order[0].length
    target = (1 - s) * total_length
    target_f = float(target)
    run = 0.0
    idx = len(order) - 1
    for i, g in enumerate(order):
        run += float(g)
        if run >= target_f * (1 - 1e-12):
            idx = i
            break

    def exact_prefix(k):
        return radical_sum([g.right for g in order[: k + 1]] + [-g.left for g in order[: k + 1]])

    # adjust the candidate index with exact comparisons
    while idx < len(order) - 1 and exact_prefix(idx) < target:
        idx += 1
    while idx > 0 and exact_prefix(idx - 1) >= target:
        idx -= 1
    if exact_prefix(idx) < target:
        raise ValidationError("gaps do not cover the requested fraction")
    return order[idx].length


def gap_length_scale(E: PointSet, interval, s):
    """L~_s of an open interval: greedy over its E-free gaps sorted by length."""
    a, b = interval
    return greedy_gap_scale(interval_gaps(E, a, b), b - a, s)


# ---------------------------------------------------------------- distance discretisation


_TIE = 1e-9


def _close(fa: float, fb: float) -> bool:
    return abs(fa - fb) <= _TIE * max(1.0, abs(fa), abs(fb))


def fast_lt(a, b) -> bool:
    """a < b, decided in floating point unless the two are close."""
    fa, fb = fast_float(a), fast_float(b)
    if not _close(fa, fb):
        return fa < fb
    return a < b


def exact_min(a, b):
    return b if fast_lt(b, a) else a


class LazyGap:
    """The nonnegative difference hi - lo, materialised only on demand."""

    __slots__ = ("lo", "hi", "approx")

    def __init__(self, lo, hi, approx: float):
        self.lo, self.hi, self.approx = lo, hi, approx

    def exact(self):
        return self.hi - self.lo

    def __float__(self):
        return self.approx


def _exact(v):
    return v.exact() if isinstance(v, LazyGap) else v


def order_statistic(values: Sequence, k: int):
    """The k-th smallest (0-based) of exact values, sorted through float keys.

    Only the cluster of values whose keys are near the pivot is compared exactly.
    """
    if not 0 <= k < len(values):
        raise ValidationError("order statistic index out of range")
    keys = [v.approx if isinstance(v, LazyGap) else fast_float(v) for v in values]
    pivot = sorted(keys)[k]
    below = sum(1 for x in keys if x < pivot and not _close(x, pivot))
    cluster = [_exact(v) for v, x in zip(values, keys) if _close(x, pivot)]
    cluster.sort(key=functools.cmp_to_key(lambda a, b: (a > b) - (a < b)))
    return cluster[k - below]


def equal_mass_upper_median(values: Sequence, s):
    """Upper s-median of equally weighted values: the (floor(s N))-th smallest."""
    return order_statistic(values, math.floor(Fraction(s) * len(values)))


def _sweep_lower_1d(E: PointSet, Q: Cube, J: int) -> list:
    a, h = Q.corner[0], Q.side / (1 << J)
    b = Q.upper[0]
    lo, _ = E.nearest_1d(a)
    _, hi = E.nearest_1d(b)
    pts = ([lo] if lo is not None else []) + E.points_1d(a, b, True, True) + ([hi] if hi is not None else [])
    fpts = [fast_float(x) for x in pts]

    def lt(i, x, fx):  # pts[i] < x
        return fpts[i] < fx if not _close(fpts[i], fx) else pts[i] < x

    def le(i, x, fx):  # pts[i] <= x
        return fpts[i] < fx if not _close(fpts[i], fx) else pts[i] <= x

    out = []
    j = 0
    for i in range(1 << J):
        x0, x1 = a + i * h, a + (i + 1) * h
        f0, f1 = float(x0), float(x1)
        while j < len(pts) and lt(j, x0, f0):
            j += 1
        if j < len(pts) and le(j, x1, f1):
            out.append(Fraction(0))
            continue
        cands = []
        if j > 0:
            cands.append(LazyGap(pts[j - 1], x0, f0 - fpts[j - 1]))
        if j < len(pts):
            cands.append(LazyGap(x1, pts[j], fpts[j] - f1))
        if len(cands) == 2 and _close(cands[0].approx, cands[1].approx):
            best = cands[0] if cands[0].exact() <= cands[1].exact() else cands[1]
        else:
            best = min(cands, key=lambda g: g.approx)
        out.append(best)
    return out


def lower_distance_values(E: PointSet, Q: Cube, J: int) -> list:
    """Per level-J cell of Q: inf of dist(., E) there (1D) or of its square (n >= 2).

    Gamma-set values come back as :class:`LazyGap` objects.
    """
    check_budget((1 << J) ** Q.dim, "distance cells")
    if E.dim == 1 and E.kind == "gamma":
        return _sweep_lower_1d(E, Q, J)
    out = []
    for dc in cell_partition(Q, J):
        c = dc.cube
        if E.dim == 1:
            out.append(E.closed_interval_distance(c.corner[0], c.upper[0]))
        else:
            out.append(E.closed_box_sq_distance(c))
    return out


def lower_distance_function(E: PointSet, Q: Cube, J: int) -> StepFunction:
    """Step function form of :func:`lower_distance_values`."""
    return StepFunction(Q, J, [_exact(v) for v in lower_distance_values(E, Q, J)])


def upper_distance_function(E: PointSet, Q: Cube, J: int) -> StepFunction:
    """1D step function with the sup of dist(., E) on each cell."""
    if E.dim != 1:
        raise ValidationError("upper discretisation is implemented on the line")
    return StepFunction(
        Q, J, [E.closed_interval_sup_distance(dc.cube.corner[0], dc.cube.upper[0]) for dc in cell_partition(Q, J)]
    )


def median_distance_power(lower_values: Sequence, s, dim: int):
    """M_s(d, Q)^n from a lower discretisation (d in 1D, d^2 in n >= 2)."""
    m = equal_mass_upper_median(lower_values, s)
    if dim == 1:
        return m
    return Radical.power(m, Fraction(dim, 2)) if m else Fraction(0)


def resolution_depth(E: PointSet, Q: Cube, base: int, refine: int = 8) -> int:
    """Depth at which 1D cells are at most 1/refine of the smallest gap near Q."""
    if E.dim != 1:
        return base
    a, b = Q.corner[0], Q.upper[0]
    pts = E.points_1d(a, b, True, True)
    lo, _ = E.nearest_1d(a)
    _, hi = E.nearest_1d(b)
    chain = ([lo] if lo is not None else []) + pts + ([hi] if hi is not None else [])
    gaps = [fast_float(v) - fast_float(u) for u, v in zip(chain, chain[1:]) if fast_float(v) > fast_float(u)]
    if not gaps:
        return base
    need = math.ceil(math.log2(float(Q.side) * refine / min(gaps)))
    return max(base, need)


def lower_constant_holds(m_pow, V, n: int) -> bool:
    """M^n <= (2 sqrt(n))^n V, i.e. M^(2n) ... compared exactly."""
    if n == 1:
        return m_pow <= 2 * V
    # (2 sqrt n)^n = 2^n n^(n/2)
    bound = Radical.power(Fraction(4 * n), Fraction(n, 2)) * V
    return m_pow <= bound


def upper_eta(p: MedianParams, n: int):
    """eta with 1 - eta^n (1 - s) = t."""
    return Radical.power((1 - p.t) / (1 - p.s), Fraction(1, n))


@dataclass
class SandwichRecord:
    cube: Cube
    depth: int
    V_s: VolumeScale
    m_s_pow: object
    m_t_pow: object
    lower_ok: bool
    lower_ok_cube_constant: bool
    upper_ok: bool | None
    eta: object


def prop_sandwich(E: PointSet, Q: Cube, p: MedianParams, J: int, adaptive: bool = True) -> SandwichRecord:
    """Both halves of the median/volume comparison on one cube.

    lower: M_s(d)^n <= c_n V_s with c_n = 2 in 1D and (2 sqrt n)^n otherwise;
    ``lower_ok_cube_constant`` records the same test with 2^n.
    upper: V_s <= (1 - eta)^-1 M_t(d)^n with eta^n = (1 - t)/(1 - s).
    Medians use the cellwise infimum of d, which bounds d from below, so the
    lower test is rigorous relative to the depth-J inventory.  With
    ``adaptive`` the depth is raised until 1D cells resolve the local gaps.
    """
    n = Q.dim
    if adaptive:
        J = resolution_depth(E, Q, J)
    inv = free_cube_inventory(E, Q, J)
    V = vs_volume(inv, p.s)
    lower = lower_distance_values(E, Q, J)
    ms = median_distance_power(lower, p.s, n)
    mt = median_distance_power(lower, p.t, n)
    eta = upper_eta(p, n)
    if V.below_resolution:
        lower_ok = cube_ok = ms == 0
        upper_ok = None
    else:
        lower_ok = lower_constant_holds(ms, V.value, n)
        cube_ok = ms <= 2**n * V.value if n == 1 else ms * ms <= (2**n * V.value) ** 2
        upper_ok = V.value - V.value * eta <= mt
    return SandwichRecord(Q, J, V, ms, mt, lower_ok, cube_ok, upper_ok, eta)


# ---------------------------------------------------------------- reports


@dataclass
class CubeScales:
    cube: Cube
    meets: bool
    V_s: VolumeScale | None = None
    V_t: VolumeScale | None = None
    V_1: VolumeScale | None = None
    weak_ratio: Fraction | None = None
    median_ratio: Fraction | None = None
    porous_ratio: Fraction | None = None
    sandwich: SandwichRecord | None = None


@dataclass
class PorosityReport:
    family: list
    rows: list
    worst_median_ratio: Fraction | None
    worst_weak_ratio: Fraction | None
    worst_porous_ratio: Fraction | None
    above_resolution: bool
    porous: bool
    weakly_porous: bool
    median_porous: bool
    delta_inverse: Fraction
    params: MedianParams | None = None
    notes: list = field(default_factory=list)


def _ratio(num: VolumeScale, den: VolumeScale):
    if num.value is None or den.value is None:
        return None
    return num.value / den.value


def _cube_scales(args) -> CubeScales:
    E, Q, p, J, sandwich = args
    if not E.meets(Q):
        return CubeScales(Q, False)
    inv = free_cube_inventory(E, Q, J)
    Vs, Vt, V1 = vs_volume(inv, p.s), vs_volume(inv, p.t), vs_volume(inv, 1)
    row = CubeScales(
        Q,
        True,
        Vs,
        Vt,
        V1,
        weak_ratio=_ratio(V1, Vs),
        median_ratio=_ratio(Vt, Vs),
        porous_ratio=Q.measure / V1.value if V1.value else None,
    )
    if sandwich and E.dim == 1:
        row.sandwich = prop_sandwich(E, Q, p, J)
    return row


def porosity_report(
    E: PointSet,
    family: Sequence[Cube],
    p: MedianParams,
    J: int,
    delta_inverse=64,
    sandwich: bool = True,
    jobs: int = 1,
) -> PorosityReport:
    """Per-cube volume scales and porosity flags over a finite test family.

    Cubes that miss E are listed but excluded from the ratio statistics.
    Flags assert bounded ratios on this family only.  ``jobs > 1`` spreads
    cubes over worker processes; rows keep the family order.
    """
    if not family:
        raise ValidationError("empty family")
    delta_inverse = Fraction(delta_inverse)
    tasks = [(E, Q, p, J, sandwich) for Q in family]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_cube_scales, tasks))
    else:
        rows = [_cube_scales(t) for t in tasks]
    resolved = all(r.V_s is None or not r.V_s.below_resolution for r in rows)

    def worst(attr):
        vals = [getattr(r, attr) for r in rows if r.meets]
        if not vals or any(v is None for v in vals):
            return None
        return max(vals)

    wm, ww, wp = worst("median_ratio"), worst("weak_ratio"), worst("porous_ratio")
    return PorosityReport(
        family=list(family),
        rows=rows,
        worst_median_ratio=wm,
        worst_weak_ratio=ww,
        worst_porous_ratio=wp,
        above_resolution=resolved,
        porous=wp is not None and wp <= delta_inverse,
        weakly_porous=ww is not None and ww <= delta_inverse,
        median_porous=wm is not None and wm <= delta_inverse,
        delta_inverse=delta_inverse,
        params=p,
    )


def read_point_file(text: str) -> PointSet:
    pts = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            pts.append(tuple(to_rational(tok) for tok in line.split()))
        except ValidationError:
            raise ValidationError(f"line {lineno}: cannot parse point {line!r}")
    if not pts:
        raise ValidationError("point file has no points")
    dims = {len(pt) for pt in pts}
    if len(dims) != 1:
        raise ValidationError("points have mixed dimensions")
    return PointSet("finite", dims.pop(), pts)
