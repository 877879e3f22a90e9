"""Exact geometry and the step-function model.

Everything here is built on :class:`fractions.Fraction`.  Irrational numbers
of the form ``c * b**(1/q)`` (powers ``m**gamma`` with rational ``gamma``)
are handled by :class:`Radical`, which keeps an exact normal form and decides
signs by refining rational enclosures.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

DEFAULT_CELL_BUDGET = 2**20
BUDGET_ENV = "MEDIANOSC_CELL_BUDGET"


class MedianOscError(Exception):
    """Base class for library errors."""


class ValidationError(MedianOscError, ValueError):
    pass


class BudgetError(MedianOscError):
    pass


class EmptyOverlapError(MedianOscError):
    pass


class LatticeError(MedianOscError):
    pass


class InvariantViolation(MedianOscError):
    """Raised when a checked mathematical invariant fails."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


def cell_budget() -> int:
    raw = os.environ.get(BUDGET_ENV)
    if raw is None:
        return DEFAULT_CELL_BUDGET
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{BUDGET_ENV} must be an integer, got {raw!r}")
    if value <= 0:
        raise ValidationError(f"{BUDGET_ENV} must be positive")
    return value


def check_budget(count: int, what: str = "cells") -> None:
    budget = cell_budget()
    if count > budget:
        raise BudgetError(f"{count} {what} exceed the cell budget {budget}")


# ---------------------------------------------------------------- rationals


def to_rational(x) -> Fraction:
    """Convert ints, Fractions, ``"p/q"`` strings and decimal strings exactly.

    Floats are rejected: they are almost never the number the caller meant.
    """
    if isinstance(x, bool):
        raise ValidationError("booleans are not rationals")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        text = x.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"not a rational: {x!r}")
    raise ValidationError(f"cannot convert {type(x).__name__} to a rational exactly")


def format_rational(q) -> str:
    if isinstance(q, Radical):
        return str(q)
    q = Fraction(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------- radicals


def integer_root(x: int, q: int) -> int:
    """floor(x ** (1/q)) for x >= 0."""
    if x < 0:
        raise ValueError("negative radicand")
    if x < 2 or q == 1:
        return x
    if q == 2:
        return math.isqrt(x)
    r = 1 << ((x.bit_length() + q - 1) // q)
    while True:
        nxt = ((q - 1) * r + x // r ** (q - 1)) // q
        if nxt >= r:
            break
        r = nxt
    while r**q > x:
        r -= 1
    while (r + 1) ** q <= x:
        r += 1
    return r


@lru_cache(maxsize=65536)
def _factorize(n: int) -> tuple:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            e = 0
            while n % d == 0:
                n //= d
                e += 1
            out.append((d, e))
        d += 1 if d == 2 else 2
    if n > 1:
        out.append((n, 1))
    return tuple(out)


def _split_power(n: int, q: int) -> tuple[int, int]:
    """Write n = a**q * b with b q-th-power free; return (a, b)."""
    a = b = 1
    for prime, e in _factorize(n):
        a *= prime ** (e // q)
        b *= prime ** (e % q)
    return a, b


class Radical:
    """A real number ``sum_b c_b * b**(1/q)`` with rational ``c_b``.

    Radicands are q-th-power free, so distinct radicands are linearly
    independent over the rationals and the normal form decides equality.
    Rational results are returned as plain Fractions by the arithmetic.
    """

    __slots__ = ("degree", "terms")

    def __init__(self, degree: int, terms):
        self.degree = degree
        self.terms = terms  # tuple of (radicand, coeff), sorted, coeff != 0

    @staticmethod
    def build(degree: int, coeffs: dict):
        merged: dict[int, Fraction] = {}
        for b, c in coeffs.items():
            if c:
                merged[b] = merged.get(b, Fraction(0)) + c
        terms = tuple(sorted((b, c) for b, c in merged.items() if c))
        if not terms:
            return Fraction(0)
        if len(terms) == 1 and terms[0][0] == 1:
            return terms[0][1]
        return Radical(degree, terms)

    @staticmethod
    def power(base, gamma) -> "Radical | Fraction":
        """Exact ``base ** gamma`` for rational base >= 0 and rational gamma."""
        base = Fraction(base)
        gamma = Fraction(gamma)
        if base < 0:
            raise ValueError("negative base")
        if base == 0:
            if gamma <= 0:
                raise ZeroDivisionError("0 to a non-positive power")
            return Fraction(0)
        if gamma < 0:
            return Radical.power(1 / base, -gamma)
        p, q = gamma.numerator, gamma.denominator
        a, b = base.numerator, base.denominator
        k = -(-p // q)
        radicand = a**p * b ** (k * q - p)
        outer, inner = _split_power(radicand, q)
        coeff = Fraction(outer, b**k)
        return Radical.build(q, {inner: coeff})

    def _coeffs(self, degree: int) -> dict:
        if degree == self.degree:
            return dict(self.terms)
        factor = degree // self.degree
        out = {}
        for b, c in self.terms:
            outer, inner = _split_power(b**factor, degree)
            out[inner] = out.get(inner, 0) + c * outer
        return out

    @staticmethod
    def _coerce(x):
        if isinstance(x, Radical):
            return x
        if isinstance(x, (int, Fraction)):
            return Radical(1, ((1, Fraction(x)),) if x else ())
        return None

    def _combine(self, other, sign):
        o = Radical._coerce(other)
        if o is None:
            return NotImplemented
        deg = self.degree * o.degree // math.gcd(self.degree, o.degree)
        coeffs = self._coeffs(deg)
        for b, c in o._coeffs(deg).items():
            coeffs[b] = coeffs.get(b, 0) + sign * c
        return Radical.build(deg, coeffs)

    def __add__(self, other):
        return self._combine(other, 1)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1)

    def __rsub__(self, other):
        res = self._combine(other, -1)
        return res if res is NotImplemented else -res

    def __neg__(self):
        return Radical(self.degree, tuple((b, -c) for b, c in self.terms))

    def __pos__(self):
        return self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return Radical.build(self.degree, {b: c * other for b, c in self.terms})
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            return self * (1 / Fraction(other))
        return NotImplemented

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def enclose(self, bits: int = 64) -> tuple[Fraction, Fraction]:
        """Rational lo <= value <= hi with hi - lo <= (number of terms) * 2**-bits."""
        q = self.degree
        scale = 1 << bits
        lo = hi = Fraction(0)
        for b, c in self.terms:
            if b == 1:
                lo += c
                hi += c
                continue
            r = integer_root(b << (q * bits), q)
            lo_root = Fraction(r, scale)
            hi_root = Fraction(r + 1, scale)
            if c > 0:
                lo += c * lo_root
                hi += c * hi_root
            else:
                lo += c * hi_root
                hi += c * lo_root
        return lo, hi

    def sign(self) -> int:
        if not self.terms:
            return 0
        bits = 64
        while True:
            lo, hi = self.enclose(bits)
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            bits *= 2  # nonzero by linear independence, so this terminates

    def _cmp(self, other):
        diff = self - other
        if diff is NotImplemented:
            return None
        if isinstance(diff, Fraction):
            return (diff > 0) - (diff < 0)
        return diff.sign()

    def __lt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c < 0

    def __le__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c <= 0

    def __gt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c > 0

    def __ge__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c >= 0

    def __eq__(self, other):
        o = Radical._coerce(other)
        if o is None:
            return NotImplemented
        return self._cmp(o) == 0

    def __hash__(self):
        return hash((self.degree, self.terms))

    def __float__(self):
        lo, hi = self.enclose(64)
        return float((lo + hi) / 2)

    def __repr__(self):
        return f"Radical({self})"

    def __str__(self):
        parts = []
        for b, c in self.terms:
            if b == 1:
                parts.append(format_rational(c))
            else:
                parts.append(f"{format_rational(c)}*{b}^(1/{self.degree})")
        return " + ".join(parts)


def to_float(x) -> float:
    return float(x)


# ---------------------------------------------------------------- cubes


@dataclass(frozen=True, eq=False)
class Cube:
    """Half-open box prod_i [corner_i, corner_i + side)."""

    corner: tuple
    side: Fraction

    def __post_init__(self):
        object.__setattr__(self, "corner", tuple(Fraction(c) for c in self.corner))
        object.__setattr__(self, "side", Fraction(self.side))
        if self.side <= 0:
            raise ValidationError("cube side must be positive")
        if not self.corner:
            raise ValidationError("cube needs at least one coordinate")
        object.__setattr__(self, "_hash", hash((self.corner, self.side)))

    def __eq__(self, other):
        if not isinstance(other, Cube):
            return NotImplemented
        return self._hash == other._hash and self.corner == other.corner and self.side == other.side

    def __hash__(self):
        return self._hash

    @classmethod
    def of(cls, corner, side) -> "Cube":
        if not isinstance(corner, (tuple, list)):
            corner = (corner,)
        return cls(tuple(to_rational(c) for c in corner), to_rational(side))

    @property
    def dim(self) -> int:
        return len(self.corner)

    @property
    def measure(self) -> Fraction:
        return self.side**self.dim

    @property
    def upper(self) -> tuple:
        return tuple(c + self.side for c in self.corner)

    @property
    def center(self) -> tuple:
        return tuple(c + self.side / 2 for c in self.corner)

    def contains_cube(self, other: "Cube") -> bool:
        return all(
            a <= b and b + other.side <= a + self.side
            for a, b in zip(self.corner, other.corner)
        )

    def contains_point(self, x) -> bool:
        return all(a <= xi < a + self.side for a, xi in zip(self.corner, x))

    def scaled(self, factor) -> "Cube":
        """Concentric cube with side multiplied by ``factor``."""
        factor = Fraction(factor)
        side = self.side * factor
        return Cube(tuple(c + (self.side - side) / 2 for c in self.corner), side)

    def __str__(self):
        cs = ",".join(format_rational(c) for c in self.corner)
        return f"[{cs}]+{format_rational(self.side)}"


@dataclass(frozen=True)
class DyadicCube:
    root: Cube
    level: int
    offsets: tuple

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(int(o) for o in self.offsets))
        if self.level < 0:
            raise LatticeError("negative dyadic level")
        if len(self.offsets) != self.root.dim:
            raise LatticeError("offset vector has the wrong length")
        n = 1 << self.level
        if any(not 0 <= o < n for o in self.offsets):
            raise LatticeError(f"offsets {self.offsets} outside [0, {n})")

    @classmethod
    def top(cls, root: Cube) -> "DyadicCube":
        return cls(root, 0, (0,) * root.dim)

    @property
    def key(self) -> tuple:
        return (self.level, self.offsets)

    @property
    def side(self) -> Fraction:
        return self.root.side / (1 << self.level)

    @property
    def measure(self) -> Fraction:
        return self.side**self.root.dim

    @property
    def cube(self) -> Cube:
        h = self.side
        return Cube(tuple(c + o * h for c, o in zip(self.root.corner, self.offsets)), h)

    def parent(self) -> "DyadicCube":
        """Parent cube; the top cube is its own parent."""
        if self.level == 0:
            return self
        return DyadicCube(self.root, self.level - 1, tuple(o >> 1 for o in self.offsets))

    def children(self) -> list["DyadicCube"]:
        base = [2 * o for o in self.offsets]
        out = []
        for bits in itertools.product((0, 1), repeat=len(base)):
            out.append(DyadicCube(self.root, self.level + 1, tuple(b + d for b, d in zip(base, bits))))
        return out

    def ancestor(self, level: int) -> "DyadicCube":
        shift = self.level - level
        return DyadicCube(self.root, level, tuple(o >> shift for o in self.offsets))

    def contains(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        return other.ancestor(self.level).offsets == self.offsets


def cell_partition(root: Cube, J: int) -> list[DyadicCube]:
    """All cells of the level-J lattice, last coordinate varying fastest."""
    if J < 0:
        raise ValidationError("level must be nonnegative")
    n = root.dim
    check_budget((1 << J) ** n)
    rng = range(1 << J)
    return [DyadicCube(root, J, offs) for offs in itertools.product(rng, repeat=n)]


def dyadic_of(root: Cube, cube: Cube) -> DyadicCube | None:
    """Identify ``cube`` as a dyadic subcube of ``root`` if it is one."""
    if cube.dim != root.dim:
        return None
    ratio = root.side / cube.side
    if ratio.denominator != 1 or ratio.numerator & (ratio.numerator - 1):
        return None
    level = ratio.numerator.bit_length() - 1
    offs = []
    for a, c in zip(root.corner, cube.corner):
        o = (c - a) / cube.side
        if o.denominator != 1 or not 0 <= o < ratio:
            return None
        offs.append(int(o))
    return DyadicCube(root, level, tuple(offs))


def interval_overlap(a0, a1, b0, b1):
    lo = max(a0, b0)
    hi = min(a1, b1)
    return hi - lo if hi > lo else Fraction(0)


def cube_overlap_measure(A: Cube, B: Cube) -> Fraction:
    if A.dim != B.dim:
        raise ValidationError("dimension mismatch")
    out = Fraction(1)
    for a, b in zip(A.corner, B.corner):
        piece = interval_overlap(a, a + A.side, b, b + B.side)
        if not piece:
            return Fraction(0)
        out *= piece
    return out


# ---------------------------------------------------------------- distributions


class WeightedValueMultiset:
    """Finite value distribution: sorted distinct values with positive masses."""

    __slots__ = ("entries", "total_mass")

    def __init__(self, pairs: Iterable):
        merged: dict = {}
        for value, mass in pairs:
            if mass < 0:
                raise ValidationError("negative mass")
            if mass:
                merged[value] = merged.get(value, 0) + mass
        self.entries = tuple(sorted(merged.items(), key=lambda e: e[0]))
        self.total_mass = sum((m for _, m in self.entries), Fraction(0))

    def __len__(self):
        return len(self.entries)

    def __eq__(self, other):
        return isinstance(other, WeightedValueMultiset) and self.entries == other.entries

    def __repr__(self):
        body = ", ".join(f"({format_rational(v)}, {format_rational(m)})" for v, m in self.entries)
        return f"WeightedValueMultiset({body})"

    @property
    def values(self) -> tuple:
        return tuple(v for v, _ in self.entries)

    def mean(self):
        return sum((v * m for v, m in self.entries), Fraction(0)) / self.total_mass

    def mass_below(self, lam):
        return sum((m for v, m in self.entries if v < lam), Fraction(0))

    def mass_above(self, lam):
        return sum((m for v, m in self.entries if v > lam), Fraction(0))

    def map(self, g) -> "WeightedValueMultiset":
        return WeightedValueMultiset((g(v), m) for v, m in self.entries)


# ---------------------------------------------------------------- step functions


class StepFunction:
    """Piecewise constant function on the level-J cells of a root cube."""

    __slots__ = ("root", "resolution", "values", "_dyadic_cache", "_coded")

    def __init__(self, root: Cube, resolution: int, values: Sequence):
        if resolution < 0:
            raise ValidationError("resolution must be nonnegative")
        count = (1 << resolution) ** root.dim
        check_budget(count)
        values = tuple(v if isinstance(v, Radical) else Fraction(v) for v in values)
        if len(values) != count:
            raise ValidationError(f"expected {count} values, got {len(values)}")
        self.root = root
        self.resolution = resolution
        self.values = values
        self._dyadic_cache: dict = {}
        self._coded = None

    def coded(self):
        """(distinct values, integer code array of shape (2^J,)*n)."""
        if self._coded is None:
            distinct = sorted(set(self.values))
            lookup = {v: i for i, v in enumerate(distinct)}
            arr = np.array([lookup[v] for v in self.values], dtype=np.int64)
            self._coded = (distinct, arr.reshape((self.cells_per_axis,) * self.dim))
        return self._coded

    def block_counts(self, slices) -> np.ndarray:
        distinct, arr = self.coded()
        return np.bincount(arr[tuple(slices)].ravel(), minlength=len(distinct))

    @property
    def dim(self) -> int:
        return self.root.dim

    @property
    def cells_per_axis(self) -> int:
        return 1 << self.resolution

    @property
    def cell_measure(self) -> Fraction:
        return (self.root.side / self.cells_per_axis) ** self.dim

    def index(self, offsets) -> int:
        n = self.cells_per_axis
        idx = 0
        for o in offsets:
            idx = idx * n + o
        return idx

    def offsets(self, index: int) -> tuple:
        n = self.cells_per_axis
        out = []
        for _ in range(self.dim):
            index, r = divmod(index, n)
            out.append(r)
        return tuple(reversed(out))

    def cell(self, index: int) -> DyadicCube:
        return DyadicCube(self.root, self.resolution, self.offsets(index))

    def value_at(self, x):
        if not self.root.contains_point(x):
            raise ValidationError("point outside the root cube")
        h = self.root.side / self.cells_per_axis
        offs = [math.floor((xi - c) / h) for xi, c in zip(x, self.root.corner)]
        return self.values[self.index(offs)]

    def map(self, g) -> "StepFunction":
        return StepFunction(self.root, self.resolution, [g(v) for v in self.values])

    def cell_indices(self, dc: DyadicCube) -> list[int]:
        """Indices of resolution cells inside a dyadic cube of level <= J."""
        if dc.level > self.resolution:
            raise LatticeError("dyadic cube finer than the resolution")
        span = 1 << (self.resolution - dc.level)
        ranges = [range(o * span, (o + 1) * span) for o in dc.offsets]
        return [self.index(offs) for offs in itertools.product(*ranges)]

    def refine(self, extra: int) -> "StepFunction":
        """Same function on a lattice ``extra`` levels finer."""
        J = self.resolution + extra
        n = 1 << J
        vals = []
        for offs in itertools.product(range(n), repeat=self.dim):
            vals.append(self.values[self.index(tuple(o >> extra for o in offs))])
        return StepFunction(self.root, J, vals)

    def subfunction(self, dc: DyadicCube) -> "StepFunction":
        """Restriction to a dyadic cube, as a step function rooted there."""
        if dc.root != self.root:
            raise LatticeError("cube belongs to another lattice")
        J = self.resolution - dc.level
        if J < 0:
            raise LatticeError("dyadic cube finer than the resolution")
        return StepFunction(dc.cube, J, [self.values[i] for i in self.cell_indices(dc)])

    def dyadic_distribution(self, dc: DyadicCube) -> WeightedValueMultiset:
        own = dc.root == self.root
        if own:
            cached = self._dyadic_cache.get(dc.key)
            if cached is not None:
                return cached
        if dc.level > self.resolution:
            raise LatticeError("dyadic cube finer than the resolution")
        span = 1 << (self.resolution - dc.level)
        counts = self.block_counts([slice(o * span, (o + 1) * span) for o in dc.offsets])
        distinct = self.coded()[0]
        cm = self.cell_measure
        dist = WeightedValueMultiset(
            (distinct[i], int(c) * cm) for i, c in enumerate(counts) if c
        )
        if own:
            self._dyadic_cache[dc.key] = dist
        return dist

    def __eq__(self, other):
        return (
            isinstance(other, StepFunction)
            and self.root == other.root
            and self.resolution == other.resolution
            and self.values == other.values
        )

    def __repr__(self):
        return f"StepFunction(root={self.root}, J={self.resolution}, cells={len(self.values)})"


def _axis_segments(f: StepFunction, Q: Cube) -> list[list[tuple[slice, Fraction]]]:
    """Per axis, runs of cells with a common overlap length with Q."""
    h = f.root.side / f.cells_per_axis
    n = f.cells_per_axis
    axes = []
    for c, q in zip(f.root.corner, Q.corner):
        lo = max(0, math.floor((q - c) / h))
        hi = min(n, math.ceil((q + Q.side - c) / h))
        runs: list = []
        for i in (lo, hi - 1):
            if lo <= i < hi and (not runs or runs[-1][0].start != i):
                piece = interval_overlap(c + i * h, c + (i + 1) * h, q, q + Q.side)
                if piece:
                    runs.append((slice(i, i + 1), piece))
        first = lo + 1 if runs and runs[0][0].start == lo and runs[0][1] != h else lo
        last = hi - 1 if runs and runs[-1][0].start == hi - 1 and runs[-1][1] != h else hi
        full = [(slice(first, last), h)] if last > first else []
        partial = [r for r in runs if r[1] != h]
        axes.append(partial[:1] + full + partial[1:])
    return axes


def restrict_distribution(f: StepFunction, Q: Cube) -> WeightedValueMultiset:
    """Value distribution of f on Q as (value, |cell ∩ Q|) pairs."""
    if Q.dim != f.dim:
        raise ValidationError("dimension mismatch")
    dc = dyadic_of(f.root, Q)
    if dc is not None and dc.level <= f.resolution:
        return f.dyadic_distribution(dc)
    axes = _axis_segments(f, Q)
    if any(not row for row in axes):
        raise EmptyOverlapError(f"cube {Q} does not meet the root {f.root}")
    distinct = f.coded()[0]
    masses: dict = {}
    for combo in itertools.product(*axes):
        weight = Fraction(1)
        for _, piece in combo:
            weight *= piece
        counts = f.block_counts([sl for sl, _ in combo])
        for i in np.flatnonzero(counts):
            masses[i] = masses.get(i, 0) + weight * int(counts[i])
    return WeightedValueMultiset((distinct[i], m) for i, m in masses.items())


def brute_restrict_distribution(f: StepFunction, Q: Cube) -> WeightedValueMultiset:
    """Cell-by-cell version of :func:`restrict_distribution` (test oracle)."""
    pairs = []
    for idx, v in enumerate(f.values):
        pairs.append((v, cube_overlap_measure(f.cell(idx).cube, Q)))
    dist = WeightedValueMultiset(pairs)
    if not dist.entries:
        raise EmptyOverlapError(f"cube {Q} does not meet the root {f.root}")
    return dist


def inside_slices(f: StepFunction, Q: Cube) -> list[slice] | None:
    """Per axis index ranges of resolution cells entirely inside Q."""
    h = f.root.side / f.cells_per_axis
    n = f.cells_per_axis
    out = []
    for c, q in zip(f.root.corner, Q.corner):
        lo = max(0, math.ceil((q - c) / h))
        hi = min(n, math.floor((q + Q.side - c) / h))
        if hi <= lo:
            return None
        out.append(slice(lo, hi))
    return out


def cells_inside(f: StepFunction, Q: Cube) -> list[int]:
    """Indices of resolution cells entirely contained in Q."""
    if Q.dim != f.dim:
        raise ValidationError("dimension mismatch")
    sl = inside_slices(f, Q)
    if sl is None:
        return []
    ranges = [range(x.start, x.stop) for x in sl]
    return [f.index(offs) for offs in itertools.product(*ranges)]


def accumulate_over_cells(f: StepFunction, weighted_cubes) -> list:
    """Per cell, the sum of weights of the cubes containing that whole cell.

    Uses an n-dimensional difference array, so the cost is linear in the
    number of cubes plus the number of cells.
    """
    n = f.cells_per_axis
    diff = np.zeros((n + 1,) * f.dim, dtype=object)
    diff[...] = Fraction(0)
    for Q, w in weighted_cubes:
        if not w:
            continue
        sl = inside_slices(f, Q)
        if sl is None:
            continue
        for bits in itertools.product((0, 1), repeat=f.dim):
            idx = tuple(x.stop if b else x.start for x, b in zip(sl, bits))
            diff[idx] += -w if sum(bits) % 2 else w
    for axis in range(f.dim):
        diff = np.cumsum(diff, axis=axis)
    core = diff[(slice(0, n),) * f.dim]
    return list(core.ravel())


# ---------------------------------------------------------------- JSON


def step_function_to_dict(f: StepFunction) -> dict:
    return {
        "dim": f.dim,
        "corner": [format_rational(c) for c in f.root.corner],
        "side": format_rational(f.root.side),
        "resolution": f.resolution,
        "values": [format_rational(v) for v in f.values],
    }


def step_function_from_dict(data: dict) -> StepFunction:
    try:
        dim = int(data["dim"])
        corner = [to_rational(c) for c in data["corner"]]
        side = to_rational(data["side"])
        J = int(data["resolution"])
        values = [to_rational(v) for v in data["values"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed step function: {exc}")
    if len(corner) != dim:
        raise ValidationError("corner length does not match dim")
    return StepFunction(Cube(tuple(corner), side), J, values)


def dump_step_function(f: StepFunction) -> str:
    return json.dumps(step_function_to_dict(f))


def load_step_function(text: str) -> StepFunction:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON: {exc.msg}")
    return step_function_from_dict(data)


def random_step_function(rng, dim: int, resolution: int, root: Cube | None = None, spread: int = 6) -> StepFunction:
    """Seeded step function with small rational values (for suites and examples).

    ``rng`` is a :class:`random.Random`; values repeat often so that ties occur.
    """
    root = root or Cube(tuple(Fraction(0) for _ in range(dim)), Fraction(1))
    count = (1 << resolution) ** dim
    check_budget(count)
    palette = [Fraction(rng.randint(-spread, spread), rng.choice((1, 2, 3, 4))) for _ in range(rng.randint(1, 8))]
    return StepFunction(root, resolution, [rng.choice(palette) for _ in range(count)])
