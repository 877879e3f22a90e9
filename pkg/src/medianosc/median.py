"""Upper s-medians, median differences, local mean oscillation and sigma terms."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .core import (
    Cube,
    DyadicCube,
    EmptyOverlapError,
    LatticeError,
    StepFunction,
    ValidationError,
    WeightedValueMultiset,
    restrict_distribution,
)


@dataclass(frozen=True)
class MedianParams:
    s: Fraction
    t: Fraction

    def __post_init__(self):
        object.__setattr__(self, "s", Fraction(self.s))
        object.__setattr__(self, "t", Fraction(self.t))
        if not (0 <= self.s < self.t < 1):
            raise ValidationError(f"need 0 <= s < t < 1, got s={self.s}, t={self.t}")


@dataclass(frozen=True)
class OscillationTriple:
    sigma_plus: object
    sigma_minus: object

    @property
    def sigma(self):
        return self.sigma_plus + self.sigma_minus


def _check_level(s, upper_closed=False):
    s = Fraction(s)
    if s < 0 or s > 1 or (s == 1 and not upper_closed):
        raise ValidationError(f"median level must lie in [0, 1), got {s}")
    return s


def upper_median(dist: WeightedValueMultiset, s) -> object:
    """Largest value whose strictly-below mass is at most s times the total."""
    s = _check_level(s)
    if not dist.entries:
        raise EmptyOverlapError("median of an empty distribution")
    budget = s * dist.total_mass
    below = Fraction(0)
    best = dist.entries[0][0]
    for value, mass in dist.entries:
        if below > budget:
            break
        best = value
        below += mass
    return best


def upper_median_by_excess(dist: WeightedValueMultiset, s) -> object:
    """Same quantity via inf{v : mass(f > v) < (1 - s) total}.

    Independent route, used to cross-check :func:`upper_median`.
    """
    s = _check_level(s)
    if not dist.entries:
        raise EmptyOverlapError("median of an empty distribution")
    limit = (1 - s) * dist.total_mass
    above = dist.total_mass
    for value, mass in dist.entries:
        above -= mass
        if above < limit:
            return value
    return dist.entries[-1][0]


def _distribution(f: StepFunction, Q) -> WeightedValueMultiset:
    if isinstance(Q, DyadicCube):
        if Q.root != f.root:
            raise LatticeError("cube is not in the lattice of the function")
        if Q.level <= f.resolution:
            return f.dyadic_distribution(Q)
        Q = Q.cube
    return restrict_distribution(f, Q)


class MedianCache:
    """Memoized distributions and medians of one function."""

    def __init__(self, f: StepFunction):
        self.f = f
        self._dist: dict = {}
        self._med: dict = {}

    def dist(self, Q) -> WeightedValueMultiset:
        key = Q.key if isinstance(Q, DyadicCube) else Q
        d = self._dist.get(key)
        if d is None:
            d = _distribution(self.f, Q)
            self._dist[key] = d
        return d

    def median(self, Q, s):
        key = (Q.key if isinstance(Q, DyadicCube) else Q, s)
        m = self._med.get(key)
        if m is None:
            m = upper_median(self.dist(Q), s)
            self._med[key] = m
        return m

    def difference(self, Q, p: "MedianParams"):
        return self.median(Q, p.t) - self.median(Q, p.s)

    def sigma(self, Q: DyadicCube, p: "MedianParams") -> "OscillationTriple":
        up = Q.parent()
        ms, mt = self.median(Q, p.s), self.median(Q, p.t)
        d = mt - ms
        plus = d + positive_part(ms - self.median(up, p.s))
        minus = d + positive_part(self.median(up, p.t) - mt)
        return OscillationTriple(plus, minus)


def median(f: StepFunction, Q, s):
    return upper_median(_distribution(f, Q), s)


def median_difference(f: StepFunction, Q, p: MedianParams):
    dist = _distribution(f, Q)
    return upper_median(dist, p.t) - upper_median(dist, p.s)


def median_with_abs(dist: WeightedValueMultiset, c, level):
    return upper_median(dist.map(lambda v: abs(v - c)), level)


def mean_oscillation_candidates(dist: WeightedValueMultiset) -> list:
    vals = list(dist.values)
    cands = set(vals)
    for i, a in enumerate(vals):
        for b in vals[i + 1 :]:
            cands.add((a + b) / 2)
    return sorted(cands)


def local_mean_oscillation_of(dist: WeightedValueMultiset, a):
    a = Fraction(a)
    if not 0 < a < 1:
        raise ValidationError(f"oscillation level must lie in (0, 1), got {a}")
    level = 1 - a
    best = None
    for c in mean_oscillation_candidates(dist):
        val = median_with_abs(dist, c, level)
        if best is None or val < best:
            best = val
    return best


def local_mean_oscillation(f: StepFunction, Q, a):
    """min over centers c of M_{1-a}(|f - c|, Q).

    The objective is piecewise linear in c with breakpoints at the values and
    at midpoints of pairs of values, so those candidates are exhaustive.
    """
    return local_mean_oscillation_of(_distribution(f, Q), a)


def local_mean_oscillation_argmin(f: StepFunction, Q, a):
    dist = _distribution(f, Q)
    level = 1 - Fraction(a)
    return min(mean_oscillation_candidates(dist), key=lambda c: median_with_abs(dist, c, level))


def positive_part(x):
    return x if x > 0 else Fraction(0)


def sigma_oscillations(f: StepFunction, Q: DyadicCube, p: MedianParams) -> OscillationTriple:
    if not isinstance(Q, DyadicCube) or Q.root != f.root:
        raise LatticeError("sigma terms need a dyadic cube of the function's lattice")
    here = _distribution(f, Q)
    up = _distribution(f, Q.parent())
    ms, mt = upper_median(here, p.s), upper_median(here, p.t)
    d = mt - ms
    plus = d + positive_part(ms - upper_median(up, p.s))
    minus = d + positive_part(upper_median(up, p.t) - mt)
    return OscillationTriple(plus, minus)


def median_seminorm(f: StepFunction, family: Iterable, p: MedianParams):
    best = None
    for Q in family:
        d = median_difference(f, Q, p)
        if best is None or d > best:
            best = d
    if best is None:
        raise ValidationError("empty cube family")
    return best


def all_dyadic(root: Cube, depth: int) -> list[DyadicCube]:
    out = [DyadicCube.top(root)]
    frontier = out[:]
    for _ in range(depth):
        frontier = [c for q in frontier for c in q.children()]
        out.extend(frontier)
    return out


def median_invariant_failures(f: StepFunction, Q, p: MedianParams, shift=Fraction(1, 3), slope=Fraction(2)) -> list[str]:
    """Names of the order properties of medians that fail on (f, Q); empty when all hold."""
    dist = _distribution(f, Q)
    total = dist.total_mass
    s, t = p.s, p.t
    ms, mt = upper_median(dist, s), upper_median(dist, t)
    bad = []
    if not (dist.mass_below(ms) <= s * total and dist.mass_above(ms) <= (1 - s) * total):
        bad.append("level masses")
    if ms != upper_median_by_excess(dist, s):
        bad.append("two median routes")
    if not ms <= mt:
        bad.append("monotone in level")
    if upper_median(dist.map(lambda v: v + shift), s) != ms + shift:
        bad.append("translation")
    for c in (ms, mt, shift):
        hi, lo = dist.map(lambda v: max(v, c)), dist.map(lambda v: min(v, c))
        if not upper_median(lo, s) <= ms <= upper_median(hi, s):
            bad.append("order preserving")
            break
    absd = dist.map(abs)
    if not upper_median(absd, s) * (1 - s) <= absd.mean():
        bad.append("Chebyshev bound")
    mean = dist.mean()
    dev = dist.map(lambda v: abs(v - mean)).mean()
    if s > 0 and not (mt - ms) * (1 - t) * s <= (s + 1 - t) * dev:
        bad.append("difference below mean oscillation")
    if upper_median(dist.map(lambda v: slope * v + shift), s) != slope * ms + shift:
        bad.append("increasing maps")
    if upper_median(dist.map(lambda v: -v), s) != -smallest_value_covering(dist, 1 - s):
        bad.append("reflection")
    d = mt - ms
    if not local_mean_oscillation_of(dist, 1 - (t - s)) <= d:
        bad.append("oscillation lower sandwich")
    a2 = min(1 - t, s)
    if a2 > 0 and not d <= 2 * local_mean_oscillation_of(dist, a2):
        bad.append("oscillation upper sandwich")
    if ms >= 0 and not abs(ms) <= upper_median(absd, s):
        bad.append("absolute value bound")
    if ms <= 0 and s > 0 and not abs(ms) <= upper_median(absd, 1 - s):
        bad.append("absolute value bound")
    return bad


def smallest_value_covering(dist: WeightedValueMultiset, level):
    """Smallest value v with mass{f <= v} >= level times the total.

    Reflection turns the upper s-median of -f into minus this at 1 - s.
    """
    budget = Fraction(level) * dist.total_mass
    acc = Fraction(0)
    for value, mass in dist.entries:
        acc += mass
        if acc >= budget:
            return value
    return dist.entries[-1][0]
