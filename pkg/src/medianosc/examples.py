"""Reproducible worked examples: a dyadic Haar counterexample and the power set E_gamma."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from scipy.stats import qmc

from .core import Cube, DyadicCube, Radical, StepFunction, ValidationError, restrict_distribution, to_rational
from .median import MedianCache, MedianParams, all_dyadic, upper_median
from .porosity import PointSet, fast_float, gap_length_scale, greedy_gap_scale, interval_gaps


# ---------------------------------------------------------------- Haar counterexample


def haar_counterexample(K: int) -> StepFunction:
    """Sum over j of a unit Haar bump on [2j, 2j+1) and a height j+1 bump on [2j+1, 2j+2).

    The root is [0, 2^K) and cells have length 1/2.
    """
    if K < 1:
        raise ValidationError("K must be at least 1")
    vals = []
    for i in range(1 << (K + 1)):
        unit, half = divmod(i, 2)
        height = 1 if unit % 2 == 0 else unit // 2 + 1
        vals.append(Fraction(height if half == 0 else -height))
    return StepFunction(Cube.of((0,), 1 << K), K + 1, vals)


@dataclass
class CounterexampleReport:
    K: int
    narrow: MedianParams
    wide: MedianParams
    seminorm: Fraction
    depth: int
    cubes_checked: int
    pair_differences: list  # (m, d on [2m, 2m + 2), expected 2(m + 1))
    pair_averages_zero: bool

    @property
    def ok(self) -> bool:
        return (
            self.seminorm == 0
            and all(d == e for _, d, e in self.pair_differences)
            and self.pair_averages_zero
        )


def counterexample_checks(
    K: int,
    narrow: MedianParams = MedianParams(Fraction(3, 10), Fraction(9, 20)),
    wide: MedianParams = MedianParams(Fraction(1, 8), Fraction(7, 8)),
) -> CounterexampleReport:
    """Exact checks: narrow median differences vanish on every dyadic interval
    while wide ones grow linearly on the non-dyadic pairs [2m, 2m + 2)."""
    f = haar_counterexample(K)
    cache = MedianCache(f)
    depth = K + 2
    worst = Fraction(0)
    family = all_dyadic(f.root, depth)
    for Q in family:
        d = cache.difference(Q, narrow)
        if d > worst:
            worst = d
    pairs = []
    zero_avg = True
    for m in range(1 << (K - 1)):
        Q = Cube.of((2 * m,), 2)
        dist = restrict_distribution(f, Q)
        d = upper_median(dist, wide.t) - upper_median(dist, wide.s)
        pairs.append((m, d, Fraction(2 * (m + 1))))
        zero_avg = zero_avg and dist.mean() == 0
    return CounterexampleReport(K, narrow, wide, worst, depth, len(family), pairs, zero_avg)


# ---------------------------------------------------------------- E_gamma


def gamma_set(gamma, bound: int, include_zero: bool = False) -> PointSet:
    """{+-m^gamma : 1 <= m <= bound}, optionally with 0."""
    return PointSet.gamma_set(to_rational(gamma) if not isinstance(gamma, Fraction) else gamma, bound, include_zero)


def standard_intervals(E: PointSet, ks: Sequence[int]) -> list:
    """(k, k^gamma, (k+1)^gamma) for the requested k >= 1."""
    out = []
    for k in ks:
        if not 1 <= k < E.bound:
            raise ValidationError(f"k = {k} outside the truncation")
        out.append((k, E.gamma_point(k), E.gamma_point(k + 1)))
    return out


def mean_value_bounds_hold(gamma, x, y) -> bool:
    """gamma y^(gamma-1) (y-x) <= y^gamma - x^gamma <= gamma x^(gamma-1) (y-x), exactly."""
    gamma = Fraction(gamma)
    x, y = Fraction(x), Fraction(y)
    if not 0 < x < y:
        raise ValidationError("need 0 < x < y")
    mid = Radical.power(y, gamma) - Radical.power(x, gamma)
    lo = Radical.power(y, gamma - 1) * (gamma * (y - x))
    hi = Radical.power(x, gamma - 1) * (gamma * (y - x))
    return lo <= mid <= hi


@dataclass
class GapBand:
    strictly_decreasing: bool
    band: tuple  # min and max of |I_k| (k+1)^(1-gamma)
    count: int


def standard_gap_band(E: PointSet, kmax: int) -> GapBand:
    """Exact monotonicity of |I_k| and the spread of |I_k| (k+1)^(1-gamma)."""
    lengths = [E.gamma_point(k + 1) - E.gamma_point(k) for k in range(1, kmax + 1)]
    dec = all(b < a for a, b in zip(lengths, lengths[1:]))
    g = float(E.gamma)
    scaled = [fast_float(ln) * (k + 1) ** (1 - g) for k, ln in enumerate(lengths, 1)]
    return GapBand(dec, (min(scaled), max(scaled)), len(lengths))


@dataclass
class GoodInterval:
    n0: int
    n1: int
    left: object
    right: object
    scale: object  # exact L~_s
    predicted: object  # (a + (1-s)(b-a))^((gamma-1)/gamma) = n1^(gamma-1)
    ratio: float
    near_edge: bool


@dataclass
class GammaScanReport:
    gamma: Fraction
    s: Fraction
    bound: int
    intervals: list
    min_ratio: float
    max_ratio: float
    excluded: int


def _good_pairs(limit: int):
    steps = sorted({max(1, round(2 ** (i / 2))) for i in range(0, 2 * limit.bit_length() + 2)})
    for n0 in steps:
        for gap in steps:
            yield n0, n0 + gap


def edge_margin(E: PointSet):
    """Right end of the positive part minus one gap: points beyond this are near truncation."""
    return E.gamma_point(E.bound) - (E.gamma_point(E.bound) - E.gamma_point(E.bound - 1))


def good_interval_scan(gamma, s, count: int, bound: int = 10**4) -> GammaScanReport:
    """L~_s on s-good intervals (a, b): a = n0^gamma and a + (1-s)(b-a) = n1^gamma."""
    s = Fraction(s)
    if not 0 < s < 1:
        raise ValidationError("s must lie in (0, 1)")
    E = gamma_set(gamma, bound)
    limit = edge_margin(E)
    rows, excluded = [], 0
    seen = set()
    for n0, n1 in sorted(_good_pairs(bound), key=lambda pr: (pr[1], pr[0])):
        if len(rows) >= count:
            break
        if (n0, n1) in seen or n1 > bound:
            continue
        seen.add((n0, n1))
        a, c = E.gamma_point(n0), E.gamma_point(n1)
        b = a + (c - a) / (1 - s)
        if fast_float(b) >= fast_float(limit):
            excluded += 1
            continue
        L = gap_length_scale(E, (a, b), s)
        pred = Radical.power(n1, E.gamma - 1)
        rows.append(GoodInterval(n0, n1, a, b, L, pred, fast_float(L) / fast_float(pred), False))
    if len(rows) < count:
        raise ValidationError(f"only {len(rows)} good intervals fit below the truncation bound")
    rows.sort(key=lambda r: (fast_float(r.left), fast_float(r.right)))
    ratios = [r.ratio for r in rows]
    return GammaScanReport(E.gamma, s, bound, rows, min(ratios), max(ratios), excluded)


# ---------------------------------------------------------------- porosity demonstration


@dataclass
class WeakRow:
    m: int
    length: object
    longest: object
    scale: object
    ratio: float


@dataclass
class GammaDemoConfig:
    bound: int = 10**4
    samples: int = 200
    seed: int = 0
    ms: tuple = (4, 16, 64, 256, 1024)
    small_points: int = 4
    left_max: Fraction = Fraction(40)
    length_range: tuple = (-6, 5)  # log2 of interval lengths


@dataclass
class GammaDemoReport:
    gamma: Fraction
    config: GammaDemoConfig
    sup_ratio: float
    sup_ratio_doubled: float
    relative_change: float
    sampled: int
    excluded: int
    weak_rows: list
    weak_strictly_increasing: bool
    weak_slope: float
    predicted_slope: float
    small_rows: list = field(default_factory=list)  # (interval, points, ratio, band)
    small_within_band: bool = True


def _grid_rational(x: float, grid: int = 1 << 16) -> Fraction:
    return Fraction(round(x * grid), grid)


def sampled_intervals(E: PointSet, cfg: GammaDemoConfig, n: int):
    """Intervals in [0, inf) that meet E and stay clear of the truncation edge.

    Even positions start at 0 (where the gap pattern is least regular) with
    log-uniform lengths; odd positions have a uniform left end as well.  Both
    streams are scrambled Halton sequences seeded by ``cfg.seed``, so any
    prefix of the sample is spread evenly over the parameter box.
    """
    anchored = qmc.Halton(d=1, scramble=True, seed=cfg.seed)
    free = qmc.Halton(d=2, scramble=True, seed=cfg.seed + 1)
    lo, hi = cfg.length_range
    limit = fast_float(edge_margin(E))
    out, excluded = [], 0
    while len(out) < n:
        if len(out) % 2 == 0:
            (v,) = anchored.random(1)[0]
            a = Fraction(0)
        else:
            u, v = free.random(1)[0]
            a = _grid_rational(u * float(cfg.left_max))
        b = a + max(_grid_rational(2 ** (lo + v * (hi - lo))), Fraction(1, 1 << 16))
        if float(b) >= limit:
            excluded += 1
            continue
        if not E.points_1d(a, b, False, False):
            continue
        out.append((a, b))
    return out, excluded


def _slope(xs, ys) -> float:
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    sxx = sum((x - mx) ** 2 for x in xs)
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx


def weak_porosity_rows(E: PointSet, ms: Sequence[int], s=Fraction(3, 4)) -> list:
    rows = []
    for m in ms:
        if m > E.bound:
            raise ValidationError("m beyond the truncation bound")
        I = (Fraction(0), E.gamma_point(m))
        longest = gap_length_scale(E, I, 1)
        scale = gap_length_scale(E, I, s)
        rows.append(WeakRow(m, I[1], longest, scale, fast_float(longest) / fast_float(scale)))
    return rows


def gamma_porosity_demo(gamma, config: GammaDemoConfig | None = None) -> GammaDemoReport:
    """Median porosity evidence and weak porosity failure for E_gamma.

    (a) sup over sampled intervals of L~_{7/8} / L~_{3/4}, at n and 2n samples;
    (b) L~_1 / L~_{3/4} along (0, m^gamma) with its log-log slope against |I_m|;
    (c) intervals with few points: L~_1 / L~_{2/3} must lie in [1, 3(k+1)/2]
        for k points (k+1 gaps whose largest is at most the interval and the
        covering gap is at least 2|I|/(3(k+1))).
    """
    cfg = config or GammaDemoConfig()
    E = gamma_set(gamma, cfg.bound)
    s, t = Fraction(3, 4), Fraction(7, 8)
    ivs, excluded = sampled_intervals(E, cfg, 2 * cfg.samples)
    ratios = []
    small = []
    for a, b in ivs:
        gaps = interval_gaps(E, a, b)
        ls = greedy_gap_scale(gaps, b - a, s)
        lt = greedy_gap_scale(gaps, b - a, t)
        ratios.append(fast_float(lt) / fast_float(ls))
        k = len(gaps) - 1
        if k <= cfg.small_points:
            l1 = greedy_gap_scale(gaps, b - a, 1)
            l23 = greedy_gap_scale(gaps, b - a, Fraction(2, 3))
            small.append(((a, b), k, fast_float(l1) / fast_float(l23), Fraction(3 * (k + 1), 2)))
    sup_n = max(ratios[: cfg.samples])
    sup_2n = max(ratios)
    weak = weak_porosity_rows(E, cfg.ms, s)
    inc = all(b.ratio > a.ratio for a, b in zip(weak, weak[1:]))
    slope = _slope([math.log(fast_float(r.length)) for r in weak], [math.log(r.ratio) for r in weak])
    g = E.gamma
    return GammaDemoReport(
        gamma=g,
        config=cfg,
        sup_ratio=sup_n,
        sup_ratio_doubled=sup_2n,
        relative_change=(sup_2n - sup_n) / sup_n,
        sampled=len(ivs),
        excluded=excluded,
        weak_rows=weak,
        weak_strictly_increasing=inc,
        weak_slope=slope,
        predicted_slope=float((1 - g) / g),
        small_rows=small,
        small_within_band=all(1 <= r <= float(band) for _, _, r, band in small),
    )


def dyadic_family(root: Cube, depth: int) -> list[DyadicCube]:
    return all_dyadic(root, depth)
