"""Power weights w = dist(., E)^(-alpha): integrals, A_p constants and exponent estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import (
    BudgetError,
    Cube,
    MedianOscError,
    Radical,
    ValidationError,
    cell_partition,
    check_budget,
    format_rational,
    to_rational,
)
from .porosity import (
    PointSet,
    fast_float,
    fast_lt,
    free_cube_inventory,
    radical_sum,
    vs_volume,
)

INF = math.inf


class Divergence(MedianOscError):
    """An integral of a distance power is infinite on some cube."""

    def __init__(self, cube: Cube, exponent, what: str = "integral"):
        self.cube = cube
        self.exponent = exponent
        super().__init__(f"{what} of dist^{format_rational(exponent)} diverges on {cube}")


class QuadratureValue(float):
    """A float produced by midpoint quadrature, tagged with its mesh."""

    mesh: int
    cells: int

    def __new__(cls, value, mesh, cells):
        obj = super().__new__(cls, value)
        obj.mesh = mesh
        obj.cells = cells
        return obj


def _parse_p(p):
    if p in ("inf", "oo", "infinity", INF):
        return INF
    p = to_rational(p) if not isinstance(p, Fraction) else p
    if p < 1:
        raise ValidationError("p must be at least 1")
    return p


@dataclass(frozen=True)
class WeightParams:
    alpha: Fraction
    p: object  # Fraction >= 1 or math.inf

    def __post_init__(self):
        object.__setattr__(self, "alpha", to_rational(self.alpha))
        object.__setattr__(self, "p", _parse_p(self.p))
        if self.alpha == 0:
            raise ValidationError("alpha must be nonzero")

    @property
    def conjugate(self):
        if self.p == INF:
            return Fraction(1)
        if self.p == 1:
            return INF
        return self.p / (self.p - 1)


# ---------------------------------------------------------------- 1D closed forms


def _pieces_1d(E: PointSet, a, b):
    """Split [a, b] into (c, e, base, up) with dist = x - base (up) or base - x."""
    lo, _ = E.nearest_1d(a)
    _, hi = E.nearest_1d(b)
    chain = ([lo] if lo is not None else []) + E.points_1d(a, b, True, True) + ([hi] if hi is not None else [])
    dedup = []
    for x in chain:
        if not dedup or dedup[-1] != x:
            dedup.append(x)
    chain = dedup

    def clip(c, e):
        c = a if fast_lt(c, a) else c
        e = b if fast_lt(b, e) else e
        return (c, e) if fast_lt(c, e) else None

    out = []
    if lo is None:
        seg = clip(a, chain[0])
        if seg:
            out.append((*seg, chain[0], False))
    for u, v in zip(chain, chain[1:]):
        m = (u + v) / 2
        for seg, base, up in ((clip(u, m), u, True), (clip(m, v), v, False)):
            if seg:
                out.append((*seg, base, up))
    if hi is None:
        seg = clip(chain[-1], b)
        if seg:
            out.append((*seg, chain[-1], True))
    return out


def _antiderivative(y, q):
    """y^(q+1)/(q+1) for y >= 0, exact when possible."""
    if y == 0:
        return Fraction(0)
    if isinstance(y, Radical):
        return float(y) ** float(q + 1) / float(q + 1)
    v = Radical.power(y, q + 1)
    return v / (q + 1)


def _log_antiderivative(y) -> float:
    y = fast_float(y)
    return 0.0 if y == 0 else y * math.log(y) - y


def _combine_exact(parts):
    if any(isinstance(v, float) for v in parts):
        return sum(fast_float(v) for v in parts)
    return radical_sum(parts)


def _integral_1d(E: PointSet, Q: Cube, q):
    a, b = Q.corner[0], Q.upper[0]
    if q <= -1 and E.points_1d(a, b, True, True):
        raise Divergence(Q, q)
    parts = []
    for c, e, base, up in _pieces_1d(E, a, b):
        y0, y1 = (c - base, e - base) if up else (base - e, base - c)
        if q == -1:
            parts.append(math.log(fast_float(y1)) - math.log(fast_float(y0)))
        else:
            parts.append(_antiderivative(y1, q))
            lo = _antiderivative(y0, q)
            parts.append(-lo)
    return _combine_exact(parts)


def _log_integral_1d(E: PointSet, Q: Cube) -> float:
    a, b = Q.corner[0], Q.upper[0]
    total = 0.0
    for c, e, base, up in _pieces_1d(E, a, b):
        y0, y1 = (c - base, e - base) if up else (base - e, base - c)
        total += _log_antiderivative(y1) - _log_antiderivative(y0)
    return total


# ---------------------------------------------------------------- quadrature


def _codimension(E: PointSet) -> int:
    return E.dim - E.free_dims if E.kind == "subspace" else E.dim


def _quadrature(E: PointSet, Q: Cube, J: int, g) -> QuadratureValue:
    check_budget((1 << J) ** Q.dim, "quadrature cells")
    cells = cell_partition(Q, J)
    total = 0.0
    for dc in cells:
        c = dc.cube
        total += g(float(E.squared_distance(c.center)))
    cell = float(Q.measure) / len(cells)
    return QuadratureValue(total * cell, J, len(cells))


def _node_on_set(Q: Cube, mesh: int):
    raise ValidationError(f"quadrature node lies on the set in {Q} at mesh {mesh}; use another mesh")


def _sup_distance(E: PointSet, Q: Cube, J: int) -> float:
    if E.dim == 1:
        return fast_float(E.closed_interval_sup_distance(Q.corner[0], Q.upper[0]))
    best = 0.0
    for dc in cell_partition(Q, J):
        best = max(best, float(E.squared_distance(dc.cube.center)))
    return math.sqrt(best)


# ---------------------------------------------------------------- public integrals


def distance_power_integral(E: PointSet, Q: Cube, p_exp, mesh: int = 6):
    """Integral over Q of dist(x, E)^p_exp.

    1D: exact closed form over the gaps (a Fraction or Radical when every
    piece is exact, a float otherwise).  n >= 2: midpoint quadrature at
    the given mesh, returned as a :class:`QuadratureValue`.
    """
    p_exp = to_rational(p_exp) if not isinstance(p_exp, Fraction) else p_exp
    if p_exp == 0:
        return Q.measure
    if E.dim == 1:
        return _integral_1d(E, Q, p_exp)
    if p_exp <= -_codimension(E) and E.meets_closed(Q):
        raise Divergence(Q, p_exp)
    expo = float(p_exp) / 2
    return _quadrature(E, Q, mesh, lambda d2: d2**expo if d2 or expo > 0 else _node_on_set(Q, mesh))


def distance_power_average(E: PointSet, Q: Cube, p_exp, mesh: int = 6):
    val = distance_power_integral(E, Q, p_exp, mesh)
    if isinstance(val, float):
        return val / float(Q.measure)
    return val / Q.measure


def log_distance_average(E: PointSet, Q: Cube, mesh: int = 6) -> float:
    if E.dim == 1:
        return _log_integral_1d(E, Q) / float(Q.measure)
    if E.meets_closed(Q) and _codimension(E) <= 0:
        raise Divergence(Q, 0, "log integral")
    val = _quadrature(E, Q, mesh, lambda d2: 0.5 * math.log(d2) if d2 > 0 else _node_on_set(Q, mesh))
    return val / float(Q.measure)


@dataclass(frozen=True)
class MeasureBounds:
    lower: Fraction
    upper: Fraction
    mesh: int

    @property
    def exact(self) -> bool:
        return self.lower == self.upper


def neighborhood_measure(E: PointSet, r, Q: Cube, mesh: int = 6):
    """|E_r cap Q| with E_r = {dist < r}.

    Exact in 1D (union of open intervals clipped to Q).  In n >= 2 a pair of
    cell-counting bounds at the given mesh.
    """
    r = to_rational(r) if not isinstance(r, (Fraction, Radical)) else r
    if not r > 0:
        raise ValidationError("radius must be positive")
    if E.dim == 1:
        a, b = Q.corner[0], Q.upper[0]
        pts = E.points_1d(a - r, b + r, False, False)
        parts = []
        cur_lo = cur_hi = None
        for x in pts:
            lo = x - r
            hi = x + r
            lo = a if fast_lt(lo, a) else lo
            hi = b if fast_lt(b, hi) else hi
            if cur_hi is not None and not fast_lt(cur_hi, lo):
                cur_hi = hi if fast_lt(cur_hi, hi) else cur_hi
            else:
                if cur_hi is not None:
                    parts += [cur_hi, -cur_lo]
                cur_lo, cur_hi = lo, hi
        if cur_hi is not None:
            parts += [cur_hi, -cur_lo]
        return radical_sum(parts)
    if isinstance(r, Radical):
        raise ValidationError("irrational radius in n >= 2")
    check_budget((1 << mesh) ** Q.dim, "neighbourhood cells")
    r2 = r * r
    inner = outer = 0
    cells = cell_partition(Q, mesh)
    for dc in cells:
        c = dc.cube
        if E.closed_box_sq_distance(c) < r2 or E.meets(c):
            outer += 1
            if _sup_sq_upper(E, c) < r2:
                inner += 1
    cell = Q.measure / len(cells)
    return MeasureBounds(inner * cell, outer * cell, mesh)


def _sup_sq_upper(E: PointSet, c: Cube) -> Fraction:
    """An upper bound for sup over the closed cell of the squared distance."""
    lo, hi = c.corner, c.upper

    def far(pt):
        return sum((max(abs(a - x), abs(b - x)) ** 2 for a, b, x in zip(lo, hi, pt)), Fraction(0))

    if E.kind == "finite":
        return min(far(pt) for pt in E.points)
    if E.kind == "lattice":
        return far(tuple(Fraction(round(x)) for x in c.center))
    return sum((max(a * a, b * b) for a, b in list(zip(lo, hi))[E.free_dims :]), Fraction(0))


# ---------------------------------------------------------------- A_p constants


@dataclass
class ApRow:
    cube: Cube
    average: object
    companion: object
    product: object


@dataclass
class ApReport:
    value: object
    worst_cube: Cube
    rows: list
    params: WeightParams

    def __float__(self):
        return fast_float(self.value)


def _pow(x, e):
    """x^e for an exact or float x; exact when x is rational and the result is."""
    if isinstance(x, Fraction) and isinstance(e, Fraction):
        return Radical.power(x, e)
    return fast_float(x) ** float(e)


def _mul(x, y):
    if isinstance(x, Radical) and isinstance(y, Radical):
        return fast_float(x) * fast_float(y)
    if isinstance(x, float) or isinstance(y, float):
        return fast_float(x) * fast_float(y)
    return x * y


def ap_product(E: PointSet, w: WeightParams, Q: Cube, mesh: int = 6):
    """The A_p quantity of dist^-alpha on one cube (A_1 for p = 1, A_inf for p = inf)."""
    alpha, p = w.alpha, w.p
    avg = distance_power_average(E, Q, -alpha, mesh)
    if p == INF:
        la = log_distance_average(E, Q, mesh)
        comp = math.exp(float(alpha) * la)
        return ApRow(Q, avg, comp, fast_float(avg) * comp)
    if p == 1:
        if alpha < 0:
            # ||w^-1||_inf is the reciprocal of the essential inf of d^-alpha = d^|alpha|
            if E.meets_closed(Q) if E.dim > 1 else E.points_1d(Q.corner[0], Q.upper[0], True, True):
                raise Divergence(Q, alpha, "inverse weight sup")
            if E.dim == 1:
                dmin = E.closed_interval_distance(Q.corner[0], Q.upper[0])
            else:
                dmin = Radical.power(E.closed_box_sq_distance(Q), Fraction(1, 2))
            comp = _pow(dmin, alpha) if not isinstance(dmin, Radical) else fast_float(dmin) ** float(alpha)
        else:
            dmax = _sup_distance(E, Q, mesh) if E.dim > 1 else E.closed_interval_sup_distance(Q.corner[0], Q.upper[0])
            comp = _pow(dmax, alpha) if not isinstance(dmax, Radical) else fast_float(dmax) ** float(alpha)
        return ApRow(Q, avg, comp, _mul(avg, comp))
    dual = distance_power_average(E, Q, alpha / (p - 1), mesh)
    comp = _pow(dual, p - 1)
    return ApRow(Q, avg, comp, _mul(avg, comp))


def muckenhoupt_constant(E: PointSet, w: WeightParams, family: Sequence[Cube], mesh: int = 6) -> ApReport:
    """Max of the A_p quantity over a finite family of cubes."""
    if not family:
        raise ValidationError("empty family")
    rows = [ap_product(E, w, Q, mesh) for Q in family]
    best = rows[0]
    for row in rows[1:]:
        if fast_lt(best.product, row.product) if not isinstance(row.product, float) else fast_float(best.product) < row.product:
            best = row
    return ApReport(best.product, best.cube, rows, w)


# ---------------------------------------------------------------- exponent estimates


@dataclass(frozen=True)
class MuConfig:
    s: Fraction = Fraction(1, 2)
    min_scale: int = -10
    max_scale: int = 10
    r_steps: int = 20
    slack: float = 2.0
    alpha_max: float = 8.0
    iterations: int = 30
    max_depth: int = 16
    centers: tuple = ()


@dataclass
class MuEstimate:
    p: object
    lower: float
    upper: float
    s_used: Fraction
    cube_sample: str
    r_sample: str
    degenerate: bool = False
    warnings: list = field(default_factory=list)

    def brackets(self, value: float, tol: float) -> bool:
        return value - tol <= self.lower and self.upper <= value + tol


def _default_centers(E: PointSet) -> list:
    if E.kind == "finite":
        return [pt for pt in E.points[:8]]
    if E.kind == "lattice":
        return [tuple(Fraction(0) for _ in range(E.dim)), tuple(Fraction(1) for _ in range(E.dim))]
    if E.kind == "subspace":
        return [tuple(Fraction(0) for _ in range(E.dim))]
    return [(E.gamma_point(m),) for m in (1, 4, 16) if m <= E.bound]


def length_scale(E: PointSet, Q: Cube, s, max_depth: int):
    """L_s(Q) with the inventory depth raised until it resolves (None if it never does)."""
    J = 4
    while True:
        V = vs_volume(free_cube_inventory(E, Q, J), s)
        if not V.below_resolution:
            return V.side
        if J >= max_depth:
            return None
        J = min(max_depth, J + 4)


def _centered_cube(center, side: Fraction) -> Cube:
    if any(isinstance(c, Radical) for c in center):
        raise ValidationError("cube centers must be rational")
    return Cube(tuple(c - side / 2 for c in center), side)


def mu_exponent_estimate(E: PointSet, p, config: MuConfig | None = None) -> MuEstimate:
    """Bracket for the largest alpha passing the two neighbourhood decay tests.

    Cubes are centered at sample points of E with sides 2^k.  For each cube
    and r on a halving grid below L_s(Q), g(r) = |E_r cap Q|/|Q| (L/r)^alpha
    must stay within ``slack`` times the largest-r value.  For finite p > 1 the
    complement ratio times (r/L)^(alpha/(p-1)) is tested the same way on
    L < r < l(Q).  p = 1 uses L_1.
    """
    config = config or MuConfig()
    p = _parse_p(p)
    s = Fraction(1) if p == 1 else Fraction(config.s)
    centers = list(config.centers) or _default_centers(E)
    centers = [c for c in centers if not any(isinstance(x, Radical) for x in c)]
    warnings = []
    lower_rows = []  # per cube: list of (ratio, L/r)
    upper_rows = []
    sides = [Fraction(2) ** k for k in range(config.min_scale, config.max_scale + 1)]
    for center in centers:
        for side in sides:
            Q = _centered_cube(center, side)
            try:
                L = length_scale(E, Q, s, config.max_depth)
            except BudgetError:
                warnings.append(f"budget exceeded at {Q}")
                continue
            if L is None:
                return MuEstimate(
                    p, 0.0, 0.0, s, f"{len(centers)} centers x {len(sides)} sides", "n/a", True,
                    [f"L_s unresolved (treated as 0) on {Q}"],
                )
            row = []
            r = L / 2
            for _ in range(config.r_steps):
                m = neighborhood_measure(E, r, Q)
                m = m.upper if isinstance(m, MeasureBounds) else m
                row.append((fast_float(m) / float(Q.measure), float(L / r)))
                r /= 2
            lower_rows.append(row)
            if p not in (1, INF):
                row = []
                r = L * 2
                while r < side:
                    m = neighborhood_measure(E, r, Q)
                    m = m.lower if isinstance(m, MeasureBounds) else m
                    row.append((1 - fast_float(m) / float(Q.measure), float(r / L)))
                    r *= 2
                if row:
                    upper_rows.append(row)
    if len(lower_rows) < 3:
        warnings.append("sample too small")

    def ok(rows, expo):
        for row in rows:
            ref = row[0][0] * row[0][1] ** expo
            if ref <= 0:
                if any(v > 0 for v, _ in row):
                    return False
                continue
            for v, scale in row:
                if v * scale**expo > config.slack * ref * (1 + 1e-12):
                    return False
        return True

    def passes(alpha):
        if not ok(lower_rows, alpha):
            return False
        if upper_rows and not ok(upper_rows, alpha / float(p - 1)):
            return False
        return True

    lo, hi = 0.0, config.alpha_max
    if not passes(0.0):
        lo = hi = 0.0
    elif passes(hi):
        lo, hi = hi, INF
        warnings.append("alpha_max passes; upper end open")
    else:
        for _ in range(config.iterations):
            mid = (lo + hi) / 2
            if passes(mid):
                lo = mid
            else:
                hi = mid
    return MuEstimate(
        p,
        lo,
        hi,
        s,
        f"{len(centers)} centers x sides 2^{config.min_scale}..2^{config.max_scale}",
        f"r = L/2^k, k = 1..{config.r_steps}",
        False,
        warnings,
    )


@dataclass
class ScaleRow:
    scale: Fraction
    value: float  # max over the finite members; nan when none is finite
    divergent: list


def ap_scale_profile(E: PointSet, w: WeightParams, center, scales: Sequence[int], offset=Fraction(1, 256)) -> list:
    """A_p maxima over {[c - h, c + h), [c + offset, c + offset + h)} for h = 2^k (1D).

    The first cube is centered at ``center``; the second sits just off it, so
    it stays finite when the centered one diverges.  Divergent members are
    listed in ``divergent`` rather than dropped silently.
    """
    if E.dim != 1:
        raise ValidationError("scale profiles are one-dimensional")
    c = to_rational(center) if not isinstance(center, Fraction) else center
    offset = Fraction(offset)
    out = []
    for k in scales:
        h = Fraction(2) ** k
        vals, bad = [], []
        for Q in (Cube((c - h,), 2 * h), Cube((c + offset,), h)):
            try:
                vals.append(fast_float(ap_product(E, w, Q).product))
            except Divergence:
                bad.append(Q)
        out.append(ScaleRow(h, max(vals) if vals else math.nan, bad))
    return out
