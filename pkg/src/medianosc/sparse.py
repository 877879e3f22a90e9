"""Stopping-time families, chains of cubes and sparse decompositions."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .core import (
    Cube,
    DyadicCube,
    InvariantViolation,
    LatticeError,
    StepFunction,
    ValidationError,
    accumulate_over_cells,
    dyadic_of,
)
from .median import (
    MedianCache,
    MedianParams,
    median,
    median_difference,
    positive_part,
    sigma_oscillations,
)

UP = "up"
DOWN = "down"


@dataclass(frozen=True)
class Member:
    cube: Cube
    dyadic: DyadicCube | None
    kind: str  # "dyadic" or "chain"
    anchor: DyadicCube  # a dyadic cube of the lattice containing ``cube``


@dataclass(frozen=True)
class Witness:
    measure: Fraction
    cells: frozenset


@dataclass(frozen=True)
class PackingRecord:
    node: DyadicCube
    selected_measure: Fraction
    bound: Fraction

    @property
    def holds(self) -> bool:
        return self.selected_measure <= self.bound


@dataclass
class SparseFamily:
    root: DyadicCube
    members: list
    witnesses: dict = field(default_factory=dict)
    eta_witness: Fraction = Fraction(1)
    carleson_sup: Fraction = Fraction(1)
    packing: list = field(default_factory=list)
    children: dict = field(default_factory=dict)
    kind: str = "dyadic"

    def cubes(self) -> list[Cube]:
        return [m.cube for m in self.members]

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class DominationReport:
    holds: bool
    worst_cell: int
    lhs: object
    rhs: object
    constant_used: Fraction
    lhs_values: tuple = ()
    rhs_values: tuple = ()


# ---------------------------------------------------------------- helpers


def _as_top(f: StepFunction, Q0) -> tuple[StepFunction, DyadicCube]:
    if Q0 is None or Q0 == f.root:
        return f, DyadicCube.top(f.root)
    if isinstance(Q0, Cube):
        dc = dyadic_of(f.root, Q0)
        if dc is None:
            raise LatticeError(f"{Q0} is not a dyadic cube of the function's lattice")
        Q0 = dc
    if not isinstance(Q0, DyadicCube) or Q0.root != f.root:
        raise LatticeError("starting cube is not in the function's lattice")
    if Q0.level == 0:
        return f, Q0
    g = f.subfunction(Q0)
    return g, DyadicCube.top(g.root)


def _dyadic_member(dc: DyadicCube) -> Member:
    return Member(dc.cube, dc, "dyadic", dc)


def _sorted_members(members) -> list:
    return sorted(members, key=lambda m: (m.cube.side * -1, m.cube.corner))


# ---------------------------------------------------------------- directed families


def build_directed_family(
    f: StepFunction, Q0, p: MedianParams, direction: str, cache: MedianCache | None = None
) -> SparseFamily:
    """Recursive stopping-time family.

    up:   Q is selected below Q' when M_s(Q) - M_s(Q') > sigma_plus(Q')
    down: Q is selected below Q' when M_t(Q') - M_t(Q) > sigma_minus(Q')
    Selection keeps maximal cubes (breadth-first, first hit along each branch)
    and recursion stops at the resolution cells.
    """
    if direction not in (UP, DOWN):
        raise ValidationError(f"direction must be 'up' or 'down', got {direction!r}")
    f, top = _as_top(f, Q0)
    J = f.resolution
    if direction == UP:
        level = p.s
        packing_ratio = (1 - p.t) / (1 - p.s)
    else:
        level = p.t
        packing_ratio = p.s / p.t

    cache = cache if cache is not None and cache.f is f else MedianCache(f)

    def med(dc):
        return cache.median(dc, level)

    members = []
    witnesses = {}
    packing = []
    children_map = {}
    queue = [top]
    while queue:
        node = queue.pop(0)
        members.append(_dyadic_member(node))
        tri = cache.sigma(node, p)
        threshold = tri.sigma_plus if direction == UP else tri.sigma_minus
        base = med(node)
        selected = []
        frontier = node.children() if node.level < J else []
        while frontier:
            nxt = []
            for q in frontier:
                gap = med(q) - base if direction == UP else base - med(q)
                if gap > threshold:
                    selected.append(q)
                elif q.level < J:
                    nxt.extend(q.children())
            frontier = nxt
        selected.sort(key=lambda q: q.key)
        sel_measure = sum((q.measure for q in selected), Fraction(0))
        packing.append(PackingRecord(node, sel_measure, packing_ratio * node.measure))
        cells = set(f.cell_indices(node))
        for q in selected:
            cells.difference_update(f.cell_indices(q))
        witnesses[node.cube] = Witness(node.measure - sel_measure, frozenset(cells))
        children_map[node.key] = [q.key for q in selected]
        queue.extend(selected)

    eta = min(witnesses[m.cube].measure / m.cube.measure for m in members)
    fam = SparseFamily(
        root=top,
        members=_sorted_members(members),
        witnesses=witnesses,
        eta_witness=eta,
        packing=packing,
        children=children_map,
        kind=direction,
    )
    fam.carleson_sup = carleson_diagnostics(fam)[0]
    return fam


def union_eta(*etas) -> Fraction:
    """Sparseness guaranteed for a union of families with the given constants."""
    return 1 / sum((1 / Fraction(e) for e in etas), Fraction(0))


def merge_families(*families: SparseFamily) -> SparseFamily:
    seen = {}
    for fam in families:
        for m in fam.members:
            seen.setdefault(m.cube, m)
    merged = SparseFamily(
        root=families[0].root,
        members=_sorted_members(seen.values()),
        eta_witness=union_eta(*(fam.eta_witness for fam in families)),
        packing=[rec for fam in families for rec in fam.packing],
        kind="merged",
    )
    merged.carleson_sup = carleson_diagnostics(merged)[0]
    if merged.carleson_sup * merged.eta_witness > 1:
        raise InvariantViolation(
            "union rule", f"Carleson sup {merged.carleson_sup} exceeds 1/{merged.eta_witness}"
        )
    return merged


# ---------------------------------------------------------------- domination


def _report(lhs: list, rhs: list, constant) -> DominationReport:
    worst = 0
    worst_slack = None
    holds = True
    for i, (a, b) in enumerate(zip(lhs, rhs)):
        slack = constant * b - a
        if worst_slack is None or slack < worst_slack:
            worst, worst_slack = i, slack
        if slack < 0:
            holds = False
    return DominationReport(
        holds, worst, lhs[worst], rhs[worst], Fraction(constant), tuple(lhs), tuple(rhs)
    )


def build_dyadic_decomposition(
    f: StepFunction, Q0, p: MedianParams, cache: MedianCache | None = None
):
    """Union of the up and down families with the pointwise bound
    |f - M_s(f, Q0)| <= 2 * sum sigma(Q) chi_Q, certified at every cell."""
    f, top = _as_top(f, Q0)
    cache = cache if cache is not None and cache.f is f else MedianCache(f)
    up = build_directed_family(f, top, p, UP, cache)
    down = build_directed_family(f, top, p, DOWN, cache)
    fam = merge_families(up, down)
    fam.children = {"up": up, "down": down}
    center = cache.median(top, p.s)
    lhs = [abs(v - center) for v in f.values]
    rhs = accumulate_over_cells(f, [(m.cube, cache.sigma(m.dyadic, p).sigma) for m in fam.members])
    return fam, _report(lhs, rhs, 2)


# ---------------------------------------------------------------- chains


def growth_ratio(p: MedianParams) -> Fraction:
    return max((1 - p.t) / (1 - p.s), p.s / p.t)


def _simplest_between(too_small, too_big) -> Fraction:
    """Simplest positive rational x with not too_small(x) and not too_big(x)."""
    ln, ld, rn, rd = 0, 1, 1, 0
    for _ in range(100000):
        mn, md = ln + rn, ld + rd
        x = Fraction(mn, md)
        if too_small(x):
            ln, ld = mn, md
        elif too_big(x):
            rn, rd = mn, md
        else:
            return x
    raise InvariantViolation("chain ratio search", "did not converge")


@dataclass(frozen=True)
class ChainPlan:
    steps: int
    ratio: Fraction  # side growth per step (before the final step)


def chain_plan(n: int, p: MedianParams, scale=2) -> ChainPlan:
    """Fewest steps k and side ratio rho for a chain from a cube to one
    ``scale`` times larger, with every volume step below 1/r."""
    r = growth_ratio(p)
    lam = Fraction(scale)
    target = lam**n
    if r == 0 or target * r < 1:
        return ChainPlan(1, lam)
    k = 1
    while r**k * target >= 1:
        k += 1
    rho = _simplest_between(
        lambda x: x <= 1 or x ** ((k - 1) * n) * 1 <= target * r,
        lambda x: x**n * r >= 1,
    )
    return ChainPlan(k, rho)


def build_chain(Q: Cube, parent: Cube, p: MedianParams) -> list[Cube]:
    """Nested cubes from Q to parent whose consecutive volumes grow by < 1/r."""
    if Q.dim != parent.dim or not parent.contains_cube(Q):
        raise ValidationError(f"{Q} is not contained in {parent}")
    if Q == parent:
        return [Q]
    lam = parent.side / Q.side
    plan = chain_plan(Q.dim, p, lam)
    r = growth_ratio(p)
    chain = [Q]
    for j in range(1, plan.steps + 1):
        side = parent.side if j == plan.steps else min(Q.side * plan.ratio**j, parent.side)
        prev = chain[-1]
        corner = tuple(
            min(a, pa + parent.side - side) for a, pa in zip(prev.corner, parent.corner)
        )
        chain.append(Cube(corner, side))
    for a, b in zip(chain, chain[1:]):
        if not b.contains_cube(a) or not parent.contains_cube(b):
            raise InvariantViolation("chain containment", f"{a} -> {b}")
        if r and b.measure * r >= a.measure:
            raise InvariantViolation("chain growth", f"{a} -> {b}")
    return chain


def nested_median_checks(f, P: Cube, Pbig: Cube, p: MedianParams) -> list[str]:
    """Failed comparisons between nested cubes P within Pbig, empty when fine."""
    cache = f if isinstance(f, MedianCache) else MedianCache(f)
    failures = []
    if P.measure * (1 - p.s) > (1 - p.t) * Pbig.measure:
        if not cache.median(P, p.s) <= cache.median(Pbig, p.t):
            failures.append("M_s(small) <= M_t(big)")
    if P.measure * p.t >= p.s * Pbig.measure:
        if not cache.median(Pbig, p.s) <= cache.median(P, p.t):
            failures.append("M_s(big) <= M_t(small)")
    return failures


# ---------------------------------------------------------------- general decomposition


def general_constant(n: int, p: MedianParams) -> Fraction:
    return Fraction(2 * (chain_plan(n, p).steps + 1))


def build_general_decomposition(f: StepFunction, Q0, p: MedianParams):
    """Dyadic family plus chains to parents, certified with d_{s,t} weights.

    Certifies |f - M_s(f, Q0)| <= C * sum_{Q in S} d(Q) chi_Q where only
    cubes containing a whole cell count at that cell, and C = 2(k + 1).
    """
    f, top = _as_top(f, Q0)
    cache = MedianCache(f)
    dyadic_fam, _ = build_dyadic_decomposition(f, top, p, cache)
    n = f.dim
    plan = chain_plan(n, p)
    members: dict = {}
    chains = {}
    for m in dyadic_fam.members:
        members.setdefault(m.cube, m)
    for m in dyadic_fam.members:
        if m.dyadic.level == 0:
            continue
        parent = m.dyadic.parent()
        chain = build_chain(m.cube, parent.cube, p)
        chains[m.cube] = chain
        for c in chain[1:]:
            if c not in members:
                dc = dyadic_of(f.root, c)
                members[c] = _dyadic_member(dc) if dc is not None else Member(c, None, "chain", parent)
    d = {c: cache.difference(c, p) for c in members}

    for q, chain in chains.items():
        total = sum((d[c] for c in chain[1:]), Fraction(0))
        up_jump = cache.median(q, p.s) - cache.median(chain[-1], p.s)
        down_jump = cache.median(chain[-1], p.t) - cache.median(q, p.t)
        if max(up_jump, down_jump) > total:
            raise InvariantViolation("chain telescoping bound", f"member {q}")
        for a, b in zip(chain, chain[1:]):
            bad = nested_median_checks(cache, a, b, p)
            if bad:
                raise InvariantViolation("nested cube medians", f"{a} in {b}: {bad}")

    center = cache.median(top, p.s)
    lhs = [abs(v - center) for v in f.values]
    rhs = accumulate_over_cells(f, d.items())
    growth = sum(((plan.ratio**j if j < plan.steps else Fraction(2)) ** n for j in range(plan.steps + 1)), Fraction(0))
    fam = SparseFamily(
        root=top,
        members=_sorted_members(members.values()),
        eta_witness=1 / (dyadic_fam.carleson_sup * growth),
        kind="general",
    )
    fam.children = {"dyadic": dyadic_fam, "chains": chains, "d": d}
    fam.carleson_sup = carleson_diagnostics(fam)[0]
    if fam.carleson_sup * fam.eta_witness > 1:
        raise InvariantViolation("chain Carleson bookkeeping", str(fam.carleson_sup))
    return fam, _report(lhs, rhs, general_constant(n, p))


# ---------------------------------------------------------------- Carleson


def carleson_diagnostics(family) -> tuple[Fraction, Fraction]:
    """(sup over dyadic members Q of sum_{Q' in family, Q' in Q} |Q'| / |Q|, its inverse).

    Exact for dyadic families.  Chain cubes are charged to ancestors of their
    anchor, so for mixed families the sup over dyadic members is a lower bound.
    """
    members = family.members if isinstance(family, SparseFamily) else family
    if not members:
        raise ValidationError("empty family")
    dyadic_keys = {m.dyadic.key: m.dyadic for m in members if m.dyadic is not None}
    if not dyadic_keys:
        return Fraction(1), Fraction(1)
    sums = {k: Fraction(0) for k in dyadic_keys}
    for m in members:
        a = m.dyadic if m.dyadic is not None else m.anchor
        size = m.cube.measure
        for lev in range(a.level, -1, -1):
            key = a.ancestor(lev).key
            if key in sums:
                sums[key] += size
    sup = max(sums[k] / dyadic_keys[k].measure for k in sums)
    return sup, 1 / sup


def brute_force_carleson(cubes: list[Cube]) -> Fraction:
    """O(m^2) sup_Q sum_{Q' in Q} |Q'|/|Q| over an explicit list of cubes."""
    best = Fraction(0)
    for q in cubes:
        tot = sum((c.measure for c in cubes if q.contains_cube(c)), Fraction(0))
        best = max(best, tot / q.measure)
    return best


def integrated_check(f: StepFunction, fam: SparseFamily, report: DominationReport, weights: dict):
    """Exact integrated form of the pointwise bound:
    int |f - M| <= C * max(weights) * sum |Q| <= C * max(weights) * |Q0| / eta.
    Returns (integral, middle, right)."""
    cm = f.cell_measure
    integral = sum(report.lhs_values, Fraction(0)) * cm
    top = max(weights.values()) if weights else Fraction(0)
    total = sum((m.cube.measure for m in fam.members), Fraction(0))
    middle = report.constant_used * top * total
    right = report.constant_used * top * fam.root.measure / fam.eta_witness
    return integral, middle, right
