"""Small hand-checkable cases, one per operation, with values frozen exactly."""

import math
from fractions import Fraction as F

import pytest

from medianosc.core import Cube, DyadicCube, Radical, StepFunction, ValidationError, cell_partition, cube_overlap_measure, restrict_distribution
from medianosc.examples import counterexample_checks, gamma_set, good_interval_scan, haar_counterexample, weak_porosity_rows
from medianosc.median import (
    MedianParams,
    all_dyadic,
    local_mean_oscillation,
    local_mean_oscillation_argmin,
    median,
    median_difference,
    median_seminorm,
    sigma_oscillations,
)
from medianosc.porosity import PointSet, distance_to_set, free_cube_inventory, gap_length_scale, porosity_report, vs_volume
from medianosc.sparse import brute_force_carleson, build_chain, build_directed_family, build_dyadic_decomposition, build_general_decomposition, carleson_diagnostics
from medianosc.weights import Divergence, WeightParams, distance_power_integral, muckenhoupt_constant, neighborhood_measure

UNIT = Cube.of((0,), 1)
QUARTERS = StepFunction(UNIT, 2, [1, 2, 3, 4])
JUMP = StepFunction(UNIT, 1, [-1, 1])
Z = PointSet.lattice(1)


def pairs(dist):
    return [(v, m) for v, m in dist.entries]


def test_partitions_and_overlaps():
    assert [c.cube for c in cell_partition(UNIT, 0)] == [UNIT]
    assert [c.cube.corner[0] for c in cell_partition(UNIT, 2)] == [0, F(1, 4), F(1, 2), F(3, 4)]
    assert {c.side for c in cell_partition(Cube.of((0, 0), 1), 1)} == {F(1, 2)}
    assert cube_overlap_measure(UNIT, UNIT) == 1
    assert cube_overlap_measure(UNIT, Cube.of((2,), 1)) == 0
    assert cube_overlap_measure(UNIT, Cube.of((F(1, 2),), 1)) == F(1, 2)


def test_restrictions():
    assert pairs(restrict_distribution(StepFunction(UNIT, 0, [5]), UNIT)) == [(5, 1)]
    assert pairs(restrict_distribution(QUARTERS, Cube.of((0,), F(1, 2)))) == [(1, F(1, 4)), (2, F(1, 4))]
    assert pairs(restrict_distribution(QUARTERS, Cube.of((F(3, 8),), F(1, 4)))) == [(2, F(1, 8)), (3, F(1, 8))]


def test_medians():
    assert median(JUMP, UNIT, F(1, 3)) == -1
    assert median(QUARTERS, UNIT, 0) == 1
    assert median(QUARTERS, UNIT, F(1, 2)) == 3
    assert median(QUARTERS, UNIT, F(1, 4)) == 2
    assert median_difference(QUARTERS, UNIT, MedianParams(F(1, 4), F(3, 4))) == 2


def test_local_mean_oscillation():
    assert local_mean_oscillation(StepFunction(UNIT, 1, [7, 7]), UNIT, F(1, 2)) == 0
    assert local_mean_oscillation(QUARTERS, UNIT, F(1, 4)) == F(3, 2)
    assert local_mean_oscillation_argmin(QUARTERS, UNIT, F(1, 4)) == F(5, 2)
    assert local_mean_oscillation(JUMP, UNIT, F(1, 2)) == 1


def test_sigma_examples():
    p = MedianParams(F(1, 4), F(3, 4))
    tri = sigma_oscillations(QUARTERS, DyadicCube(UNIT, 1, (0,)), p)
    assert (tri.sigma_plus, tri.sigma_minus, tri.sigma) == (1, 3, 4)
    top = sigma_oscillations(QUARTERS, DyadicCube.top(UNIT), p)
    # the top cube is its own parent, so both terms reduce to d = 4 - 2
    assert top.sigma_plus == top.sigma_minus == 2
    flat = sigma_oscillations(StepFunction(UNIT, 2, [2] * 4), DyadicCube(UNIT, 2, (1,)), p)
    assert flat.sigma == 0


def test_counterexample_layout_and_seminorms():
    assert haar_counterexample(1).values == (1, -1, 1, -1)
    assert haar_counterexample(2).values[4:] == (1, -1, 2, -2)
    f = haar_counterexample(4)
    assert median_seminorm(f, all_dyadic(f.root, 4), MedianParams(F(3, 10), F(9, 20))) == 0
    M = 5
    assert median_seminorm(f, [Cube.of((2 * m,), 2) for m in range(M)], MedianParams(F(1, 8), F(7, 8))) == 2 * M


def test_directed_family_examples():
    p = MedianParams(F(1, 4), F(3, 4))
    flat = build_directed_family(StepFunction(UNIT, 2, [3] * 4), None, p, "up")
    assert len(flat) == 1 and flat.eta_witness == 1
    up = build_directed_family(QUARTERS, None, p, "up")
    assert all(r.selected_measure <= (1 - p.t) / (1 - p.s) * r.node.measure for r in up.packing)
    down = build_directed_family(QUARTERS, None, p, "down")
    assert up.eta_witness >= (p.t - p.s) / (1 - p.s)
    assert down.eta_witness >= (p.t - p.s) / p.t


def test_dyadic_decomposition_on_counterexample_piece():
    f = haar_counterexample(2)
    fam, rep = build_dyadic_decomposition(f, None, MedianParams(F(3, 10), F(9, 20)))
    assert rep.holds and max(rep.lhs_values) > 0


def test_chain_examples():
    p = MedianParams(F(1, 4), F(1, 2))
    chain = build_chain(UNIT, Cube.of((0,), 2), p)
    assert [c.side for c in chain] == [1, F(7, 5), 2]
    assert build_chain(UNIT, UNIT, p) == [UNIT]
    square = build_chain(Cube.of((0, 0), 1), Cube.of((0, 0), 2), p)
    for a, b in zip(square, square[1:]):
        assert b.contains_cube(a) and b.measure < F(3, 2) * a.measure


def test_general_decomposition_examples():
    p = MedianParams(F(3, 10), F(9, 20))
    _, rep = build_general_decomposition(StepFunction(UNIT, 2, [1] * 4), None, p)
    assert rep.holds and set(rep.lhs_values) == set(rep.rhs_values) == {0}
    fam, rep = build_general_decomposition(JUMP, None, p)
    assert median_seminorm(JUMP, all_dyadic(UNIT, 3), p) == 0
    assert rep.holds and max(rep.rhs_values) > 0
    assert all(r >= l for l, r in zip(rep.lhs_values, rep.rhs_values))


def test_carleson_examples():
    assert brute_force_carleson([UNIT]) == 1
    assert brute_force_carleson([UNIT, Cube.of((0,), F(1, 2))]) == F(3, 2)
    fam = build_dyadic_decomposition(StepFunction(UNIT, 3, list(range(8))), None, MedianParams(0, F(1, 2)))[0]
    sup, eta = carleson_diagnostics(fam)
    assert eta == 1 / sup
    d = 3
    tree = [dc.cube for dc in all_dyadic(UNIT, d)]
    assert brute_force_carleson(tree) == d + 1


def test_distances():
    assert distance_to_set((-3,), PointSet.single(0)) == 3
    assert distance_to_set((F(9, 4),), Z) == F(1, 4)
    assert distance_to_set((F(1, 2), F(1, 2)), PointSet.lattice(2)) == Radical.power(F(1, 2), F(1, 2))


def test_inventories():
    # the listed cubes go down to side 1/8, i.e. four halvings of [0, 2)
    inv = free_cube_inventory(Z, Cube.of((0,), 2), 4)
    got = sorted((d.cube.corner[0], d.cube.side) for d in inv.cubes)
    want = sorted([(F(1, 2), F(1, 2)), (F(3, 2), F(1, 2)), (F(1, 4), F(1, 4)), (F(5, 4), F(1, 4)), (F(1, 8), F(1, 8)), (F(9, 8), F(1, 8))])
    assert got == want
    assert free_cube_inventory(PointSet.finite([(F(k, 16),) for k in range(16)]), UNIT, 3).cubes == []
    inv = free_cube_inventory(PointSet.single(0), UNIT, 2)
    assert sorted(d.cube.corner[0] for d in inv.cubes) == [F(1, 4), F(1, 2)]


def test_volume_scales():
    inv = free_cube_inventory(Z, Cube.of((0,), 2), 4)
    assert vs_volume(inv, F(1, 2)).value == F(1, 2)
    assert vs_volume(inv, F(3, 8)).value == F(1, 4)
    away = free_cube_inventory(PointSet.single(5), UNIT, 3)
    assert all(vs_volume(away, s).value == 1 for s in (F(1, 8), F(1, 2), F(1)))


def test_gap_scales():
    E = PointSet.finite([0, 1, 3])
    assert gap_length_scale(E, (0, 3), F(1, 2)) == 2
    assert gap_length_scale(E, (0, 3), F(1, 6)) == 1
    for s in (F(1, 4), F(1)):
        assert gap_length_scale(Z, (F(1, 4), F(3, 4)), s) == F(1, 2)
    half = gamma_set(F(1, 2), 10**4)
    assert gap_length_scale(half, (1, 3), F(1, 2)) == 2 - Radical.power(3, F(1, 2))


def test_porosity_flags():
    p = MedianParams(F(1, 4), F(3, 4))
    fam = [Cube.of((-F(2) ** k / 2,), F(2) ** k) for k in range(-3, 4)]
    rep = porosity_report(PointSet.single(0), fam, p, 8, sandwich=False)
    assert rep.porous and rep.weakly_porous and rep.median_porous
    grow = porosity_report(Z, [Cube.of((0,), F(2) ** k) for k in range(0, 5)], p, 8, sandwich=False)
    assert grow.weakly_porous


def test_integrals():
    Z0 = PointSet.single(0)
    assert distance_power_integral(Z0, UNIT, F(-1, 2)) == 2
    assert distance_power_integral(Z, Cube.of((F(1, 3),), 2), 0) == 2
    assert distance_power_integral(Z, UNIT, 1) == F(1, 4)


def test_neighbourhoods():
    assert neighborhood_measure(PointSet.single(0), F(1, 2), Cube.of((-1,), 2)) == 1
    assert neighborhood_measure(Z, F(1, 4), Cube.of((0,), 4)) == 2
    assert neighborhood_measure(PointSet.single(0), 10, Cube.of((3,), 2)) == 2


def test_weight_constants():
    Z0 = PointSet.single(0)
    fam = [Cube.of((-1,), 2)]
    assert muckenhoupt_constant(Z0, WeightParams(F(1, 2), 2), fam).value == F(4, 3)
    with pytest.raises(Divergence):
        muckenhoupt_constant(Z0, WeightParams(2, 2), fam)


def test_gamma_sets():
    with pytest.raises(ValidationError):
        gamma_set(1, 10)
    assert [float(x) for x in gamma_set(F(1, 2), 4).points_1d(0, 10, True, True)] == pytest.approx([1, 2**0.5, 3**0.5, 2])
    near = gamma_set(F(99, 100), 50).points_1d(40, 50, True, True)
    assert all(abs(float(x) - round(float(x))) < 2 for x in near)


def test_good_interval_examples():
    rep = good_interval_scan(F(1, 2), F(1, 2), 100)
    row = next(r for r in rep.intervals if (r.n0, r.n1) == (1, 4))
    assert (row.left, row.right) == (1, 3)
    assert row.predicted == F(1, 2)
    assert row.ratio == pytest.approx(0.5359, abs=1e-4)
    one_gap = next(r for r in rep.intervals if r.n1 == r.n0 + 1)
    assert one_gap.ratio > 0


def test_weak_scales_along_initial_intervals():
    rows = weak_porosity_rows(gamma_set(F(1, 2), 10**4), [4, 16, 64, 256])
    assert [r.longest for r in rows] == [1, 1, 1, 1]
    scales = [r.scale for r in rows]
    # the first two intervals share the value 1, strict decrease starts after that
    assert scales[0] == scales[1]
    assert all(a > b for a, b in zip(scales[1:], scales[2:]))


def test_weak_growth_rate_depends_on_gamma():
    ms = (2**8, 2**10, 2**12)
    slopes = {}
    for g in (F(3, 10), F(9, 10)):
        rows = weak_porosity_rows(gamma_set(g, ms[-1]), ms)
        xs = [math.log(float(r.length)) for r in rows]
        ys = [math.log(r.ratio) for r in rows]
        slopes[g] = (ys[-1] - ys[0]) / (xs[-1] - xs[0])
    assert slopes[F(3, 10)] > slopes[F(9, 10)] > 0
