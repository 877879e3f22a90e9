import functools
import math
import random
from fractions import Fraction as F

import pytest

from medianosc.core import Cube, Radical, ValidationError, cell_partition
from medianosc.median import MedianParams
from medianosc.porosity import (
    LazyGap,
    PointSet,
    brute_force_vs,
    distance_to_set,
    equal_mass_upper_median,
    free_cube_inventory,
    gap_length_scale,
    interval_gaps,
    lower_distance_values,
    order_statistic,
    porosity_report,
    prop_sandwich,
    read_point_file,
    resolution_depth,
    upper_distance_function,
    vs_volume,
)
from medianosc.examples import gamma_set

Z = PointSet.lattice(1)
ZERO = PointSet.single(0)


def exact_sorted(values):
    return sorted(values, key=functools.cmp_to_key(lambda a, b: (a > b) - (a < b)))


def test_integer_example_frozen():
    inv = free_cube_inventory(Z, Cube.of((0,), 2), 6)
    assert vs_volume(inv, F(1, 2)).value == F(1, 2)
    assert vs_volume(inv, F(3, 8)).value == F(1, 4)
    assert vs_volume(inv, F(1, 2)).side == F(1, 2)


def test_volume_scale_matches_subfamily_oracle(rng):
    for _ in range(40):
        n = rng.choice((1, 2))
        J = rng.randint(1, 3)
        Q0 = Cube(tuple(F(rng.randint(-2, 2), 4) for _ in range(n)), F(rng.randint(1, 3), 2))
        pts = [tuple(F(rng.randint(-4, 8), 8) for _ in range(n)) for _ in range(rng.randint(1, 5))]
        E = PointSet.finite(pts)
        inv = free_cube_inventory(E, Q0, J)
        for s in (F(1, 8), F(1, 3), F(1, 2), F(1)):
            assert vs_volume(inv, s) == brute_force_vs(E, Q0, J, s)


def test_inventory_cover_is_disjoint_and_maximal():
    E = PointSet.finite([(F(1, 3), F(1, 5))])
    Q0 = Cube.of((0, 0), 1)
    inv = free_cube_inventory(E, Q0, 4)
    for dc in inv.cubes:
        assert not E.meets(dc.cube)
        assert E.meets(dc.parent().cube)
    # only the one depth-4 cell holding the point stays uncovered
    assert inv.covered() == 1 - F(1, 256)


def test_volume_scale_level_range():
    inv = free_cube_inventory(Z, Cube.of((0,), 2), 3)
    with pytest.raises(ValidationError):
        vs_volume(inv, 0)


def test_distance_queries():
    assert distance_to_set((F(3, 10),), Z) == F(3, 10)
    assert Z.nearest_1d(F(5, 2)) == (2, 3)
    E = PointSet.subspace(2, 1)
    assert E.squared_distance((F(7), F(-3, 2))) == F(9, 4)
    P = PointSet.finite([(0, 0), (3, 4)])
    assert P.squared_distance((3, 0)) == 9
    assert P.closed_box_sq_distance(Cube.of((1, 1), 1)) == 2


def test_gamma_points_are_exact_roots():
    E = gamma_set(F(1, 2), 400)
    pts = E.points_1d(F(3), F(5), True, True)
    assert [float(x) ** 2 for x in pts] == pytest.approx(list(range(9, 26)))
    assert pts[0] == 3 and pts[-1] == 5


def test_gap_scale_matches_exact_sort_oracle():
    for gamma in (F(1, 2), F(1, 3), F(2, 3)):
        E = gamma_set(gamma, 10**4)
        for a, b in [(F(1), F(7)), (F(2), F(13, 2)), (F(1, 3), F(9))]:
            gaps = interval_gaps(E, a, b)
            lengths = exact_sorted([g.length for g in gaps])[::-1]
            for s in (F(1, 4), F(1, 2), F(3, 4), F(7, 8)):
                target = (1 - s) * (b - a)
                acc = F(0)
                for L in lengths:
                    acc = acc + L
                    if acc >= target:
                        break
                assert gap_length_scale(E, (a, b), s) == L
            assert gap_length_scale(E, (a, b), 1) == lengths[0]


def test_gaps_of_integer_set():
    gaps = interval_gaps(Z, F(1, 2), F(3))
    assert [g.length for g in gaps] == [F(1, 2), 1, 1]
    assert gap_length_scale(Z, (F(1, 2), F(3)), F(1, 2)) == 1


def test_order_statistic_against_exact_sort():
    rng = random.Random(2)
    for _ in range(30):
        vals = [Radical.power(rng.randint(1, 60), F(1, rng.choice((2, 3)))) for _ in range(25)]
        vals += [F(rng.randint(1, 40), 10) for _ in range(10)]
        ref = exact_sorted(vals)
        for k in (0, 7, 17, len(vals) - 1):
            assert order_statistic(vals, k) == ref[k]
        assert equal_mass_upper_median(vals, F(1, 2)) == ref[len(vals) // 2]


def test_lower_distance_values_bound_the_pointwise_distance():
    E = gamma_set(F(1, 2), 10**4)
    Q = Cube.of((F(3, 2),), 2)
    J = 5
    low = lower_distance_values(E, Q, J)
    up = upper_distance_function(E, Q, J)
    for i, dc in enumerate(cell_partition(Q, J)):
        lo = LazyGap.exact(low[i]) if isinstance(low[i], LazyGap) else low[i]
        for x in (dc.cube.corner[0], dc.cube.center[0]):
            d = E.distance_1d(x)
            assert lo <= d <= up.values[i]


def test_resolution_depth_resolves_local_gaps():
    E = gamma_set(F(1, 2), 10**4)
    Q = Cube.of((F(40),), 8)
    J = resolution_depth(E, Q, 4)
    smallest = math.sqrt(2305) - math.sqrt(2304)  # last gap reached by the neighbours of Q
    assert float(Q.side) / 2**J <= smallest / 8
    assert float(Q.side) / 2 ** (J - 1) > smallest / 8
    assert resolution_depth(Z, Cube.of((0,), 1), 6) == 6


def test_sandwich_on_single_cube():
    rec = prop_sandwich(Z, Cube.of((0,), 2), MedianParams(F(1, 4), F(3, 4)), 6)
    assert rec.lower_ok and rec.upper_ok and rec.lower_ok_cube_constant
    # d on [0, 2) is a tent with peak 1/2; its upper quarter-median is 1/8
    assert rec.m_s_pow == F(1, 8)


def test_report_flags_and_parallel_agreement():
    fam = [Cube.of((k,), 2) for k in range(-3, 3)] + [Cube.of((F(1, 3),), F(1, 2))]
    p = MedianParams(F(1, 4), F(3, 4))
    one = porosity_report(Z, fam, p, 6)
    two = porosity_report(Z, fam, p, 6, jobs=2)
    assert [r.V_s for r in one.rows] == [r.V_s for r in two.rows]
    assert one.median_porous and one.weakly_porous
    assert not one.rows[-1].meets
    with pytest.raises(ValidationError):
        porosity_report(Z, [], p, 3)


def test_read_point_file():
    E = read_point_file("# pts\n0 0\n1/2 3  # trailing\n\n")
    assert E.dim == 2 and list(E.points) == [(0, 0), (F(1, 2), 3)]
    with pytest.raises(ValidationError):
        read_point_file("1 2\n3\n")
    with pytest.raises(ValidationError):
        read_point_file("a b\n")
    with pytest.raises(ValidationError):
        read_point_file("")
