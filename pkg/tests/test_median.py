import random
from fractions import Fraction as F

import pytest

from medianosc.core import Cube, DyadicCube, EmptyOverlapError, StepFunction, ValidationError, WeightedValueMultiset, random_step_function
from medianosc.median import (
    MedianCache,
    MedianParams,
    all_dyadic,
    local_mean_oscillation,
    local_mean_oscillation_argmin,
    median,
    median_difference,
    median_invariant_failures,
    median_seminorm,
    median_with_abs,
    sigma_oscillations,
    smallest_value_covering,
    upper_median,
    upper_median_by_excess,
)


def defining_median(dist, s):
    """Largest lambda among the values with |{f < lambda}| <= s|Q| (values only can be maximizers)."""
    return max(v for v in dist.values if dist.mass_below(v) <= s * dist.total_mass)


def ramp():
    return StepFunction(Cube.of((0,), 1), 2, [0, 1, 2, 3])


def test_upper_median_frozen_values():
    f = ramp()
    Q = DyadicCube.top(f.root)
    assert [median(f, Q, F(k, 8)) for k in range(8)] == [0, 0, 1, 1, 2, 2, 3, 3]
    assert median_difference(f, Q, MedianParams(F(1, 4), F(3, 4))) == 2


def test_level_zero_is_essential_inf():
    f = StepFunction(Cube.of((0,), 1), 2, [5, -2, 7, 7])
    assert median(f, f.root, 0) == -2


def test_median_of_non_dyadic_cube():
    f = ramp()
    assert median(f, Cube.of((F(1, 8),), F(1, 2)), F(1, 2)) == 1
    assert median(f, Cube.of((F(1, 8),), F(1, 2)), F(3, 4)) == 2


@pytest.mark.parametrize("s", [-F(1, 10), F(1), F(3, 2)])
def test_level_range(s):
    f = ramp()
    with pytest.raises(ValidationError):
        median(f, f.root, s)


def test_params_validation():
    with pytest.raises(ValidationError):
        MedianParams(F(1, 2), F(1, 2))
    with pytest.raises(ValidationError):
        MedianParams(F(1, 2), F(1))


def test_empty_distribution():
    with pytest.raises(EmptyOverlapError):
        upper_median(WeightedValueMultiset([]), F(1, 2))


def test_three_median_routes_agree(rng):
    for _ in range(300):
        f = random_step_function(rng, rng.choice((1, 2)), rng.randint(0, 3))
        dist = f.dyadic_distribution(DyadicCube.top(f.root))
        s = F(rng.randint(0, 19), 20)
        m = upper_median(dist, s)
        assert m == upper_median_by_excess(dist, s) == defining_median(dist, s)


def test_oscillation_minimizer_against_grid(rng):
    for _ in range(40):
        f = random_step_function(rng, 1, rng.randint(1, 4))
        dist = f.dyadic_distribution(DyadicCube.top(f.root))
        a = F(rng.randint(1, 7), 8)
        best = local_mean_oscillation(f, f.root, a)
        c = local_mean_oscillation_argmin(f, f.root, a)
        assert median_with_abs(dist, c, 1 - a) == best
        # no center on a fine grid does better
        for k in range(-7 * 24, 7 * 24 + 1):
            assert median_with_abs(dist, F(k, 24), 1 - a) >= best


def test_oscillation_frozen():
    f = ramp()
    # center 1 gives distances {1, 0, 1, 2}; its upper half-median is 1
    assert local_mean_oscillation(f, f.root, F(1, 2)) == 1
    assert local_mean_oscillation(f, f.root, F(7, 8)) == 0
    with pytest.raises(ValidationError):
        local_mean_oscillation(f, f.root, 1)


def test_sigma_terms():
    f = StepFunction(Cube.of((0,), 1), 2, [0, 0, 4, 8])
    p = MedianParams(F(1, 4), F(3, 4))
    Q = DyadicCube(f.root, 1, (1,))
    tri = sigma_oscillations(f, Q, p)
    # on [1/2, 1): M_s = 4, M_t = 8; on [0, 1): M_s = 0, M_t = 8
    assert tri.sigma_plus == 4 + 4
    assert tri.sigma_minus == 4
    assert tri.sigma == 12
    top = sigma_oscillations(f, DyadicCube.top(f.root), p)
    assert top.sigma_plus == top.sigma_minus == 8


def test_seminorm_and_cache():
    f = ramp()
    p = MedianParams(F(1, 4), F(1, 2))
    fam = all_dyadic(f.root, 3)
    assert len(fam) == 15
    assert median_seminorm(f, fam, p) == 1
    c = MedianCache(f)
    assert c.median(fam[0], F(1, 2)) == 2
    assert c.difference(fam[0], p) == 1
    with pytest.raises(ValidationError):
        median_seminorm(f, [], p)


def test_smallest_value_covering():
    dist = WeightedValueMultiset([(F(0), F(1, 4)), (F(1), F(1, 4)), (F(5), F(1, 2))])
    assert smallest_value_covering(dist, F(1, 4)) == 0
    assert smallest_value_covering(dist, F(3, 10)) == 1
    assert smallest_value_covering(dist, F(1)) == 5


def test_invariants_on_fixed_examples():
    f = StepFunction(Cube.of((0, 0), 1), 1, [F(-3), F(1, 2), F(1, 2), F(7)])
    for Q in (DyadicCube.top(f.root), Cube.of((F(1, 4), F(1, 4)), F(1, 2))):
        for s, t in [(F(0), F(1, 2)), (F(1, 4), F(3, 4)), (F(1, 3), F(5, 6))]:
            assert median_invariant_failures(f, Q, MedianParams(s, t)) == []
