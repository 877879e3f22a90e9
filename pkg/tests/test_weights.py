import math
import random
from fractions import Fraction as F

import pytest
from scipy import integrate

from medianosc.core import Cube, ValidationError
from medianosc.examples import gamma_set
from medianosc.porosity import PointSet
from medianosc.weights import (
    Divergence,
    MuConfig,
    QuadratureValue,
    WeightParams,
    ap_product,
    ap_scale_profile,
    distance_power_average,
    distance_power_integral,
    log_distance_average,
    mu_exponent_estimate,
    muckenhoupt_constant,
    neighborhood_measure,
)

Z = PointSet.lattice(1)
ZERO = PointSet.single(0)


def quad_oracle(E, a, b, q):
    """Adaptive quadrature split at the points of E."""
    pts = [float(x) for x in E.points_1d(F(a), F(b), True, True)]
    knots = sorted({float(a), float(b), *pts})
    total = 0.0
    for u, v in zip(knots, knots[1:]):
        val, _ = integrate.quad(lambda x: float(E.distance_1d(F(x))) ** float(q), u, v, limit=200)
        total += val
    return total


def test_closed_forms_frozen():
    assert distance_power_integral(ZERO, Cube.of((-1,), 2), F(-1, 2)) == 4
    assert distance_power_average(ZERO, Cube.of((-1,), 2), F(1, 2)) == F(2, 3)
    assert distance_power_integral(Z, Cube.of((0,), 2), 1) == F(1, 2)
    assert distance_power_integral(Z, Cube.of((0,), 1), 0) == 1


def test_one_dimensional_integrals_match_quadrature():
    rng = random.Random(11)
    for _ in range(12):
        E = rng.choice([Z, ZERO, gamma_set(F(1, 2), 400)])
        a = F(rng.randint(-8, 8), 4)
        b = a + F(rng.randint(1, 12), 4)
        if E.kind == "gamma" and a <= 0:
            a, b = a + 3, b + 3
        q = rng.choice([F(-1, 3), F(1, 2), F(2), F(3, 2)])
        exact = distance_power_integral(E, Cube((a,), b - a), q)
        assert float(exact) == pytest.approx(quad_oracle(E, a, b, q), rel=1e-7)


def test_log_average_matches_quadrature():
    for E, a, b in [(ZERO, -1, 1), (Z, F(1, 3), F(7, 2))]:
        val = log_distance_average(E, Cube((F(a),), F(b) - F(a)))
        ref, _ = integrate.quad(lambda x: math.log(float(E.distance_1d(F(x)))), float(a), float(b), points=[0, 1, 2, 3], limit=200)
        assert val == pytest.approx(ref / float(F(b) - F(a)), rel=1e-7)


def test_divergence_is_reported():
    with pytest.raises(Divergence) as info:
        distance_power_integral(ZERO, Cube.of((-1,), 2), -1)
    assert info.value.exponent == -1
    # off the set the same exponent is finite
    assert distance_power_integral(ZERO, Cube.of((1,), 1), -1) == pytest.approx(math.log(2))


def test_plane_quadrature_against_scipy():
    E = PointSet.subspace(2, 1)
    Q = Cube.of((0, F(1, 4)), 1)
    val = distance_power_integral(E, Q, F(-1, 2), mesh=7)
    assert isinstance(val, QuadratureValue)
    ref, _ = integrate.dblquad(lambda y, x: abs(y) ** -0.5, 0, 1, 0.25, 1.25)
    assert float(val) == pytest.approx(ref, rel=1e-3)


def test_neighbourhood_measure_exact_and_bounds():
    assert neighborhood_measure(Z, F(1, 4), Cube.of((0,), 2)) == 1
    assert neighborhood_measure(ZERO, 1, Cube.of((-4,), 8)) == 2
    b = neighborhood_measure(PointSet.single((0, 0)), F(1, 2), Cube.of((-1, -1), 2), mesh=6)
    assert b.lower <= F(314159, 400000) <= b.upper
    with pytest.raises(ValidationError):
        neighborhood_measure(Z, 0, Cube.of((0,), 1))


def test_a2_constant_closed_form():
    rep = muckenhoupt_constant(ZERO, WeightParams(F(1, 2), 2), [Cube.of((-1,), 2)])
    assert rep.value == F(4, 3)


def test_ap_constants_decrease_in_p():
    Q = Cube.of((0,), 1)
    a = F(1, 2)
    vals = [float(ap_product(ZERO, WeightParams(a, p), Q).product) for p in (1, 2, 3, "inf")]
    assert vals == sorted(vals, reverse=True)
    assert vals[0] == pytest.approx(2.0)


def test_weight_params():
    assert WeightParams(F(1, 2), 3).conjugate == F(3, 2)
    assert WeightParams(F(1, 2), "inf").conjugate == 1
    for bad in [(0, 2), (1, F(1, 2))]:
        with pytest.raises(ValidationError):
            WeightParams(*bad)


def test_scale_profiles_separate_ranges():
    w_in, w_out = WeightParams(F(9, 10), 2), WeightParams(F(11, 10), 2)
    flat = ap_scale_profile(ZERO, w_in, 0, range(-4, 5))
    grow = ap_scale_profile(ZERO, w_out, 0, range(-4, 5))
    assert max(r.value for r in flat) == pytest.approx(min(r.value for r in flat), rel=1e-9)
    assert all(not r.divergent for r in flat)
    assert all(r.divergent for r in grow)
    assert all(x.value < y.value for x, y in zip(grow, grow[1:]))


@pytest.mark.parametrize("E,p", [(ZERO, "inf"), (ZERO, 2), (Z, 1)])
def test_mu_estimate_near_one(E, p):
    est = mu_exponent_estimate(E, p)
    assert est.lower <= est.upper
    assert est.brackets(1.0, 0.1)

