"""Exact median oscillation, sparse domination and distance-set geometry for step functions."""

from .core import (
    BudgetError,
    Cube,
    DyadicCube,
    EmptyOverlapError,
    InvariantViolation,
    LatticeError,
    MedianOscError,
    Radical,
    StepFunction,
    ValidationError,
    WeightedValueMultiset,
    restrict_distribution,
    to_rational,
)
from .median import (
    MedianParams,
    OscillationTriple,
    local_mean_oscillation,
    median,
    median_difference,
    median_seminorm,
    sigma_oscillations,
    upper_median,
)
from .porosity import PointSet, distance_to_set, free_cube_inventory, gap_length_scale, porosity_report, vs_volume
from .sparse import build_dyadic_decomposition, build_general_decomposition, carleson_diagnostics
from .weights import Divergence, WeightParams, distance_power_integral, mu_exponent_estimate, muckenhoupt_constant

__version__ = "0.1.0"
