"""Discretized radial projections of fractal measures.

Finitely supported measures, sphere-cap pushforwards, counting-dimension
estimates, energy and projection inequality probes, tube decompositions,
and the experiments built on them.
"""
from .errors import BudgetError, ConfigError, ProjectionError, RadprojError
from .measures import (
    CantorSpec,
    PointMeasure,
    build_cantor_measure,
    circle_measure,
    four_corner_spec,
    frostman_fit,
    full_grid_spec,
    restrict,
    segment_measure,
)
from .projections import (
    ScaleIndex,
    SphereCapGrid,
    mollify,
    orthogonal_pushforward,
    radial_pushforward,
    worst_capset,
)
from .dimension import box_dimension, cap_counting_dimension, criteria_certificate
from .analysis import (
    energy_direct,
    energy_fourier,
    lp_radial_moment,
    orponen_identity_check,
    schur_test_check,
)
from .tubes import (
    bad_term,
    dual_bad_bound,
    goal_check,
    good_bad_partition,
    good_term,
    tube_mass,
)
from .experiments import bound_table, exceptional_sweep, run_pipeline, sharpness_endpoint_demo

__version__ = "0.1.0"
