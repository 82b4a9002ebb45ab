"""Koopman surrogate models with consistent manifold reprojection.

Fit a lifted linear transition matrix from snapshot data, then keep its
iterates on the lifted manifold with a coordinate or weighted closest-point
projection; includes the benchmark systems, error metrics and sweeps used
to compare the projection rules.
"""

from .dictionary import (
    Dictionary,
    dictionary_from_exponents,
    exclusions_from_labels,
    monomial_dictionary,
)
from .dynamics import (
    Box,
    DynamicalSystem,
    FlowResult,
    IntegrationError,
    builtin_systems,
    flow,
    flow_batch,
    flow_trajectory,
    get_system,
    register_system,
)
from .edmd import (
    FitError,
    KoopmanApproximation,
    SnapshotSet,
    build_snapshots,
    fit,
    sample_uniform,
)
from .evaluation import (
    ErrorGrid,
    ErrorSeries,
    MeanErrorSeries,
    SweepResult,
    difference_grid,
    error_grid,
    mean_error_over_time,
    one_step_error,
    timestep_sweep,
    trajectory_error_series,
)
from .manifold import (
    BoundCheckReport,
    ClosestPointConfig,
    Metric,
    MetricConditionReport,
    ProjectionResult,
    Projector,
    ReconstructionError,
    ReconstructionMap,
    build_projector,
    check_metric_condition,
    coordinate_metric,
    coordinate_reconstruction,
    default_reconstruction,
    geometric_metric,
    project_closest,
    project_coordinate,
    projection_bound_check,
    ratio_reconstruction,
)
from .surrogate import Rollout, StepError, Surrogate, rollout_lifted

__version__ = "0.1.0"
