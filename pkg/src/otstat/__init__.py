"""Optimal-transport statistics: Wasserstein distances, barycenters and
geodesic PCA for datasets of probability measures."""

from .measures import (
    DiscreteMeasure,
    Grid,
    GridMeasure,
    QuantileCurve,
    bin_to_grid,
    clamp_interior,
    empirical_measure,
    grid_measure,
    measure_from_quantile,
    quantile_curve,
    quantile_function,
    quantile_levels,
)
from .exact import (
    ConvergenceError,
    TransportPlan,
    exact_w2_grid,
    gaussian_w2_1d,
    geodesic_1d,
    monotone_plan_cost,
    transport_simplex,
    w2_1d,
    w2_1d_squared,
)
from .sinkhorn import (
    CostMatrix,
    SinkhornConfig,
    SinkhornOverflow,
    SinkhornResult,
    cost_matrix,
    lipschitz_constant,
    regularized_cost,
    sinkhorn_divergence,
    sinkhorn_plan,
)
from .barycenters import (
    BarycenterConfig,
    BarycenterResult,
    GLConfig,
    GLRow,
    GLSelection,
    barycenter_1d_order_stats,
    barycenter_1d_quantile,
    barycenter_curve,
    barycenter_objective,
    gl_select_epsilon,
    kde_quantiles,
    sinkhorn_barycenter,
    smoothed_barycenter_1d,
    variance_bound,
)
from .gpca import (
    GpcaResult,
    TangentVector,
    exp_map,
    feasible_interval,
    gpca,
    is_feasible,
    isotonic_project,
    log_map,
    log_pca,
)
from .experiments import (
    AnalyticDistribution,
    RandomMeasureFamily,
    RateCell,
    RateExperimentReport,
    ReferenceBarycenter,
    draw_units,
    emit_report,
    integrated_quantile_variance,
    j2_functional,
    rate_experiment,
    reference_barycenter,
    sample_family,
    w2_sq_to_gaussian,
    w2_sq_to_reference,
)

__version__ = "0.1.0"
