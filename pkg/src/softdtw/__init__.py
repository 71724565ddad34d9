"""Soft-DTW: a differentiable discrepancy between time series, and learning with it."""

__version__ = "0.1.0"

from .core import (
    ForwardTable,
    alignment_matrix,
    as_series,
    cost_matrix,
    dtw,
    jacobian_apply,
    optimal_path_backtrack,
    sdtw,
    sdtw_backward,
    sdtw_batch,
    sdtw_forward,
    sdtw_value_and_grad,
    soft_min,
    squared_euclidean_cost,
)
from .barycenter import (
    BarycenterProblem,
    OptimizerConfig,
    barycenter_gradient,
    barycenter_objective,
    dba_barycenter,
    init_euclidean_mean,
    init_random,
    soft_barycenter,
    subgradient_barycenter,
)
from .clustering import lloyd_kmeans, nearest_centroid_fit, nearest_centroid_predict, select_gamma
