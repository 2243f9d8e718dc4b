"""Separation of sparse signals from additive bounded noise by multi-penalty
minimization with alternating iterative thresholding."""

__version__ = "0.1.0"

from .errors import NumericalError
from .linalg import (
    DenseOperator,
    MeasurementProblem,
    apply,
    apply_adjoint,
    estimate_operator_norm,
    load_problem,
    normalize_problem,
    save_problem,
)
from .prox import (
    LpThresholdParams,
    LqShrinkParams,
    brute_force_prox_1d,
    shrink_lq,
    threshold_half_closed_form,
    threshold_linf,
    threshold_lp,
)
from .solver import (
    INF,
    FixedPointReport,
    RegParams,
    SolutionPair,
    SolveConfig,
    SolveTrace,
    check_fixed_point,
    eval_functional,
    eval_surrogate_u,
    eval_surrogate_v,
    inner_u_step,
    inner_v_step,
    mono_solve,
    solve,
    write_trace_jsonl,
)
from .experiments import (
    PAPER_GRID,
    ComparisonStats,
    GridResult,
    GridSpec,
    ProblemSpec,
    best_parameter_regions,
    best_result,
    compare_multi_mono,
    generate_problem,
    grid_search,
    metric_ae,
    metric_sd,
    support_set,
    write_results_csv,
)
from .analysis import PcaProjection, PointCloud, feasible_cloud, pca_project

__all__ = [name for name in dir() if not name.startswith("_")]
