"""Multi-session matrix-variate Gaussian graphical models.

Estimates a spatial partial-correlation graph shared across sessions of
(time x space) matrix observations and tests edge sets with a simultaneous
sup-norm bootstrap.
"""

from . import errors
from .data import (
    Dimensions,
    EdgeSet,
    GroundTruth,
    MultiSessionDataset,
    load_dataset,
    save_dataset,
    stack_spatial,
    stack_temporal,
)
from .grouplasso import (
    GroupLassoProblem,
    GroupLassoSolution,
    cv_gamma,
    default_gamma,
    fit_all_nodes,
    gamma_from_counts,
    solve,
)
from .inference import (
    AsymptoticCovariance,
    BootstrapResult,
    TestResult,
    TestStatistic,
    bootstrap_quantile,
    c_level_test,
    compute_S,
    run_test,
    s_diagonal,
    simultaneous_test,
    single_edge_pvalues,
    test_from_fits,
    test_statistic,
)
from .experiments import (
    CoverageResult,
    CoverageRow,
    CoverageSpec,
    RocCurve,
    RocResult,
    RocSpec,
    auc_trapezoid,
    config_sha256,
    coverage_rows_as_dicts,
    default_threshold_grid,
    roc_points,
    run_coverage,
    run_roc,
)
from .simulate import (
    GraphKind,
    SimulationSpec,
    TemporalModel,
    dataset_from_models,
    gen_spatial_precision,
    gen_support,
    gen_temporal_model,
    sample_matrix_normal,
    simulate_dataset,
)
from .spatial import SpatialFit, debiased_phi, fit_spatial, omega_rho, residuals
from .temporal import (
    TemporalFit,
    assemble_temporal,
    default_bandwidth,
    fit_banded_regression,
    fit_temporal,
    truncate_singular,
)

__version__ = "0.1.0"

__all__ = [
    "Dimensions",
    "EdgeSet",
    "GroundTruth",
    "MultiSessionDataset",
    "load_dataset",
    "save_dataset",
    "stack_spatial",
    "stack_temporal",
    "GraphKind",
    "SimulationSpec",
    "TemporalModel",
    "dataset_from_models",
    "gen_spatial_precision",
    "gen_support",
    "gen_temporal_model",
    "sample_matrix_normal",
    "simulate_dataset",
    "GroupLassoProblem",
    "GroupLassoSolution",
    "cv_gamma",
    "default_gamma",
    "fit_all_nodes",
    "gamma_from_counts",
    "solve",
    "SpatialFit",
    "debiased_phi",
    "fit_spatial",
    "omega_rho",
    "residuals",
    "TemporalFit",
    "assemble_temporal",
    "default_bandwidth",
    "fit_banded_regression",
    "fit_temporal",
    "truncate_singular",
    "AsymptoticCovariance",
    "BootstrapResult",
    "TestResult",
    "TestStatistic",
    "bootstrap_quantile",
    "c_level_test",
    "compute_S",
    "run_test",
    "s_diagonal",
    "simultaneous_test",
    "single_edge_pvalues",
    "test_from_fits",
    "test_statistic",
    "CoverageResult",
    "CoverageRow",
    "CoverageSpec",
    "RocCurve",
    "RocResult",
    "RocSpec",
    "auc_trapezoid",
    "config_sha256",
    "coverage_rows_as_dicts",
    "default_threshold_grid",
    "roc_points",
    "run_coverage",
    "run_roc",
    "errors",
]
