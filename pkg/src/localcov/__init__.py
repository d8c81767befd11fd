"""Nonparametric conditional local independence testing for counting processes."""

from .errors import (
    ConvergenceError,
    DegenerateVarianceError,
    DomainError,
    GridMismatchError,
    IllConditionedError,
    InputError,
    LocalCovError,
    UnsupportedScenarioError,
)
from .grid import (
    CountingRecord,
    PathMatrix,
    PredictablePath,
    TimeGrid,
    compensated_increments,
    rs_integral,
    transform_integrand,
)
from .learners import (
    FittedIntensity,
    FittedResidual,
    LearnerConfig,
    TrainSplit,
    fit_additive_residual,
    fit_historical_loglinear_intensity,
    fit_time_independent_quantile_residual,
    oracle_nuisances,
)
from .lcm import (
    FoldPartition,
    LcmPath,
    empirical_variance_path,
    estimate_lcm_crossfit,
    estimate_lcm_plugin,
    estimate_lcm_split,
)
from .lct import (
    TestReport,
    endpoint_statistic,
    endpoint_test_from_path,
    run_endpoint_test,
    run_lct,
    run_xlct,
    sup_statistic,
    sup_test_from_path,
)
from .coxhr import cox_hazard_ratio_test
from .nulldist import SupNullDist, expected_supremum, fs_cdf, fs_quantile
from .sim import DgpConfig, Rho0Spec, SimulatedDataset, kernel_eval, sample_dataset
from .mcoracle import mc_true_gamma

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DegenerateVarianceError", "DomainError",
    "GridMismatchError", "IllConditionedError", "InputError", "LocalCovError",
    "UnsupportedScenarioError",
    "CountingRecord", "PathMatrix", "PredictablePath", "TimeGrid",
    "compensated_increments", "rs_integral", "transform_integrand",
    "FittedIntensity", "FittedResidual", "LearnerConfig", "TrainSplit",
    "fit_additive_residual", "fit_historical_loglinear_intensity",
    "fit_time_independent_quantile_residual", "oracle_nuisances",
    "FoldPartition", "LcmPath", "empirical_variance_path",
    "estimate_lcm_crossfit", "estimate_lcm_plugin", "estimate_lcm_split",
    "TestReport", "endpoint_statistic", "endpoint_test_from_path",
    "run_endpoint_test", "run_lct", "run_xlct", "sup_statistic", "sup_test_from_path",
    "cox_hazard_ratio_test",
    "SupNullDist", "expected_supremum", "fs_cdf", "fs_quantile",
    "DgpConfig", "Rho0Spec", "SimulatedDataset", "kernel_eval", "sample_dataset",
    "mc_true_gamma",
]
