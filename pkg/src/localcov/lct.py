"""Test statistics, p-values and verdicts built on the local covariance path."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import DegenerateVarianceError, DomainError
from .lcm import FoldPartition, LcmPath, estimate_lcm_crossfit
from .learners import LearnerConfig
from .nulldist import SupNullDist, fs_cdf, fs_quantile


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test, serializable as a single JSON line."""

    __test__ = False  # not a pytest collection target

    method: str
    n: int
    k: Optional[int]
    statistic: float
    p_value: float
    alpha: float
    quantile: float
    reject: bool
    seed: Optional[int] = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise DomainError("p-value must lie in [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if self.reject != (self.statistic > self.quantile):
            raise DomainError("verdict inconsistent with statistic and quantile")
        if self.reject != (self.p_value < self.alpha):
            raise DomainError("verdict inconsistent with p-value and alpha")

    def to_json(self) -> str:
        return json.dumps({
            "method": self.method,
            "n": self.n,
            "K": self.k,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "alpha": self.alpha,
            "quantile": self.quantile,
            "reject": self.reject,
            "seed": self.seed,
        })


def sup_statistic(path: LcmPath) -> float:
    """Normalized supremum: sqrt(scale_n) * max |gamma| / sqrt(variance at 1)."""
    v_end = path.variance[-1]
    if v_end <= 0:
        raise DegenerateVarianceError(
            "variance path is not positive at the terminal time"
        )
    return float(np.sqrt(path.scale_n) * np.max(np.abs(path.gamma)) / np.sqrt(v_end))


def endpoint_statistic(path: LcmPath) -> float:
    """Normalized absolute endpoint: sqrt(scale_n) * |gamma(1)| / sqrt(variance at 1)."""
    v_end = path.variance[-1]
    if v_end <= 0:
        raise DegenerateVarianceError(
            "variance path is not positive at the terminal time"
        )
    return float(np.sqrt(path.scale_n) * abs(path.gamma[-1]) / np.sqrt(v_end))


def sup_test_from_path(path: LcmPath, alpha: float, method: str = "xlct_sup",
                       seed=None, dist: SupNullDist = SupNullDist()) -> TestReport:
    stat = sup_statistic(path)
    p = float(1.0 - fs_cdf(stat, dist))
    quant = fs_quantile(1.0 - alpha, dist)
    return TestReport(method=method, n=path.scale_n, k=_fold_count(path),
                      statistic=stat, p_value=p, alpha=alpha, quantile=quant,
                      reject=bool(stat > quant), seed=seed,
                      diagnostics=dict(path.diagnostics))


def endpoint_test_from_path(path: LcmPath, alpha: float,
                            method: str = "xlct_endpoint", seed=None) -> TestReport:
    """Two-sided endpoint test against the standard normal limit."""
    stat = endpoint_statistic(path)
    p = float(2.0 * norm.sf(stat))
    quant = float(norm.ppf(1.0 - alpha / 2.0))
    return TestReport(method=method, n=path.scale_n, k=_fold_count(path),
                      statistic=stat, p_value=p, alpha=alpha, quantile=quant,
                      reject=bool(stat > quant), seed=seed,
                      diagnostics=dict(path.diagnostics))


def _fold_count(path: LcmPath) -> Optional[int]:
    if path.method.startswith("cross_fit("):
        return int(path.method[len("cross_fit(") : -1])
    return None


def run_lct(x, z, record, split, config: Optional[LearnerConfig] = None,
            alpha: float = 0.05, seed=None, endpoint: bool = False) -> TestReport:
    """Single sample-split test: learners on the training half only.

    Less powerful than the cross-fitted variant (the statistic scales with
    the evaluation-set size); kept for the plain split workflow.
    """
    _check_alpha(alpha)
    from .lcm import estimate_lcm_split, fit_fold_nuisances

    config = config or LearnerConfig()
    residual, intensity = fit_fold_nuisances(x, z, record, split, config)
    path = estimate_lcm_split(x, z, record, split, residual, intensity)
    if endpoint:
        return endpoint_test_from_path(path, alpha, method="lct_endpoint", seed=seed)
    return sup_test_from_path(path, alpha, method="lct_sup", seed=seed)


def run_xlct(x, z, record, partition: FoldPartition,
             config: Optional[LearnerConfig] = None, alpha: float = 0.05,
             seed=None, fold_nuisances=None) -> TestReport:
    """Cross-fitted supremum test: the recommended test of local independence."""
    _check_alpha(alpha)
    path = estimate_lcm_crossfit(x, z, record, partition, config,
                                 fold_nuisances=fold_nuisances)
    return sup_test_from_path(path, alpha, method="xlct_sup", seed=seed)


def run_endpoint_test(x, z, record, partition: FoldPartition,
                      config: Optional[LearnerConfig] = None, alpha: float = 0.05,
                      seed=None, fold_nuisances=None) -> TestReport:
    """Cross-fitted endpoint test with a two-sided normal p-value."""
    _check_alpha(alpha)
    path = estimate_lcm_crossfit(x, z, record, partition, config,
                                 fold_nuisances=fold_nuisances)
    return endpoint_test_from_path(path, alpha, method="xlct_endpoint", seed=seed)


def _check_alpha(alpha: float):
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
