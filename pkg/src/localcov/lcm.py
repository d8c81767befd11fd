"""Estimators of the local covariance path and its variance function.

The sample-split estimator averages, over held-out subjects, the cumulative
grid sums of the out-of-sample residual against the compensated counting
increments.  Cross-fitting averages K such estimates with rotated folds; the
plug-in variant integrates the raw tested process against increments
compensated by an intensity fit on all data and is kept only for bias
comparisons.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, InputError, LocalCovError
from .grid import CountingRecord, PathMatrix, PredictablePath, TimeGrid, compensated_increments, rs_integral
from .learners import (
    LearnerConfig,
    TrainSplit,
    fit_additive_residual,
    fit_historical_loglinear_intensity,
)


@dataclass(frozen=True)
class LcmPath:
    """Estimated local covariance path with its cumulative variance path."""

    grid: TimeGrid
    gamma: np.ndarray
    variance: np.ndarray
    scale_n: int
    method: str
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        var = np.asarray(self.variance, dtype=float)
        if gamma.shape != (self.grid.q,) or var.shape != (self.grid.q,):
            raise DomainError("gamma and variance must be grid-length vectors")
        if abs(gamma[0]) > 0 or abs(var[0]) > 0:
            raise DomainError("paths must start at 0")
        if np.any(np.diff(var) < -1e-12):
            raise DomainError("variance path must be non-decreasing")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "variance", var)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "gamma", "variance", "scale_n", "method"])
            for t, g, v in zip(self.grid.points, self.gamma, self.variance):
                writer.writerow([f"{t:.17g}", f"{g:.17g}", f"{v:.17g}",
                                 self.scale_n, self.method])


@dataclass(frozen=True)
class FoldPartition:
    """K disjoint folds covering 0..n-1, sizes differing by at most one.

    Deterministic round-robin assignment after a seeded shuffle.
    """

    n: int
    k: int
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise DomainError("cross-fitting needs K >= 2")
        if self.n < self.k:
            raise DomainError("each fold must be non-empty")

    @property
    def folds(self):
        perm = np.random.Generator(np.random.Philox(key=self.seed)).permutation(self.n)
        return [np.sort(perm[i :: self.k]) for i in range(self.k)]

    def split(self, fold: int) -> TrainSplit:
        folds = self.folds
        ev = folds[fold]
        train = np.sort(np.concatenate([f for i, f in enumerate(folds) if i != fold]))
        return TrainSplit(train_idx=train, eval_idx=ev)


def empirical_variance_path(x: PathMatrix, z: PathMatrix, record: CountingRecord,
                            residual, idx) -> np.ndarray:
    """Cumulative sum of squared residuals at event times, averaged over idx.

    Non-decreasing step path that increases only where events occur; events
    at grid index 0 never enter (integration starts after time 0).
    """
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        raise InputError("variance estimation needs a non-empty evaluation set")
    ghat = residual.residual(x, z, record, idx)
    jumps = record.jumps[idx].astype(float)
    contrib = ghat**2 * jumps
    contrib[:, 0] = 0.0
    return np.cumsum(contrib.sum(axis=0), axis=0) / idx.size


def _gamma_from_parts(ghat, dm, n_eval):
    path = rs_integral(ghat, dm).sum(axis=0) / n_eval
    path[0] = 0.0
    return path


def estimate_lcm_split(x: PathMatrix, z: PathMatrix, record: CountingRecord,
                       split: TrainSplit, residual, intensity,
                       method: str = "sample_split") -> LcmPath:
    """Sample-split estimator: predictors must be fit on ``split.train_idx`` only."""
    idx = split.eval_idx
    if idx.size == 0:
        raise InputError("empty evaluation set")
    ghat = residual.residual(x, z, record, idx)
    lam = intensity.intensity(z, record, idx)
    sub_record = CountingRecord(record.grid, record.jumps[idx], record.at_risk_end[idx])
    dm = compensated_increments(sub_record, PredictablePath(record.grid, lam))
    gamma = _gamma_from_parts(ghat, dm, idx.size)
    variance = empirical_variance_path(x, z, record, residual, idx)
    return LcmPath(record.grid, gamma, variance, scale_n=int(idx.size), method=method)


class _RawIntegrand:
    """Residual-interface adapter returning the tested process unchanged."""

    kind = "raw"

    def residual(self, x, z, record, idx=None):
        idx = np.arange(x.n) if idx is None else np.asarray(idx, dtype=np.int64)
        return x.values[idx]


def estimate_lcm_plugin(x: PathMatrix, z: PathMatrix, record: CountingRecord,
                        intensity) -> LcmPath:
    """Plug-in estimator on the full sample with the raw process as integrand.

    Biased in general; retained only for comparisons against the debiased
    estimators and excluded from the test API.
    """
    full = np.arange(x.n)
    raw = _RawIntegrand()
    lam = intensity.intensity(z, record, full)
    dm = compensated_increments(record, PredictablePath(record.grid, lam))
    gamma = _gamma_from_parts(raw.residual(x, z, record, full), dm, x.n)
    variance = empirical_variance_path(x, z, record, raw, full)
    return LcmPath(record.grid, gamma, variance, scale_n=int(x.n), method="plug_in")


def fit_fold_nuisances(x, z, record, split, config: LearnerConfig):
    """Fit both learners on the training side of one split."""
    residual = fit_additive_residual(
        x, z, record, split, ridge=config.residual_ridge, g_cap_mult=config.g_cap_mult
    )
    intensity = fit_historical_loglinear_intensity(
        z, record, split,
        ridge=config.intensity_ridge,
        time_bins=config.time_bins,
        max_iter=config.max_iter,
        tol=config.tol,
        lambda_cap=config.lambda_cap,
        use_history=config.intensity_features == "historical",
    )
    return residual, intensity


def estimate_lcm_crossfit(x: PathMatrix, z: PathMatrix, record: CountingRecord,
                          partition: FoldPartition,
                          config: Optional[LearnerConfig] = None,
                          fold_nuisances=None) -> LcmPath:
    """K-fold cross-fitted estimator: learners trained on each fold complement.

    ``fold_nuisances(x, z, record, split, fold)`` may be supplied to override
    learner fitting (oracle or stub predictors); by default both learners are
    fit with ``config``.
    """
    config = config or LearnerConfig()
    gammas = []
    variances = []
    fold_diag = []
    for k in range(partition.k):
        split = partition.split(k)
        try:
            if fold_nuisances is not None:
                residual, intensity = fold_nuisances(x, z, record, split, k)
            else:
                residual, intensity = fit_fold_nuisances(x, z, record, split, config)
            fold_path = estimate_lcm_split(x, z, record, split, residual, intensity)
        except LocalCovError as exc:
            raise type(exc)(f"fold {k}: {exc}") from exc
        gammas.append(fold_path.gamma)
        variances.append(fold_path.variance)
        fold_diag.append({
            "fold": k,
            "n_eval": int(split.eval_idx.size),
            "gamma_end": float(fold_path.gamma[-1]),
            "variance_end": float(fold_path.variance[-1]),
        })
    gamma = np.mean(gammas, axis=0)
    variance = np.mean(variances, axis=0)
    return LcmPath(record.grid, gamma, variance, scale_n=int(x.n),
                   method=f"cross_fit({partition.k})",
                   diagnostics={"folds": fold_diag})
