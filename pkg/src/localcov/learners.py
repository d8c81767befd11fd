"""Nuisance learners: residual-process and intensity predictors.

All learners are fit on a training index set and evaluated out of sample.
The additive residual learner runs one ridge regression per grid time of
the tested process on the strict past of Z, over the subjects still at risk
at that time.  The quantile residual learner covers time-independent tested
variables through per-time at-risk empirical CDF tables.  The intensity
learner fits a penalized log-linear Poisson model to the event indicators of
the at-risk (subject, step) rows, with a piecewise-constant time basis, the
current Z value and the running integral of Z as features.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import LinAlgWarning

from .errors import (
    ConvergenceError,
    DomainError,
    GridMismatchError,
    IllConditionedError,
    InputError,
    UnsupportedScenarioError,
)
from .grid import CountingRecord, PathMatrix, TimeGrid
from .sim import SimulatedDataset, historical_integral


@dataclass(frozen=True)
class TrainSplit:
    """Disjoint train/eval subject index sets covering 0..n-1."""

    train_idx: np.ndarray
    eval_idx: np.ndarray

    def __post_init__(self):
        train = np.asarray(self.train_idx, dtype=np.int64)
        ev = np.asarray(self.eval_idx, dtype=np.int64)
        if train.size == 0 or ev.size == 0:
            raise InputError("both sides of a split must be non-empty")
        if np.intersect1d(train, ev).size > 0:
            raise InputError("train and eval sets overlap")
        n = train.size + ev.size
        if not np.array_equal(np.sort(np.concatenate([train, ev])), np.arange(n)):
            raise InputError("split must partition 0..n-1")
        object.__setattr__(self, "train_idx", train)
        object.__setattr__(self, "eval_idx", ev)


@dataclass(frozen=True)
class LearnerConfig:
    """Hyperparameters shared by the two learners; fixed per experiment."""

    residual_ridge: float = 1e-3
    intensity_ridge: float = 1e-3
    time_bins: int = 8
    max_iter: int = 50
    tol: float = 1e-8
    lambda_cap: float = 50.0
    g_cap_mult: float = 10.0
    intensity_features: str = "historical"  # or "concurrent": drop the running-integral feature

    def __post_init__(self):
        if self.residual_ridge < 0 or self.intensity_ridge < 0:
            raise DomainError("ridge penalties must be non-negative")
        if self.intensity_features not in ("historical", "concurrent"):
            raise DomainError("intensity_features must be 'historical' or 'concurrent'")


def running_integral(z: np.ndarray, dt: float) -> np.ndarray:
    """Left-Riemann running integral: out[:, i] = sum_{m<i} z[:, m] dt."""
    out = np.zeros_like(z)
    out[:, 1:] = np.cumsum(z[:, :-1], axis=1) * dt
    return out


class FittedResidual:
    """Per-grid-time ridge coefficients predicting X from its strict Z past.

    Evaluation returns the additive residual ``X - projection``, clipped to
    the recorded cap, with the projection adjusted so the additive identity
    ``residual + projection == X`` holds exactly.
    """

    kind = "additive"

    def __init__(self, grid, coefs, g_cap):
        self.grid = grid
        self.coefs = coefs  # list of length q; coefs[i] aligned to [1, z_{<i}]
        self.g_cap = float(g_cap)

    def residual(self, x: PathMatrix, z: PathMatrix, record: CountingRecord,
                 idx=None) -> np.ndarray:
        if x.grid.q != self.grid.q or z.grid.q != self.grid.q:
            raise GridMismatchError("residual inputs live on a different grid")
        idx = np.arange(x.n) if idx is None else np.asarray(idx, dtype=np.int64)
        xv = x.values[idx]
        zv = z.values[idx]
        q = self.grid.q
        raw = np.empty_like(xv)
        for i in range(q):
            beta = self.coefs[i]
            pred = np.full(idx.size, beta[0])
            if i > 0:
                pred = pred + zv[:, :i] @ beta[1:]
            raw[:, i] = pred
        return np.clip(xv - raw, -self.g_cap, self.g_cap)

    def projection(self, x, z, record, idx=None) -> np.ndarray:
        """Complement of the residual, so residual + projection == x holds."""
        idx_arr = np.arange(x.n) if idx is None else np.asarray(idx, dtype=np.int64)
        return x.values[idx_arr] - self.residual(x, z, record, idx)


def fit_additive_residual(x: PathMatrix, z: PathMatrix, record: CountingRecord,
                          split: TrainSplit, ridge: float,
                          g_cap_mult: float = 10.0) -> FittedResidual:
    """Series of ridge regressions of X_t on [1, Z strictly before t].

    Each regression is fit on the training subjects still at risk at its
    target time; those are exactly the rows whose residuals later enter the
    estimator, and restricting to them keeps the regression free of the
    regime switch at the event, where paths freeze and the projection
    becomes the frozen value itself.  The at-risk indicator is constant on
    these rows and therefore omitted.  Since the risk sets shrink
    monotonically, the normal-equation blocks are maintained by rank-k
    downdates of a single Gram matrix.
    """
    if ridge < 0:
        raise DomainError("ridge must be non-negative")
    if x.grid.q != z.grid.q or x.grid.q != record.grid.q:
        raise GridMismatchError("x, z and record must share one grid")
    if split.train_idx.size < 2:
        raise InputError("residual learner needs at least 2 training subjects")

    tr = split.train_idx
    xv = np.ascontiguousarray(x.values[tr])
    zv = np.ascontiguousarray(z.values[tr])
    ev = record.event_index[tr]
    m, q = xv.shape

    base = np.concatenate([np.ones((m, 1)), zv], axis=1)
    gram = base.T @ base
    bx = base.T @ xv  # (q+1, q): rhs columns per target time
    n_risk = m

    coefs = []
    prev_beta = None
    for i in range(q):
        if i > 0:
            leaving = np.flatnonzero(ev == i - 1)
            if leaving.size:
                bl = base[leaving]
                gram -= bl.T @ bl
                bx -= bl.T @ xv[leaving]
                n_risk -= leaving.size
        p = 1 + i
        if n_risk >= 2:
            lhs = gram[:p, :p].copy()
            lhs[np.arange(1, p), np.arange(1, p)] += ridge  # intercept unpenalized
            rhs = bx[:p, i]
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", LinAlgWarning)
                    beta = scipy.linalg.solve(lhs, rhs, assume_a="pos")
            except (scipy.linalg.LinAlgError, np.linalg.LinAlgError,
                    LinAlgWarning) as exc:
                raise IllConditionedError(
                    f"normal equations singular at grid index {i}; use ridge > 0"
                ) from exc
            if not np.all(np.isfinite(beta)):
                raise IllConditionedError(
                    f"normal equations produced non-finite coefficients at grid index {i}"
                )
        else:
            # too few at-risk training rows: carry the previous model forward
            beta = np.zeros(p)
            beta[: prev_beta.size] = prev_beta
        coefs.append(beta)
        prev_beta = beta

    g_cap = g_cap_mult * float(np.std(xv))
    if g_cap <= 0:
        g_cap = np.inf
    return FittedResidual(x.grid, coefs, g_cap)


class FittedIntensity:
    """Log-linear hazard predictor on at-risk steps, zero elsewhere."""

    def __init__(self, grid, kind, coef, time_bins, lambda_cap, use_history,
                 diagnostics=None):
        self.grid = grid
        self.kind = kind
        self.coef = coef  # [intercept, bin contrasts 2..B, z, (cum z)]
        self.time_bins = time_bins
        self.lambda_cap = float(lambda_cap)
        self.use_history = use_history
        self.diagnostics = diagnostics or {}

    def _bin_index(self, times):
        return np.minimum((times * self.time_bins).astype(int), self.time_bins - 1)

    def intensity(self, z: PathMatrix, record: CountingRecord, idx=None) -> np.ndarray:
        """Predicted hazard per step, capped and zeroed off the at-risk steps."""
        if z.grid.q != self.grid.q:
            raise GridMismatchError("intensity inputs live on a different grid")
        idx = np.arange(z.n) if idx is None else np.asarray(idx, dtype=np.int64)
        zv = z.values[idx]
        b = self.time_bins
        bins = self._bin_index(self.grid.points)
        contrast = np.concatenate([[0.0], self.coef[1:b]])
        eta = self.coef[0] + contrast[bins][None, :] + self.coef[b] * zv
        if self.use_history:
            eta = eta + self.coef[b + 1] * running_integral(zv, self.grid.step)
        lam = np.exp(np.minimum(eta, 50.0))
        lam = np.minimum(lam, self.lambda_cap)
        mask = record.at_risk_steps()[idx]
        return lam * mask


def _intensity_design(zv, record_rows, grid, time_bins, use_history):
    """Long-format design over at-risk steps; returns (design, outcome)."""
    mask = record_rows.at_risk_steps()
    y = record_rows.jumps.astype(float)[mask]
    m_rows = int(mask.sum())
    bins = np.minimum((grid.points * time_bins).astype(int), time_bins - 1)
    bin_long = np.broadcast_to(bins[None, :], mask.shape)[mask]
    z_long = zv[mask]
    cols = [np.ones(m_rows)]
    for b in range(1, time_bins):
        cols.append((bin_long == b).astype(float))
    cols.append(z_long)
    if use_history:
        cols.append(running_integral(zv, grid.step)[mask])
    return np.column_stack(cols), y


def fit_historical_loglinear_intensity(z: PathMatrix, record: CountingRecord,
                                       split: TrainSplit, ridge: float,
                                       time_bins: int = 8, max_iter: int = 50,
                                       tol: float = 1e-8, lambda_cap: float = 50.0,
                                       use_history: bool = True) -> FittedIntensity:
    """Penalized Poisson regression of per-step event indicators by IRLS.

    The outcome of an at-risk (subject, step) row is the 0/1 event indicator
    with exposure dt; features are a piecewise-constant time basis, the
    current Z value and (optionally) the running integral of Z.  The
    intercept is unpenalized so an infinite ridge collapses the model to the
    constant-hazard maximum likelihood fit.
    """
    if z.grid.q != record.grid.q:
        raise GridMismatchError("z and record must share one grid")
    tr = split.train_idx
    sub = CountingRecord(record.grid, record.jumps[tr], record.at_risk_end[tr])
    if int(sub.jumps[:, 1:].sum()) < 1:
        raise InputError("intensity learner needs at least one training event")

    design, y = _intensity_design(z.values[tr], sub, z.grid, time_bins, use_history)
    offset = np.log(z.grid.step)
    n_feat = design.shape[1]
    pen = np.ones(n_feat) * ridge
    pen[0] = 0.0

    beta = np.zeros(n_feat)
    beta[0] = np.log(y.sum() / (y.size * z.grid.step))

    if np.any(y > 1):
        raise InputError("intensity learner expects at most one event per step")
    event_rows = np.flatnonzero(y > 0)
    n_events = float(y.sum())

    def penalized_deviance(b):
        # y log y vanishes for 0/1 outcomes, so the Poisson deviance reduces
        # to 2 * (sum mu - sum y - sum_{events} log mu).
        eta = design @ b + offset
        mu = np.exp(np.minimum(eta, 50.0))
        log_mu_events = np.minimum(eta[event_rows], 50.0)
        dev = 2.0 * (mu.sum() - n_events - float(log_mu_events.sum()))
        return dev + 2.0 * np.sum(pen * b * b), mu

    dev, mu = penalized_deviance(beta)
    history = [dev]
    converged = False
    separation = False
    for _ in range(max_iter):
        grad = design.T @ (y - mu) - 2.0 * pen * beta
        hess = (design * mu[:, None]).T @ design
        hess[np.arange(n_feat), np.arange(n_feat)] += 2.0 * pen
        try:
            step = scipy.linalg.solve(hess, grad, assume_a="pos")
        except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
            raise IllConditionedError("singular IRLS system; increase ridge") from exc
        scale = 1.0
        for _ in range(30):
            cand = beta + scale * step
            dev_new, mu_new = penalized_deviance(cand)
            if dev_new <= dev + 1e-12:
                break
            scale *= 0.5
        else:
            converged = True  # no descent direction left: at a numerical optimum
            break
        rel = abs(dev - dev_new) / (abs(dev) + 1e-10)
        beta, dev, mu = cand, dev_new, mu_new
        history.append(dev)
        if np.max(np.abs(beta)) > 30.0:
            separation = True
        if rel < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(
            f"IRLS did not converge in {max_iter} iterations", last_value=dev
        )

    diagnostics = {
        "deviance_path": history,
        "iterations": len(history) - 1,
        "separation_flag": separation,
        "n_rows": int(y.size),
        "n_events": int(y.sum()),
        "lambda_cap": float(lambda_cap),
    }
    return FittedIntensity(z.grid, "historical_loglinear", beta, time_bins,
                           lambda_cap, use_history, diagnostics)


class QuantileResidualFit:
    """Per-time at-risk empirical-CDF residual for a time-independent variable.

    The residual at time t is the estimated conditional CDF of X, evaluated
    at the subject's own value, minus one half; the conditional law given
    the observed history is approximated by the empirical distribution over
    the training subjects still at risk at t.  Mid-rank handling keeps tied
    values centered, and the output is bounded by 1/2 automatically.
    """

    kind = "time_independent_quantile"

    def __init__(self, grid, tables):
        self.grid = grid
        self.tables = tables  # list of q sorted training-value arrays
        self.g_cap = 0.5

    def residual(self, x: PathMatrix, z, record, idx=None) -> np.ndarray:
        if x.grid.q != self.grid.q:
            raise GridMismatchError("residual inputs live on a different grid")
        idx = np.arange(x.n) if idx is None else np.asarray(idx, dtype=np.int64)
        vals = _time_independent_values(x.values[idx])
        out = np.empty((idx.size, self.grid.q))
        for i, table in enumerate(self.tables):
            lo = np.searchsorted(table, vals, side="left")
            hi = np.searchsorted(table, vals, side="right")
            out[:, i] = 0.5 * (lo + hi) / table.size - 0.5
        return out

    def projection(self, x, z, record, idx=None) -> np.ndarray:
        idx_arr = np.arange(x.n) if idx is None else np.asarray(idx, dtype=np.int64)
        return x.values[idx_arr] - self.residual(x, z, record, idx)


def _time_independent_values(xv: np.ndarray) -> np.ndarray:
    if np.any(xv != xv[:, [0]]):
        raise UnsupportedScenarioError(
            "quantile residuals are implemented for time-independent X only"
        )
    return xv[:, 0]


def fit_time_independent_quantile_residual(x: PathMatrix, record: CountingRecord,
                                           split: TrainSplit) -> QuantileResidualFit:
    """Empirical conditional-CDF tables from the at-risk training subjects."""
    if x.grid.q != record.grid.q:
        raise GridMismatchError("x and record must share one grid")
    if split.train_idx.size < 2:
        raise InputError("quantile residual learner needs at least 2 training subjects")
    tr = split.train_idx
    vals = _time_independent_values(x.values[tr])
    ev = record.event_index[tr]
    q = x.grid.q
    tables = []
    at_risk = np.ones(tr.size, dtype=bool)
    prev = None
    for i in range(q):
        if i > 0:
            at_risk &= ev != i - 1
        if int(at_risk.sum()) >= 2:
            table = np.sort(vals[at_risk])
        else:
            table = prev  # too few at-risk training rows: carry forward
        tables.append(table)
        prev = table
    return QuantileResidualFit(x.grid, tables)


class OracleResidual:
    """Exact residual predictor: X minus its historical integral part."""

    kind = "oracle"

    def __init__(self, grid: TimeGrid, kernel_x: str):
        self.grid = grid
        self.kernel_x = kernel_x
        self.g_cap = np.inf

    def projection(self, x, z, record, idx=None):
        idx = np.arange(x.n) if idx is None else np.asarray(idx, dtype=np.int64)
        return historical_integral(z.values[idx], self.kernel_x, self.grid)

    def residual(self, x, z, record, idx=None):
        idx_arr = np.arange(x.n) if idx is None else np.asarray(idx, dtype=np.int64)
        return x.values[idx_arr] - self.projection(x, z, record, idx)


class OracleIntensity:
    """Exact hazard predictor for the mediator-free scenario."""

    kind = "oracle"

    def __init__(self, grid: TimeGrid, beta1: float, beta2: float):
        self.grid = grid
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)

    def intensity(self, z, record, idx=None):
        idx = np.arange(z.n) if idx is None else np.asarray(idx, dtype=np.int64)
        lam = self.beta1 * self.grid.points[None, :] ** 2 * np.exp(self.beta2 * z.values[idx])
        return lam * record.at_risk_steps()[idx]


def oracle_nuisances(dataset: SimulatedDataset):
    """Closed-form nuisance pair, available only in the mediator-free scenario."""
    cfg = dataset.config
    if not cfg.oracle_exact:
        raise UnsupportedScenarioError(
            "oracle nuisances require kernel_y='zero' and w_noise=False"
        )
    if not cfg.h0:
        raise UnsupportedScenarioError("oracle nuisances require the null scenario")
    grid = dataset.grid
    return (OracleResidual(grid, cfg.kernel_x),
            OracleIntensity(grid, cfg.beta1, cfg.beta2))
