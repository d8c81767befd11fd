"""Data-generating process: historical linear covariates and a Cox-type hazard.

Covariates are built from a shared latent process Z through historical
linear integrals with one of four kernels.  Events follow a Weibull-baseline
hazard in Z and an unobserved mediator Y, sampled on the grid by drawing a
unit exponential and placing the event time at the last grid point whose
cumulative hazard is still below the draw.  Local alternatives add a
time-varying multiple of the tested process X, scaled by 1/sqrt(n), to the
log hazard.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DomainError
from .grid import CountingRecord, PathMatrix, TimeGrid

KERNELS = ("zero", "constant", "gaussian", "sine")
RHO0_KINDS = ("none", "constant", "step", "cos")


def kernel_eval(kind: str, s, t):
    """Evaluate a historical kernel on 0 <= s <= t <= 1."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s > t) or np.any(s < 0) or np.any(t > 1):
        raise DomainError("kernel arguments must satisfy 0 <= s <= t <= 1")
    if kind == "zero":
        return np.zeros(np.broadcast(s, t).shape)[()]
    if kind == "constant":
        return np.ones(np.broadcast(s, t).shape)[()]
    if kind == "gaussian":
        return np.exp(-2.0 * (t - s) ** 2)[()]
    if kind == "sine":
        return np.sin(4.0 * t - 20.0 * s)[()]
    raise DomainError(f"unknown kernel {kind!r}")


def historical_weights(kind: str, grid: TimeGrid) -> np.ndarray:
    """Left-Riemann quadrature weights W with (A @ W.T)[:, i] = sum_{m<i} A[:, m] k(t_m, t_i) dt."""
    t = grid.points
    weights = np.zeros((grid.q, grid.q))
    if kind != "zero":
        tt, ss = np.meshgrid(t, t, indexing="ij")
        strict_lower = ss < tt
        vals = np.zeros_like(weights)
        vals[strict_lower] = kernel_eval(kind, ss[strict_lower], tt[strict_lower])
        weights = vals * grid.step
    return weights


def historical_integral(z: np.ndarray, kind: str, grid: TimeGrid) -> np.ndarray:
    """Historical linear term: out[:, i] = sum_{m<i} z[:, m] kernel(t_m, t_i) dt."""
    return z @ historical_weights(kind, grid).T


@dataclass(frozen=True)
class Rho0Spec:
    """Local-alternative specification for the hazard perturbation."""

    kind: str = "none"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in RHO0_KINDS:
            raise DomainError(f"unknown alternative kind {self.kind!r}")

    def values(self, times: np.ndarray) -> np.ndarray:
        if self.kind == "none":
            return np.zeros_like(times)
        if self.kind == "constant":
            return np.full_like(times, self.scale)
        if self.kind == "step":
            return np.where(times <= 0.4, 5.0, -5.0)
        return 7.0 * np.cos(4.0 * np.pi * times)

    @classmethod
    def parse(cls, text: str) -> "Rho0Spec":
        text = text.strip()
        if text in ("none", "step", "cos"):
            return cls(text)
        if text.startswith("constant"):
            _, _, val = text.partition(":")
            if not val:
                raise DomainError("constant alternative needs a scale, e.g. constant:10")
            return cls("constant", float(val))
        raise DomainError(f"cannot parse alternative spec {text!r}")

    def label(self) -> str:
        if self.kind == "constant":
            return f"constant:{self.scale:g}"
        return self.kind


@dataclass(frozen=True)
class DgpConfig:
    """Full specification of one simulated dataset."""

    n: int
    q: int = 128
    kernel_x: str = "constant"
    kernel_y: str = "constant"
    beta2: float = -1.0
    beta1: Optional[float] = None  # None: auto-scale by doubling search
    rho0: Rho0Spec = Rho0Spec()
    seed: int = 0
    w_noise: bool = True  # turn off together with kernel_y="zero" for the oracle scenario

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.kernel_x not in KERNELS or self.kernel_y not in KERNELS:
            raise DomainError(f"kernels must be one of {KERNELS}")
        if self.beta1 is not None and self.beta1 <= 0:
            raise DomainError("beta1 must be positive")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.q)

    @property
    def h0(self) -> bool:
        return self.rho0.kind == "none"

    @property
    def oracle_exact(self) -> bool:
        """Whether closed-form nuisances are available (no mediator at all)."""
        return self.kernel_y == "zero" and not self.w_noise


@dataclass(frozen=True)
class TruthBundle:
    """Simulator internals retained for oracle nuisances and MC ground truth."""

    v: np.ndarray  # additive noise of X: the exact residual process under H0
    y: np.ndarray  # unobserved mediator path (stopped)
    pi: np.ndarray  # historical integral part of X (pre-stopping)
    hazard_ref: np.ndarray  # per-step hazard without the alternative term, 0 off risk
    hazard_full: np.ndarray  # per-step hazard including the alternative, 0 off risk
    cum_hazard: np.ndarray  # left-Riemann cumulative of hazard_full at grid points
    beta1: float


@dataclass(frozen=True)
class SimulatedDataset:
    """Observed paths plus the event record and simulator ground truth."""

    config: DgpConfig
    x: PathMatrix
    z: PathMatrix
    record: CountingRecord
    truth: TruthBundle

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def grid(self) -> TimeGrid:
        return self.x.grid

    @property
    def h0(self) -> bool:
        return self.config.h0


def _subject_rng(seed: int, j: int) -> np.random.Generator:
    """Counter-based substream: subject j owns counter block [j * 2^64, (j+1) * 2^64)."""
    return np.random.Generator(np.random.Philox(key=seed & (2**64 - 1), counter=j << 64))


def _draw_latents(cfg: DgpConfig):
    """Per-subject draws in a fixed order so n can grow without perturbing subjects."""
    n, q = cfg.n, cfg.q
    xi = np.empty((n, 3))
    ww = np.empty((n, q))
    v = np.empty((n, q))
    w = np.empty((n, q))
    exp_draw = np.empty(n)
    scale = 1.0 / np.sqrt(q)
    for j in range(n):
        rng = _subject_rng(cfg.seed, j)
        xi[j] = rng.standard_normal(3)
        ww[j] = np.cumsum(rng.standard_normal(q)) * scale
        v[j] = np.cumsum(rng.standard_normal(q)) * scale
        w[j] = np.cumsum(rng.standard_normal(q)) * scale
        exp_draw[j] = rng.standard_exponential()
    return xi, ww, v, w, exp_draw


def _calibrate_beta1(cum_base: np.ndarray, exp_draw: np.ndarray, q: int) -> float:
    """Doubling search: smallest power of two making >= (q-1)/q of subjects event.

    ``cum_base`` holds the beta1-free cumulative hazard through the last grid
    point, so event counts for any beta1 follow without resampling.
    """
    n = cum_base.shape[0]
    target = int(np.ceil((q - 1) / q * n))
    beta1 = 1.0
    for _ in range(80):
        if int(np.sum(exp_draw <= beta1 * cum_base)) >= target:
            return beta1
        beta1 *= 2.0
    raise DomainError("baseline scale search did not terminate")


def sample_dataset(cfg: DgpConfig) -> SimulatedDataset:
    """Draw one dataset; reproducible and subject-stable for a fixed seed."""
    grid = cfg.grid
    n, q = cfg.n, cfg.q
    times = grid.points
    dt = grid.step

    xi, ww, v, w, exp_draw = _draw_latents(cfg)
    if not cfg.w_noise:
        w = np.zeros_like(w)

    z = xi[:, [0]] + xi[:, [1]] * times[None, :] + np.sin(2.0 * np.pi * xi[:, [2]] * times[None, :]) + ww
    pi_x = historical_integral(z, cfg.kernel_x, grid)
    x = pi_x + v
    y = historical_integral(z, cfg.kernel_y, grid) + w

    # Per-step hazards, indexed by the step's right endpoint.  The alternative
    # perturbs the log hazard by rho0(t) X_t / sqrt(n).
    log_core = cfg.beta2 * z + y
    rho_vals = cfg.rho0.values(times)
    log_alt = log_core + (rho_vals[None, :] / np.sqrt(n)) * x
    weibull = times**2
    base_ref = weibull[None, :] * np.exp(log_core)
    base_full = weibull[None, :] * np.exp(log_alt)

    # Cumulative hazard at grid points by the left rule; beta1-free version
    # first so the doubling search needs no resampling.
    cum_free = np.zeros((n, q))
    cum_free[:, 1:] = np.cumsum(base_full[:, :-1], axis=1) * dt
    beta1 = cfg.beta1 if cfg.beta1 is not None else _calibrate_beta1(cum_free[:, -1], exp_draw, q)

    cum_hazard = beta1 * cum_free
    # Event at the last grid point whose cumulative hazard stays below the draw.
    below = cum_hazard < exp_draw[:, None]
    last_below = q - 1 - np.argmax(below[:, ::-1], axis=1)
    censored = below[:, -1]
    event_index = np.where(censored, -1, last_below)
    record = CountingRecord.from_survival(grid, event_index)

    # Stop the observable paths at the event.
    stop = np.where(event_index >= 0, event_index, q - 1)
    cols = np.arange(q)[None, :]
    clipped = np.minimum(cols, stop[:, None])
    rows = np.arange(n)[:, None]
    x_stopped = x[rows, clipped]
    z_stopped = z[rows, clipped]
    y_stopped = y[rows, clipped]

    risk_mask = record.at_risk_steps()
    truth = TruthBundle(
        v=v,
        y=y_stopped,
        pi=pi_x,
        hazard_ref=beta1 * base_ref * risk_mask,
        hazard_full=beta1 * base_full * risk_mask,
        cum_hazard=cum_hazard,
        beta1=beta1,
    )
    return SimulatedDataset(
        config=replace(cfg, beta1=beta1),
        x=PathMatrix(grid, x_stopped),
        z=PathMatrix(grid, z_stopped),
        record=record,
        truth=truth,
    )
