"""Time grids, sampled paths, counting records, and grid integration.

All computations in this package live on a shared equidistant grid
``0 = t_0 < t_1 < ... < t_{q-1} = 1``.  Step ``l`` (for ``l = 1..q-1``)
is the half-open interval ``(t_{l-1}, t_l]``.  A predictable (caglad)
integrand contributes its value at index ``l`` to step ``l``: the sample
at a grid point is identified with the left limit there, so current-value
entries at index ``l`` together with history at indices ``< l`` are the
admissible content of a predictable path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, GridMismatchError


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant grid on [0, 1] with q points, first 0 and last 1."""

    q: int

    def __post_init__(self):
        if self.q < 2:
            raise DomainError(f"grid needs at least 2 points, got q={self.q}")

    @property
    def step(self) -> float:
        return 1.0 / (self.q - 1)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.q)

    def index_of(self, t: float) -> int:
        """Nearest grid index of a time that is expected to lie on the grid."""
        i = int(round(t * (self.q - 1)))
        if not (0 <= i < self.q) or abs(i * self.step - t) > 1e-9:
            raise DomainError(f"time {t} is not a grid point of a q={self.q} grid")
        return i


def _check_values(grid: TimeGrid, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != grid.q:
        raise GridMismatchError(
            f"values must be n x q with q={grid.q}, got shape {values.shape}"
        )
    if not np.all(np.isfinite(values)):
        raise DomainError("path values must be finite")
    return values


@dataclass(frozen=True)
class PathMatrix:
    """Per-subject sampled paths: row j holds one subject's process on the grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PredictablePath:
    """Grid function whose entry at index l is the value used on step l.

    Constructors are responsible for predictability: entry l may depend on
    current-value samples at index l (left limits) and on history strictly
    before l, never on anything later.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CountingRecord:
    """Grid-resolved counting processes with administrative censoring at t=1.

    ``jumps[j, l]`` counts events of subject j at grid point l, so the
    increment of N over step l is ``jumps[:, l]`` for ``l >= 1``.  Jumps at
    index 0 are allowed structurally but never enter integrals over (0, t].
    ``at_risk_end[j]`` is the last step index at which subject j is at risk:
    the event step for the survival case, q-1 when censored at t=1.
    """

    grid: TimeGrid
    jumps: np.ndarray
    at_risk_end: np.ndarray

    def __post_init__(self):
        jumps = np.asarray(self.jumps)
        if jumps.ndim != 2 or jumps.shape[1] != self.grid.q:
            raise GridMismatchError(
                f"jumps must be n x q with q={self.grid.q}, got {jumps.shape}"
            )
        if np.any(jumps < 0) or not np.issubdtype(jumps.dtype, np.integer):
            raise DomainError("jump counts must be non-negative integers")
        end = np.asarray(self.at_risk_end, dtype=np.int64)
        if end.shape != (jumps.shape[0],):
            raise GridMismatchError("at_risk_end must have one entry per subject")
        if np.any(end < 0) or np.any(end > self.grid.q - 1):
            raise DomainError("at_risk_end must lie in [0, q-1]")
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "at_risk_end", end)

    @property
    def n(self) -> int:
        return self.jumps.shape[0]

    @classmethod
    def from_event_lists(cls, grid, event_lists, at_risk_end=None) -> "CountingRecord":
        """Build from per-subject sorted multisets of jump indices."""
        n = len(event_lists)
        jumps = np.zeros((n, grid.q), dtype=np.int64)
        for j, events in enumerate(event_lists):
            for e in events:
                jumps[j, int(e)] += 1
        if at_risk_end is None:
            at_risk_end = np.full(n, grid.q - 1, dtype=np.int64)
        return cls(grid, jumps, at_risk_end)

    @classmethod
    def from_survival(cls, grid, event_index) -> "CountingRecord":
        """Single-event records; ``event_index[j] = -1`` marks censoring at t=1."""
        event_index = np.asarray(event_index, dtype=np.int64)
        n = event_index.shape[0]
        jumps = np.zeros((n, grid.q), dtype=np.int64)
        has_event = event_index >= 0
        jumps[np.nonzero(has_event)[0], event_index[has_event]] = 1
        end = np.where(has_event, event_index, grid.q - 1)
        return cls(grid, jumps, end)

    @property
    def event_index(self) -> np.ndarray:
        """Index of the single event per subject, -1 when censored (survival case)."""
        has_event = self.jumps.sum(axis=1) > 0
        idx = np.argmax(self.jumps > 0, axis=1)
        return np.where(has_event, idx, -1)

    def at_risk_steps(self) -> np.ndarray:
        """Boolean (n, q) mask: subject at risk on step l (column 0 is False)."""
        steps = np.arange(self.grid.q)[None, :]
        mask = (steps >= 1) & (steps <= self.at_risk_end[:, None])
        return mask

    def counting_paths(self) -> np.ndarray:
        """N sampled at grid points: N[j, i] = number of jumps at indices <= i."""
        return np.cumsum(self.jumps, axis=1)


def _same_grid(a: TimeGrid, b: TimeGrid):
    if a.q != b.q:
        raise GridMismatchError(f"grids differ: q={a.q} vs q={b.q}")


def rs_integral(integrand: np.ndarray, increments: np.ndarray) -> np.ndarray:
    """Cumulative Riemann-Stieltjes sum of a predictable integrand.

    Both arguments are (n, q) arrays on a shared grid; ``increments[:, l]``
    is the integrator increment over step l (column 0 is ignored).  Returns
    the (n, q) path of partial sums, zero at t_0:
    ``out[:, i] = sum_{l<=i} integrand[:, l] * increments[:, l]``.
    """
    integrand = np.asarray(integrand, dtype=float)
    increments = np.asarray(increments, dtype=float)
    if integrand.shape != increments.shape:
        raise GridMismatchError(
            f"integrand shape {integrand.shape} != increments shape {increments.shape}"
        )
    prod = integrand * increments
    prod[:, 0] = 0.0
    return np.cumsum(prod, axis=1)


def increments_of(path: np.ndarray) -> np.ndarray:
    """Per-step increments of a sampled path; entry 0 is 0."""
    path = np.asarray(path, dtype=float)
    out = np.zeros_like(path)
    out[:, 1:] = np.diff(path, axis=1)
    return out


def compensated_increments(record: CountingRecord, intensity: PredictablePath) -> np.ndarray:
    """Per-step increments of the estimated martingale N - integral of intensity.

    ``increment[:, l] = dN_l - intensity[:, l] * dt`` on at-risk steps and 0
    after ``at_risk_end``; column 0 is 0.  The intensity must be non-negative
    on at-risk steps.
    """
    _same_grid(record.grid, intensity.grid)
    if intensity.values.shape[0] != record.n:
        raise GridMismatchError("record and intensity have different subject counts")
    mask = record.at_risk_steps()
    lam = intensity.values
    if np.any(lam[mask] < 0):
        raise DomainError("intensity must be non-negative on at-risk steps")
    dt = record.grid.step
    out = (record.jumps.astype(float) - lam * dt) * mask
    return out


def shift_path(x: PathMatrix, shift_steps: int) -> PathMatrix:
    """Lagged path: value at index l is the sample at index l - shift_steps.

    Values before the first sample are held at the index-0 sample.
    """
    if shift_steps < 0:
        raise DomainError("shift must be a non-negative number of grid steps")
    if shift_steps == 0:
        return x
    v = x.values
    out = np.empty_like(v)
    out[:, :shift_steps] = v[:, [0]]
    out[:, shift_steps:] = v[:, : v.shape[1] - shift_steps]
    return PathMatrix(x.grid, out)


def linear_filter_path(x: PathMatrix, kernel) -> PathMatrix:
    """Left-Riemann convolution: out[:, l] = sum_{m<l} kernel(t_l - t_m) x[:, m] dt."""
    t = x.grid.points
    lag = t[:, None] - t[None, :]
    weights = np.zeros((x.grid.q, x.grid.q))
    lower = lag > 0
    weights[lower] = np.asarray(kernel(lag[lower]), dtype=float)
    weights *= x.grid.step
    return PathMatrix(x.grid, x.values @ weights.T)


def transform_integrand(x: PathMatrix, spec) -> PathMatrix:
    """Admissible transformations of the tested process before residualization.

    ``spec`` is one of:

    - ``"identity"``: returned unchanged;
    - ``("pointwise", f)``: elementwise ``f`` of the current value;
    - ``("shift", s)``: lag by time ``s`` (must be a whole number of steps);
    - ``("filter", kappa)``: left-Riemann filter with kernel ``kappa``.

    Outputs stay grid-predictable: shifted/filtered values at index l depend
    only on samples strictly before l, pointwise maps on the sample at l.
    """
    if spec == "identity":
        return x
    kind, arg = spec
    if kind == "pointwise":
        return PathMatrix(x.grid, np.asarray(arg(x.values), dtype=float))
    if kind == "shift":
        steps = arg * (x.grid.q - 1)
        if abs(steps - round(steps)) > 1e-9:
            raise DomainError(f"shift {arg} does not lie on the grid")
        return shift_path(x, int(round(steps)))
    if kind == "filter":
        return linear_filter_path(x, arg)
    raise DomainError(f"unknown integrand transform {spec!r}")
