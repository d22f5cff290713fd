"""
Small dense numerics shared by every other module: time grids, sampled
series, fixed-step RK4, cumulative quadrature and step exponentials.
Everything here is pure; identical inputs give bit-identical outputs.
"""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, linalg

from errors import GridError, IntegrationError

# Grid points closer than this are the same point
GRID_TOLERANCE = 1e-12

# Offset of each RK4 stage on the half-step grid: start, mid, mid, end
STAGE_HALF_OFFSET = (0, 1, 1, 2)


def fine_index(step, stage):
    """Index on the half-step grid of RK4 stage `stage` of coarse step `step`"""
    return 2 * step + STAGE_HALF_OFFSET[stage]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing time points (units 1/Gamma) with spacing <= dt_nominal"""

    points: np.ndarray
    dt_nominal: float

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise GridError("a time grid needs at least two points")
        if not np.all(np.isfinite(points)):
            raise GridError("time grid contains non-finite points")
        steps = np.diff(points)
        if np.any(steps <= 0):
            raise GridError("time grid must be strictly increasing")
        if self.dt_nominal <= 0:
            raise GridError(f"dt_nominal must be positive, got {self.dt_nominal}")
        if steps.max() > self.dt_nominal * (1 + 1e-9):
            raise GridError(f"grid spacing {steps.max():.3e} exceeds dt_nominal {self.dt_nominal:.3e}")
        points.setflags(write=False)
        object.__setattr__(self, 'points', points)

    @classmethod
    def uniform(cls, t_end, dt, t_start=0.0):
        """Uniform grid from t_start to t_end with spacing <= dt"""
        return cls.from_breakpoints([t_start, t_end], dt)

    @classmethod
    def from_breakpoints(cls, breakpoints, dt):
        """
        Grid that contains every breakpoint exactly and is uniform between
        consecutive breakpoints with spacing <= dt.
        """
        if dt <= 0:
            raise GridError(f"dt must be positive, got {dt}")
        marks = np.unique(np.asarray(breakpoints, dtype=float))
        keep = [marks[0]]
        for mark in marks[1:]:
            if mark - keep[-1] > GRID_TOLERANCE:
                keep.append(mark)
        if len(keep) < 2:
            raise GridError("t_end must be larger than t_start")
        pieces = []
        for a, b in zip(keep[:-1], keep[1:]):
            n = max(1, int(np.ceil((b - a) / dt - 1e-9)))
            piece = np.linspace(a, b, n + 1)
            piece[0], piece[-1] = a, b
            pieces.append(piece[:-1])
        pieces.append(np.array([keep[-1]]))
        return cls(np.concatenate(pieces), float(dt))

    @property
    def t_start(self):
        return float(self.points[0])

    @property
    def t_end(self):
        return float(self.points[-1])

    @property
    def size(self):
        return int(self.points.size)

    @property
    def n_steps(self):
        return self.size - 1

    @property
    def steps(self):
        return np.diff(self.points)

    @property
    def midpoints(self):
        return 0.5 * (self.points[:-1] + self.points[1:])

    def refined(self):
        """Half-step grid: every point of this grid plus every step midpoint"""
        fine = np.empty(2 * self.size - 1)
        fine[0::2] = self.points
        fine[1::2] = self.midpoints
        return TimeGrid(fine, self.dt_nominal / 2)

    def index_of(self, t):
        """Index of the grid point equal to t (within GRID_TOLERANCE)"""
        k = int(np.argmin(np.abs(self.points - t)))
        if abs(self.points[k] - t) > GRID_TOLERANCE * max(1.0, abs(t)):
            raise GridError(f"t = {t} is not a grid point")
        return k

    def sample_indices(self, stride):
        """Every stride-th point index, always including the last one"""
        stride = max(1, int(stride))
        indices = np.arange(0, self.size, stride)
        if indices[-1] != self.size - 1:
            indices = np.append(indices, self.size - 1)
        return indices

    def subgrid(self, indices):
        return TimeGrid(self.points[np.asarray(indices)], self.dt_nominal * max(1, int(np.max(np.diff(indices)))))

    def same_as(self, other):
        return self is other or (self.size == other.size and np.array_equal(self.points, other.points))


@dataclass(frozen=True, eq=False)
class ComplexSeries:
    """Complex samples (scalar or vector valued), one per grid point"""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape[0] != self.grid.size:
            raise GridError(f"series has {values.shape[0]} samples for {self.grid.size} grid points")
        object.__setattr__(self, 'values', values)

    def at(self, t):
        return self.values[self.grid.index_of(t)]

    def subsample(self, indices):
        return ComplexSeries(self.grid.subgrid(indices), self.values[np.asarray(indices)])


@dataclass(frozen=True, eq=False)
class MatrixSeries:
    """
    Square complex matrices of one dimension, one per grid point.
    For piecewise-constant drivers left_values holds the left limit at each
    point (values hold the right limit); None means the series is continuous.
    """

    grid: TimeGrid
    values: np.ndarray
    left_values: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 3 or values.shape[1] != values.shape[2]:
            raise GridError("matrix series needs shape (points, d, d)")
        if values.shape[0] != self.grid.size:
            raise GridError(f"series has {values.shape[0]} samples for {self.grid.size} grid points")
        object.__setattr__(self, 'values', values)
        if self.left_values is not None:
            left = np.asarray(self.left_values, dtype=complex)
            if left.shape != values.shape:
                raise GridError("left limits must match the series shape")
            object.__setattr__(self, 'left_values', left)

    @property
    def dimension(self):
        return int(self.values.shape[1])

    def left(self, k):
        if self.left_values is None:
            return self.values[k]
        return self.left_values[k]


def rk4_integrate(rhs: Callable, y0, grid: TimeGrid, observer: Optional[Callable] = None,
                  store: bool = True, check_finite: bool = True):
    """
    Classical 4th-order Runge-Kutta over a (possibly non-uniform) grid.

    Args:
        rhs: rhs(t, y, step, stage) -> dy/dt. `step` is the index of the step
            being taken and `stage` the RK4 stage (0 start, 1 and 2 midpoint,
            3 end), so drivers that are piecewise constant per step or sampled
            on the half-step grid can be looked up exactly.
        y0: initial state, any array shape
        grid: integration grid
        observer: optional observer(k, y) called at every grid point
        store: keep the full solution (otherwise only the final state is kept)
        check_finite: raise IntegrationError at the first non-finite state

    Returns:
        ComplexSeries of shape (points, *y0.shape) when store, else the final state
    """
    y = np.array(y0, dtype=complex)
    points = grid.points
    steps = grid.steps
    mids = grid.midpoints
    out = np.empty((grid.size,) + y.shape, dtype=complex) if store else None
    if store:
        out[0] = y
    if observer is not None:
        observer(0, y)
    for k in range(grid.n_steps):
        h = steps[k]
        k1 = rhs(points[k], y, k, 0)
        k2 = rhs(mids[k], y + 0.5 * h * k1, k, 1)
        k3 = rhs(mids[k], y + 0.5 * h * k2, k, 2)
        k4 = rhs(points[k + 1], y + h * k3, k, 3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if check_finite and not np.all(np.isfinite(y)):
            raise IntegrationError(points[k + 1])
        if store:
            out[k + 1] = y
        if observer is not None:
            observer(k + 1, y)
    if store:
        return ComplexSeries(grid, out)
    return y


def cumulative_trapezoid(series: ComplexSeries):
    """Running trapezoid integral from t_start; result[0] = 0"""
    values = np.asarray(series.values)
    if not np.all(np.isfinite(values)):
        raise IntegrationError(series.grid.t_start, "non-finite samples passed to cumulative_trapezoid")
    result = integrate.cumulative_trapezoid(values, x=series.grid.points, axis=0, initial=0)
    return ComplexSeries(series.grid, result)


def cumulative_simpson(series: ComplexSeries, left_values=None):
    """
    Running integral of a series sampled on a half-step grid (odd number of
    points). Even points get composite Simpson over whole steps; odd points add
    the quadratic-interpolant integral over the first half of their step.
    left_values, when given, supplies the left limit used at the end of each
    step for integrands that jump at step boundaries.
    """
    f = np.asarray(series.values)
    if f.shape[0] % 2 != 1:
        raise GridError("cumulative_simpson needs a half-step grid (odd number of points)")
    fb_all = f if left_values is None else np.asarray(left_values)
    fa = f[0:-1:2]
    fm = f[1::2]
    fb = fb_all[2::2]
    h = series.grid.points[2::2] - series.grid.points[0:-1:2]
    h = h.reshape((-1,) + (1,) * (f.ndim - 1))
    full = h / 6.0 * (fa + 4.0 * fm + fb)
    half = h / 24.0 * (5.0 * fa + 8.0 * fm - fb)
    out = np.zeros_like(f, dtype=np.result_type(f, float))
    out[2::2] = np.cumsum(full, axis=0)
    out[1::2] = out[0:-1:2] + half
    return ComplexSeries(series.grid, out)


def propagator_step(generator, h):
    """exp(-i * generator * h) for one small dense block"""
    return linalg.expm(-1j * h * np.asarray(generator, dtype=complex))


def mean_and_stderr(samples, axis=0):
    """Sample mean and standard error of the mean along an axis"""
    samples = np.asarray(samples)
    n = samples.shape[axis]
    mean = np.mean(samples, axis=axis)
    if n < 2:
        return mean, np.zeros_like(np.real(mean))
    spread = np.std(samples, axis=axis, ddof=1)
    return mean, spread / np.sqrt(n)
