"""
Rectangular pulse control c(t) and the driven frequency E(t) = omega + c(t).

The train is on during (n*tau - delta, n*tau] for n >= 1 (open on the left,
closed on the right) with amplitude psi/delta. Pulse edges are grid points,
so an integration step never straddles a jump: within step k the control
takes the value at the step midpoint.
"""
from dataclasses import dataclass

import numpy as np

from errors import GridError
from numerics import GRID_TOLERANCE, TimeGrid


@dataclass(frozen=True)
class PulseTrain:
    """Periodic rectangular pulses: period tau, width delta, area psi"""

    tau: float = 1.0
    delta: float = 1.0
    psi: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        if self.enabled and not 0 < self.delta <= self.tau * (1 + 1e-12):
            raise ValueError(f"pulse needs 0 < delta <= tau, got delta={self.delta}, tau={self.tau}")

    @classmethod
    def disabled(cls):
        return cls()

    @property
    def amplitude(self):
        return self.psi / self.delta if self.enabled else 0.0

    def edges(self, t_end):
        """Every pulse edge n*tau - delta and n*tau in (0, t_end]"""
        if not self.enabled:
            return np.empty(0)
        n = np.arange(1, int(np.floor(t_end / self.tau + 1e-9)) + 2)
        edges = np.concatenate([n * self.tau - self.delta, n * self.tau])
        edges = edges[(edges > GRID_TOLERANCE) & (edges <= t_end + GRID_TOLERANCE)]
        return np.unique(edges)


def pulse_value(train: PulseTrain, t):
    """c(t): psi/delta inside a window (n*tau - delta, n*tau], else 0. Vectorised over t"""
    t = np.asarray(t, dtype=float)
    if not train.enabled:
        return np.zeros_like(t) if t.ndim else 0.0
    tol = GRID_TOLERANCE * max(1.0, train.tau)
    n = np.ceil(t / train.tau - tol / train.tau)
    inside = (n >= 1) & (t > n * train.tau - train.delta + tol)
    value = np.where(inside, train.amplitude, 0.0)
    return value if value.ndim else float(value)


def effective_detuning(omega, train: PulseTrain, t):
    """E(t) = omega + c(t)"""
    return omega + pulse_value(train, t)


def step_detuning(omega, train: PulseTrain, grid: TimeGrid):
    """E on every step of an aligned grid (constant per step, taken at the midpoint)"""
    return effective_detuning(omega, train, grid.midpoints)


def aligned_grid(train: PulseTrain, t_end, dt_nominal):
    """
    Grid with every pulse edge up to t_end as an exact point and uniform
    spacing <= dt_nominal between consecutive edges.
    """
    if not t_end > 0:
        raise GridError(f"t_end must be positive, got {t_end}")
    if train.enabled and (train.delta < 2 * dt_nominal or train.tau < 2 * dt_nominal):
        raise GridError(f"pulse width {train.delta} or period {train.tau} is shorter than 2*dt = "
                        f"{2 * dt_nominal}; reduce run.dt below {min(train.delta, train.tau) / 2}")
    breakpoints = np.concatenate([[0.0], train.edges(t_end), [t_end]])
    return TimeGrid.from_breakpoints(breakpoints, dt_nominal)


def pulse_area(train: PulseTrain, grid: TimeGrid):
    """Integral of c(t) over a grid using the per-step convention"""
    return float(np.sum(pulse_value(train, grid.midpoints) * grid.steps))
