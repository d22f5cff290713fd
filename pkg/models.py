"""
The three model families: two-level atom, qutrit (noise-free O-bar
approximation) and the special (N+1)-level atom. Each family fixes a basis
ordering, its system Hamiltonian, its Lindblad operator and the Riccati-type
equations for the coefficients of the O-bar operator.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from control import PulseTrain, step_detuning
from noise import CorrelationSpec
from numerics import ComplexSeries, TimeGrid, cumulative_simpson, rk4_integrate


class Family(str, Enum):
    TWO_LEVEL = "two_level"
    QUTRIT = "qutrit"
    MULTI_LEVEL = "multi_level"


# Two-level energy splits: E1 = -E0 = E/2, or E0 = 0, E1 = E
SPLITS = ("symmetric", "ground")


@dataclass(frozen=True)
class ModelSpec:
    """
    Model family and its parameters (rates in units of Gamma).

    Basis ordering: two-level (|0>, |1>); qutrit (|1>, |0>, |2>);
    multi-level (|0>, |1>, ..., |N>).
    """

    family: Family
    omega: float
    kappa: float = 1.0
    N: int = 1
    energy_split: str = "symmetric"

    def __post_init__(self):
        object.__setattr__(self, 'family', Family(self.family))
        if self.family is Family.QUTRIT and not self.kappa > 0:
            raise ValueError(f"qutrit coupling kappa must be > 0, got {self.kappa}")
        if self.family is Family.MULTI_LEVEL and int(self.N) < 1:
            raise ValueError(f"multi-level model needs N >= 1, got {self.N}")
        if self.energy_split not in SPLITS:
            raise ValueError(f"energy_split must be one of {SPLITS}")
        object.__setattr__(self, 'N', int(self.N))

    @classmethod
    def two_level(cls, omega, energy_split="symmetric"):
        return cls(Family.TWO_LEVEL, omega, energy_split=energy_split)

    @classmethod
    def qutrit(cls, omega, kappa=np.sqrt(2.0)):
        return cls(Family.QUTRIT, omega, kappa=kappa)

    @classmethod
    def multi_level(cls, omega, N):
        return cls(Family.MULTI_LEVEL, omega, N=N)

    @property
    def dimension(self):
        if self.family is Family.TWO_LEVEL:
            return 2
        if self.family is Family.QUTRIT:
            return 3
        return self.N + 1

    @property
    def n_coefficients(self):
        return 2 if self.family is Family.QUTRIT else 1

    @property
    def basis_labels(self):
        if self.family is Family.QUTRIT:
            return ["|1>", "|0>", "|2>"]
        return [f"|{n}>" for n in range(self.dimension)]


def default_initial_state(model: ModelSpec):
    """Equal superposition of every basis state"""
    d = model.dimension
    return np.full(d, 1.0 / np.sqrt(d), dtype=complex)


def system_energies(model: ModelSpec, E):
    """Diagonal of H_sys in the family's basis for detuning E (scalar or array)"""
    E = np.asarray(E, dtype=float)
    if model.family is Family.TWO_LEVEL:
        if model.energy_split == "symmetric":
            return np.stack([-0.5 * E, 0.5 * E], axis=-1)
        return np.stack([np.zeros_like(E), E], axis=-1)
    if model.family is Family.QUTRIT:
        return np.stack([np.zeros_like(E), -E, E], axis=-1)
    excited = np.repeat(E[..., None], model.N, axis=-1)
    return np.concatenate([-E[..., None], excited], axis=-1)


def coupling_matrix(model: ModelSpec):
    """i*L, the matrix multiplying z*_t in H_eff"""
    d = model.dimension
    C = np.zeros((d, d), dtype=complex)
    if model.family is Family.TWO_LEVEL:
        C[0, 1] = 1j
    elif model.family is Family.QUTRIT:
        # L = kappa(|0><1| + |1><2|) in the (|1>, |0>, |2>) ordering
        C[1, 0] = 1j * model.kappa
        C[0, 2] = 1j * model.kappa
    else:
        C[0, 1:] = 1j
    return C


def bath_matrix(model: ModelSpec, state):
    """-i L^dagger O-bar for the coefficient values in `state`"""
    d = model.dimension
    B = np.zeros((d, d), dtype=complex)
    if model.family is Family.TWO_LEVEL:
        B[1, 1] = -1j * state[0]
    elif model.family is Family.QUTRIT:
        B[0, 0] = -1j * state[0]
        B[2, 2] = -1j * state[1]
    else:
        B[1:, 1:] = -1j * state[0]
    return B


def coeff_rhs(model: ModelSpec, corr: CorrelationSpec, state, E):
    """Time derivative of the O-bar coefficients (F) or (F1, F2) at detuning E"""
    state = np.asarray(state, dtype=complex)
    c = corr.strength
    g = corr.gamma
    if model.family is Family.TWO_LEVEL:
        F = state[0]
        return np.array([c + (-g + 1j * E) * F + F * F])
    if model.family is Family.QUTRIT:
        F1, F2 = state[0], state[1]
        c = c * model.kappa ** 2
        return np.array([
            c + (-g + 1j * E) * F1 + F1 * F1 - F1 * F2,
            c + (-g + 1j * E) * F2 + F2 * F2,
        ])
    F = state[0]
    return np.array([c + (-g + 2j * E) * F + model.N * F * F])


def effective_hamiltonian(model: ModelSpec, state, z_star, E):
    """H_eff = H_sys + i L z*_t - i L^dagger O-bar as a dense matrix"""
    H = np.diag(system_energies(model, E)).astype(complex)
    H += z_star * coupling_matrix(model)
    H += bath_matrix(model, state)
    return H


def apply_effective_hamiltonian(model: ModelSpec, state, z_star, E, psi):
    """
    H_eff applied to a batch of states psi (batch, d) with one noise value per
    row. The multi-level family uses its rank-one structure (O(N) per state).
    """
    z_star = np.asarray(z_star)
    energies = system_energies(model, E)
    if model.family is Family.MULTI_LEVEL:
        F = state[0]
        excited_sum = psi[..., 1:].sum(axis=-1)
        out = energies * psi
        out[..., 0] += 1j * z_star * excited_sum
        out[..., 1:] += (-1j * F * excited_sum)[..., None]
        return out
    H0 = np.diag(energies).astype(complex) + bath_matrix(model, state)
    C = coupling_matrix(model)
    return psi @ H0.T + z_star[..., None] * (psi @ C.T)


@dataclass(frozen=True, eq=False)
class CoefficientSeries:
    """
    O-bar coefficients solved once per experiment on the half-step grid of
    `grid`, plus the per-step detuning E. Shared read-only by all trajectories.
    """

    model: ModelSpec
    corr: CorrelationSpec
    train: PulseTrain
    grid: TimeGrid
    fine: ComplexSeries
    detuning: np.ndarray

    @property
    def fine_grid(self):
        return self.fine.grid

    @property
    def values(self):
        """Coefficient values on the half-step grid, shape (2M+1, k)"""
        return self.fine.values

    def on_grid(self):
        """Coefficient values at the integration grid points"""
        return self.fine.values[0::2]

    def detuning_limits(self):
        """E at every half-step point as (right limit, left limit)"""
        right = np.repeat(self.detuning, 2)
        right = np.append(right, self.detuning[-1])
        left = np.concatenate([[self.detuning[0]], np.repeat(self.detuning, 2)])
        return right, left

    def detuning_integral(self):
        """Exact running integral of E at every half-step point"""
        h = self.grid.steps
        out = np.zeros(self.fine_grid.size)
        out[2::2] = np.cumsum(self.detuning * h)
        out[1::2] = out[0:-1:2] + 0.5 * self.detuning * h
        return out

    def coefficient_integral(self):
        """Running integral of each coefficient at every half-step point, shape (2M+1, k)"""
        return cumulative_simpson(self.fine).values


def solve_coefficients(model: ModelSpec, corr: CorrelationSpec, train: PulseTrain, grid: TimeGrid):
    """Integrate the coefficient equations from zero on the half-step grid of `grid`"""
    detuning = step_detuning(model.omega, train, grid)
    fine_grid = grid.refined()
    fine_detuning = np.repeat(detuning, 2)

    def rhs(t, y, step, stage):
        return coeff_rhs(model, corr, y, fine_detuning[step])

    y0 = np.zeros(model.n_coefficients, dtype=complex)
    fine = rk4_integrate(rhs, y0, fine_grid)
    return CoefficientSeries(model, corr, train, grid, fine, detuning)
