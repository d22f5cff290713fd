"""
Feshbach PQ partitioning of H_eff and the closed equation for the P amplitude

    i dP/dt = h P - i int_0^t R(t) G(t,s) W(s) P(s) ds + R(t) G(t,0) Q(0)

with G(t,s) the time-ordered exponential of -i D.

Blocks live on the half-step grid of the integration grid. Integrals over a
step use Simpson weights on (start, midpoint, end), with right limits at the
start and left limits at the end of the step, so detuning jumps at pulse
edges are integrated exactly.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from errors import GridError, IntegrationError, KernelNotZeroError
from logger import get_logger
from models import CoefficientSeries, Family, ModelSpec, effective_hamiltonian
from noise import NoisePath
from numerics import ComplexSeries, MatrixSeries, TimeGrid, cumulative_simpson

# max |kernel| above which formal_solution_p refuses to run
KERNEL_TOLERANCE = 1e-10

# fixed-point sweeps of the implicit step in solve_p
CORRECTOR_SWEEPS = 4

# D layouts: full matrices, diagonal entries, or a*I + b*J (J = all ones)
D_KINDS = ("dense", "diagonal", "uniform")


def householder_unitary(p_basis):
    """
    Unitary U with U p = e_0 (so row 0 of U is p^dagger). A computational
    basis vector gives a permutation; e_0 gives the identity.
    """
    p = np.asarray(p_basis, dtype=complex)
    norm = np.linalg.norm(p)
    if p.ndim != 1 or norm == 0:
        raise ValueError("p_basis must be a non-zero vector")
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"p_basis must be normalised, got norm {norm:.6g}")
    d = p.size
    nonzero = np.flatnonzero(np.abs(p) > 0)
    if nonzero.size == 1:
        k = int(nonzero[0])
        U = np.eye(d, dtype=complex)
        if k != 0:
            U[[0, k]] = U[[k, 0]]
        U[0] *= np.conj(p[k]) / abs(p[k])
        return U
    phase = p[0] / abs(p[0]) if p[0] != 0 else 1.0
    q = np.conj(phase) * p / norm
    v = q.copy()
    v[0] -= 1.0
    reflector = np.eye(d, dtype=complex) - 2.0 * np.outer(v, np.conj(v)) / np.vdot(v, v).real
    return np.conj(phase) * reflector


@dataclass(frozen=True, eq=False)
class DBlock:
    """
    The Q-Q block D on the half-step grid, as right limits and left limits.
    dense: (n, N, N); diagonal: (n, N); uniform: (n, 2) holding (a, b) of a*I + b*J.
    """

    kind: str
    right: np.ndarray
    left: np.ndarray
    size: int

    def __post_init__(self):
        if self.kind not in D_KINDS:
            raise ValueError(f"D block kind must be one of {D_KINDS}, got {self.kind!r}")

    def matrix(self, j, left=False):
        """Dense D at half-step point j"""
        data = (self.left if left else self.right)[j]
        return _dense(self.kind, data, self.size)


def _dense(kind, data, N):
    if kind == "dense":
        return np.array(data, dtype=complex)
    if kind == "diagonal":
        return np.diag(data).astype(complex)
    a, b = data
    return a * np.eye(N, dtype=complex) + b * np.ones((N, N), dtype=complex)


class StepPropagators:
    """
    exp(-i X) over the two half steps of every integration step, with X the
    Simpson-weighted integral of D over that half step.
    """

    def __init__(self, D: DBlock, steps):
        self.kind = D.kind
        self.N = D.size
        steps = np.asarray(steps).reshape((-1,) + (1,) * (D.right.ndim - 1))
        Da = D.right[0:-1:2]
        Dm = D.right[1::2]
        Db = D.left[2::2]
        self.X = (steps / 24.0 * (5.0 * Da + 8.0 * Dm - Db),
                  steps / 24.0 * (-Da + 8.0 * Dm + 5.0 * Db))
        if self.kind == "dense":
            self._factors = tuple(linalg.expm(-1j * X) for X in self.X)
        elif self.kind == "diagonal":
            self._factors = tuple(np.exp(-1j * X) for X in self.X)
        else:
            self._factors = tuple((np.exp(-1j * X[:, 0]), np.exp(-1j * self.N * X[:, 1]) - 1.0)
                                  for X in self.X)

    @property
    def n_steps(self):
        return len(self.X[0])

    def apply(self, k, part, v):
        """Half-step propagator (part 1: first half, 2: second half) of step k applied to v"""
        factor = self._factors[part - 1]
        if self.kind == "dense":
            return factor[k] @ v
        if self.kind == "diagonal":
            f = factor[k]
            return (f[:, None] if np.ndim(v) == 2 else f) * v
        phase, shrink = factor[0][k], factor[1][k]
        mean = np.mean(v, axis=0, keepdims=np.ndim(v) == 2)
        return phase * (v + shrink * mean)

    def apply_step(self, k, v):
        return self.apply(k, 2, self.apply(k, 1, v))

    def matrix(self, k, part):
        """Dense half-step propagator from a dense matrix exponential of X"""
        return linalg.expm(-1j * _dense(self.kind, self.X[part - 1][k], self.N))


@dataclass(frozen=True, eq=False)
class PQBlocks:
    """
    H_eff in the basis where p_basis is the first coordinate:
    [[h, R], [W, D]] at every half-step point, right limits in the main arrays
    and left limits in the *_left arrays.
    """

    fine_grid: TimeGrid
    p_basis: np.ndarray
    unitary: np.ndarray
    h: np.ndarray
    R: np.ndarray
    W: np.ndarray
    D: DBlock
    h_left: np.ndarray
    R_left: np.ndarray
    W_left: np.ndarray
    coeffs: Optional[CoefficientSeries] = None
    _props: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = self.fine_grid.size
        N = self.D.size
        if self.unitary.shape != (N + 1, N + 1):
            raise ValueError("block dimensions do not match the basis change")
        for name in ("h", "h_left"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} needs one value per half-step point")
        for name in ("R", "W", "R_left", "W_left"):
            if getattr(self, name).shape != (n, N):
                raise ValueError(f"{name} needs shape ({n}, {N})")

    @property
    def q_dimension(self):
        return self.D.size

    @property
    def grid(self):
        """Integration grid (every other half-step point)"""
        if self.fine_grid.size % 2 != 1:
            raise GridError("blocks are not on a half-step grid")
        return TimeGrid(self.fine_grid.points[0::2], 2 * self.fine_grid.dt_nominal)

    @property
    def propagators(self) -> StepPropagators:
        if "steps" not in self._props:
            self._props["steps"] = StepPropagators(self.D, self.grid.steps)
        return self._props["steps"]

    def split_state(self, psi):
        """(P, Q) components of a full state vector"""
        rotated = self.unitary @ np.asarray(psi, dtype=complex)
        return complex(rotated[0]), rotated[1:]


def reassemble(blocks: PQBlocks, j, left=False):
    """The rotated matrix [[h, R], [W, D]] at half-step point j"""
    N = blocks.q_dimension
    out = np.zeros((N + 1, N + 1), dtype=complex)
    out[0, 0] = (blocks.h_left if left else blocks.h)[j]
    out[0, 1:] = (blocks.R_left if left else blocks.R)[j]
    out[1:, 0] = (blocks.W_left if left else blocks.W)[j]
    out[1:, 1:] = blocks.D.matrix(j, left)
    return out


def partition(H_eff: MatrixSeries, p_basis) -> PQBlocks:
    """Rotate every H_eff sample so p_basis is the first coordinate and slice the blocks"""
    d = H_eff.dimension
    if d < 2:
        raise ValueError("partitioning needs at least a two-dimensional space")
    p_basis = np.asarray(p_basis, dtype=complex)
    if p_basis.shape != (d,):
        raise ValueError(f"p_basis needs {d} amplitudes, got {p_basis.shape}")
    U = householder_unitary(p_basis)
    right = U @ H_eff.values @ np.conj(U.T)
    left_source = H_eff.values if H_eff.left_values is None else H_eff.left_values
    left = U @ left_source @ np.conj(U.T)

    D_right, D_left = right[:, 1:, 1:], left[:, 1:, 1:]
    off = ~np.eye(d - 1, dtype=bool)
    if not np.any(D_right[:, off]) and not np.any(D_left[:, off]):
        D = DBlock("diagonal", np.diagonal(D_right, axis1=1, axis2=2).copy(),
                   np.diagonal(D_left, axis1=1, axis2=2).copy(), d - 1)
    else:
        D = DBlock("dense", D_right, D_left, d - 1)
    return PQBlocks(H_eff.grid, p_basis, U, right[:, 0, 0], right[:, 0, 1:], right[:, 1:, 0], D,
                    left[:, 0, 0], left[:, 0, 1:], left[:, 1:, 0])


def _uniform_multilevel_blocks(coeffs: CoefficientSeries, noise: NoisePath):
    """Blocks of the (N+1)-level model with P = |0>, built without dense matrices"""
    N = coeffs.model.N
    E_right, E_left = coeffs.detuning_limits()
    F = coeffs.values[:, 0]
    n = coeffs.fine_grid.size
    R = 1j * np.repeat(noise.samples[:, None], N, axis=1)
    W = np.zeros((n, N), dtype=complex)
    D = DBlock("uniform", np.stack([E_right, -1j * F], axis=-1), np.stack([E_left, -1j * F], axis=-1), N)
    p = np.zeros(N + 1, dtype=complex)
    p[0] = 1.0
    return PQBlocks(coeffs.fine_grid, p, np.eye(N + 1, dtype=complex), -E_right.astype(complex),
                    R, W, D, -E_left.astype(complex), R.copy(), W.copy(), coeffs=coeffs)


def block_series(model: ModelSpec, coeffs: CoefficientSeries, noise: NoisePath, p_basis=None):
    """
    PQ blocks of H_eff along one noise path on the half-step grid.
    p_basis defaults to the first basis state of the family.
    """
    if not noise.grid.same_as(coeffs.fine_grid):
        raise ValueError("noise must be sampled on the half-step grid of the integration grid")
    d = model.dimension
    first = np.zeros(d, dtype=complex)
    first[0] = 1.0
    p_basis = first if p_basis is None else np.asarray(p_basis, dtype=complex)
    if model.family is Family.MULTI_LEVEL and np.array_equal(p_basis, first):
        return _uniform_multilevel_blocks(coeffs, noise)

    E_right, E_left = coeffs.detuning_limits()
    values = coeffs.values
    z = noise.samples
    right = np.stack([effective_hamiltonian(model, values[j], z[j], E_right[j]) for j in range(len(z))])
    left = np.stack([effective_hamiltonian(model, values[j], z[j], E_left[j]) for j in range(len(z))])
    blocks = partition(MatrixSeries(coeffs.fine_grid, right, left), p_basis)
    return PQBlocks(blocks.fine_grid, blocks.p_basis, blocks.unitary, blocks.h, blocks.R, blocks.W,
                    blocks.D, blocks.h_left, blocks.R_left, blocks.W_left, coeffs=coeffs)


def _grid_indices(blocks: PQBlocks, s, t):
    grid = blocks.grid
    i_s, i_t = grid.index_of(s), grid.index_of(t)
    if i_s > i_t:
        raise ValueError(f"propagator needs s <= t, got s={s}, t={t}")
    return i_s, i_t


def propagator(blocks: PQBlocks, s, t, method="auto"):
    """
    G(t, s) for grid times s <= t.

    method "stepped" multiplies dense matrix exponentials step by step;
    "auto" uses the closed forms for diagonal D and for the multi-level
    family, and the stepped product otherwise.
    """
    i_s, i_t = _grid_indices(blocks, s, t)
    if method == "auto":
        if blocks.D.kind == "diagonal":
            return diagonal_propagator(blocks, s, t)
        if blocks.D.kind == "uniform" and blocks.coeffs is not None:
            return closed_form_propagator(blocks.coeffs, s, t)
    elif method != "stepped":
        raise ValueError(f"unknown propagator method {method!r}")
    props = blocks.propagators
    G = np.eye(blocks.q_dimension, dtype=complex)
    for k in range(i_s, i_t):
        G = props.matrix(k, 2) @ (props.matrix(k, 1) @ G)
    return G


def diagonal_propagator(blocks: PQBlocks, s, t):
    """G(t, s) = diag(exp(-i int_s^t D_nn)) for a diagonal D"""
    if blocks.D.kind != "diagonal":
        raise ValueError("diagonal_propagator needs a diagonal D block")
    i_s, i_t = _grid_indices(blocks, s, t)
    integral = cumulative_simpson(ComplexSeries(blocks.fine_grid, blocks.D.right), blocks.D.left).values
    return np.diag(np.exp(-1j * (integral[2 * i_t] - integral[2 * i_s])))


def closed_form_propagator(coeffs: CoefficientSeries, s, t):
    """
    Multi-level G(t, s) from E-bar = exp(-i int E) and F-bar = exp(-int F):
    (E-bar(t)/E-bar(s)) [(F-bar(t)/F-bar(s))^N J/N + (1 - J/N)]
    """
    model = coeffs.model
    if model.family is not Family.MULTI_LEVEL:
        raise ValueError("the closed-form propagator applies to the multi-level model only")
    grid = coeffs.grid
    i_s, i_t = grid.index_of(s), grid.index_of(t)
    if i_s > i_t:
        raise ValueError(f"propagator needs s <= t, got s={s}, t={t}")
    int_E = coeffs.detuning_integral()
    int_F = coeffs.coefficient_integral()[:, 0]
    N = model.N
    e_ratio = np.exp(-1j * (int_E[2 * i_t] - int_E[2 * i_s]))
    f_ratio_N = np.exp(-N * (int_F[2 * i_t] - int_F[2 * i_s]))
    J = np.ones((N, N), dtype=complex) / N
    return e_ratio * (f_ratio_N * J + np.eye(N) - J)


@dataclass(frozen=True, eq=False)
class MemoryKernel:
    """Kernel R(t_i) G(t_i, t_j) W(t_j) on the integration grid (zero above the diagonal)"""

    grid: TimeGrid
    values: np.ndarray

    def at(self, i, j):
        return self.values[i, j]


def _kernel_rows(blocks: PQBlocks):
    """Yield (i, kernel row over j <= i) on the integration grid"""
    props = blocks.propagators
    M = blocks.grid.n_steps
    columns = np.zeros((blocks.q_dimension, M + 1), dtype=complex)
    for i in range(M + 1):
        columns[:, i] = blocks.W[2 * i]
        yield i, blocks.R[2 * i] @ columns[:, :i + 1]
        if i < M:
            columns[:, :i + 1] = props.apply_step(i, columns[:, :i + 1])


def kernel(blocks: PQBlocks) -> MemoryKernel:
    """The full memory kernel (quadratic memory in the number of steps)"""
    size = blocks.grid.size
    values = np.zeros((size, size), dtype=complex)
    for i, row in _kernel_rows(blocks):
        values[i, :i + 1] = row
    return MemoryKernel(blocks.grid, values)


def kernel_max(blocks: PQBlocks):
    """max |kernel| over the integration grid; exactly 0 when W vanishes"""
    if not np.any(blocks.W) and not np.any(blocks.W_left):
        return 0.0
    largest = 0.0
    for _, row in _kernel_rows(blocks):
        largest = max(largest, float(np.max(np.abs(row))))
    return largest


def solve_p(blocks: PQBlocks, P0, Q0, method="propagated"):
    """
    P(t) on the integration grid from the closed one-dimensional equation.

    "propagated" carries the history vector S(t) = int_0^t G(t,s) W(s) P(s) ds
    + i G(t,0) Q(0) with the step propagators and solves each step with the
    implicit Simpson (Lobatto IIIA) rule. "direct" stores the whole history
    and uses trapezoid memory integrals with a Heun predictor-corrector.
    """
    Q0 = np.asarray(Q0, dtype=complex).reshape(blocks.q_dimension)
    if method == "propagated":
        values = _solve_p_propagated(blocks, complex(P0), Q0)
    elif method == "direct":
        values = _solve_p_direct(blocks, complex(P0), Q0)
    else:
        raise ValueError(f"unknown solve_p method {method!r}")
    return ComplexSeries(blocks.grid, values)


def _solve_p_propagated(blocks: PQBlocks, P0, Q0):
    grid = blocks.grid
    props = blocks.propagators
    h, R, W = blocks.h, blocks.R, blocks.W
    out = np.empty(grid.size, dtype=complex)
    out[0] = P0
    P_a = P0
    S_a = 1j * Q0
    for k, dt in enumerate(grid.steps):
        a, m, b = 2 * k, 2 * k + 1, 2 * k + 2
        h_b, R_b, W_b = blocks.h_left[b], blocks.R_left[b], blocks.W_left[b]
        f_a = -1j * h[a] * P_a - R[a] @ S_a
        S_am = props.apply(k, 1, S_a)
        S_ab = props.apply(k, 2, S_am)
        WP_am = props.apply(k, 1, W[a] * P_a)
        WP_ab = props.apply(k, 2, WP_am)
        P_m = P_a + 0.5 * dt * f_a
        P_b = P_a + dt * f_a
        for _ in range(CORRECTOR_SWEEPS):
            S_m = S_am + 0.25 * dt * (WP_am + W[m] * P_m)
            S_b = S_ab + dt / 6.0 * (WP_ab + 4.0 * props.apply(k, 2, W[m] * P_m) + W_b * P_b)
            f_m = -1j * h[m] * P_m - R[m] @ S_m
            f_b = -1j * h_b * P_b - R_b @ S_b
            P_m = P_a + dt / 24.0 * (5.0 * f_a + 8.0 * f_m - f_b)
            P_b = P_a + dt / 6.0 * (f_a + 4.0 * f_m + f_b)
        S_a = S_ab + dt / 6.0 * (WP_ab + 4.0 * props.apply(k, 2, W[m] * P_m) + W_b * P_b)
        P_a = P_b
        if not np.isfinite(P_a):
            raise IntegrationError(grid.points[k + 1])
        out[k + 1] = P_a
    return out


def _solve_p_direct(blocks: PQBlocks, P0, Q0):
    grid = blocks.grid
    props = blocks.propagators
    M = grid.n_steps
    history = np.zeros((blocks.q_dimension, M + 1), dtype=complex)
    weights = np.zeros(M + 1)
    out = np.empty(M + 1, dtype=complex)
    out[0] = P0
    history[:, 0] = blocks.W[0] * P0
    g = Q0.copy()
    for n, dt in enumerate(grid.steps):
        a, b = 2 * n, 2 * n + 2
        P_n = out[n]
        f_n = -1j * blocks.h[a] * P_n - blocks.R[a] @ (history[:, :n + 1] @ weights[:n + 1]) \
            - 1j * blocks.R[a] @ g
        history[:, :n + 1] = props.apply_step(n, history[:, :n + 1])
        g = props.apply_step(n, g)
        weights[n] += 0.5 * dt
        weights[n + 1] = 0.5 * dt

        def rate(P_next):
            history[:, n + 1] = blocks.W[b] * P_next
            memory = history[:, :n + 2] @ weights[:n + 2]
            return -1j * blocks.h_left[b] * P_next - blocks.R_left[b] @ memory - 1j * blocks.R_left[b] @ g

        predicted = P_n + dt * f_n
        out[n + 1] = P_n + 0.5 * dt * (f_n + rate(predicted))
        history[:, n + 1] = blocks.W[b] * out[n + 1]
        if not np.isfinite(out[n + 1]):
            raise IntegrationError(grid.points[n + 1])
    return out


def q_series(blocks: PQBlocks, Q0):
    """G(t,0) Q(0) at every half-step point, shape (2M+1, N)"""
    props = blocks.propagators
    out = np.empty((blocks.fine_grid.size, blocks.q_dimension), dtype=complex)
    q = np.asarray(Q0, dtype=complex).reshape(blocks.q_dimension)
    out[0] = q
    for k in range(props.n_steps):
        out[2 * k + 1] = props.apply(k, 1, out[2 * k])
        out[2 * k + 2] = props.apply(k, 2, out[2 * k + 1])
    return out


def formal_solution_p(blocks: PQBlocks, P0, Q0):
    """
    P(t) = [P0 - i int_0^t R Q e^{i int h} ds] e^{-i int_0^t h} with Q(s) = G(s,0) Q(0).
    Valid only when the memory kernel vanishes.
    """
    largest = kernel_max(blocks)
    if largest > KERNEL_TOLERANCE:
        raise KernelNotZeroError(largest)
    fine = blocks.fine_grid
    int_h = cumulative_simpson(ComplexSeries(fine, blocks.h), blocks.h_left).values
    Q = q_series(blocks, Q0)
    turn = np.exp(1j * int_h)
    right = np.einsum('jn,jn->j', blocks.R, Q) * turn
    left = np.einsum('jn,jn->j', blocks.R_left, Q) * turn
    driven = cumulative_simpson(ComplexSeries(fine, right), left).values
    P = (complex(P0) - 1j * driven) * np.exp(-1j * int_h)
    get_logger().debug(f"formal P solution on {fine.size} half-step points")
    return ComplexSeries(blocks.grid, P[0::2])
