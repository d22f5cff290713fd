"""
Stochastic trajectories of the linear non-Markovian QSD equation
i d/dt psi = H_eff(t, z*) psi and their ensemble fidelity.

The fidelity is |<psi_ref(t)|psi_t>|^2 averaged over trajectories. In the
rotating frame (default) psi_ref(t) = exp(-i int H_sys) psi_0, which is the
picture the closed-form fidelity formulas are written in; the lab frame uses
psi_ref = psi_0.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

import config
import noise as bath
from logger import get_logger
from models import (CoefficientSeries, Family, ModelSpec, apply_effective_hamiltonian,
                    default_initial_state, effective_hamiltonian, system_energies)
from noise import NoisePath, mix_seed, sample_paths
from numerics import (ComplexSeries, TimeGrid, cumulative_simpson, fine_index,
                      mean_and_stderr, rk4_integrate)

FRAMES = ("rotating", "lab")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """State vectors of one trajectory at every integration grid point"""

    grid: TimeGrid
    psi: np.ndarray
    seed: int

    def norms(self):
        return np.sum(np.abs(self.psi) ** 2, axis=-1)


@dataclass(frozen=True, eq=False)
class FidelityCurve:
    """
    Fidelity on a grid. n_traj = 0 marks an exact (closed-form) curve,
    otherwise mean/stderr are Monte-Carlo estimates over n_traj included
    trajectories and `divergent` counts the excluded ones.
    """

    grid: TimeGrid
    mean: np.ndarray
    stderr: np.ndarray
    n_traj: int
    divergent: int = 0
    norm_mean: Optional[np.ndarray] = None
    norm_stderr: Optional[np.ndarray] = None
    population_mean: Optional[np.ndarray] = None
    population_stderr: Optional[np.ndarray] = None
    label: str = ""

    @property
    def is_exact(self):
        return self.n_traj == 0

    @property
    def divergent_fraction(self):
        total = self.n_traj + self.divergent
        return self.divergent / total if total else 0.0

    @property
    def failed(self):
        return self.divergent_fraction > config.DIVERGENT_FRACTION_LIMIT

    def value_at(self, t):
        """Fidelity at time t (linear interpolation between grid points)"""
        return float(np.interp(t, self.grid.points, self.mean))


def _check_frame(frame):
    if frame not in FRAMES:
        raise ValueError(f"frame must be one of {FRAMES}, got {frame!r}")


def _normalised(psi0, model):
    psi0 = default_initial_state(model) if psi0 is None else np.asarray(psi0, dtype=complex)
    if psi0.shape != (model.dimension,):
        raise ValueError(f"initial state needs {model.dimension} amplitudes, got {psi0.shape}")
    norm = np.linalg.norm(psi0)
    if norm == 0:
        raise ValueError("initial state is the zero vector")
    return psi0 / norm


def reference_states(coeffs: CoefficientSeries, psi0, indices, frame="rotating"):
    """psi_ref at the given integration-grid indices, shape (len(indices), d)"""
    _check_frame(frame)
    indices = np.asarray(indices)
    if frame == "lab":
        return np.tile(psi0, (indices.size, 1))
    phase = system_energies(coeffs.model, coeffs.detuning_integral()[2 * indices])
    return psi0[None, :] * np.exp(-1j * phase)


def propagate_trajectory(model: ModelSpec, coeffs: CoefficientSeries, noise: NoisePath, psi0):
    """
    RK4 integration of d/dt psi = -i H_eff psi with H_eff assembled from the
    cached coefficients and the noise sample at each stage time.
    """
    if not noise.grid.same_as(coeffs.fine_grid):
        raise ValueError("noise must be sampled on the half-step grid of the integration grid")
    psi0 = np.asarray(psi0, dtype=complex)
    values = coeffs.values
    samples = noise.samples
    detuning = coeffs.detuning

    def rhs(t, psi, step, stage):
        j = fine_index(step, stage)
        H = effective_hamiltonian(model, values[j], samples[j], detuning[step])
        return -1j * (H @ psi)

    series = rk4_integrate(rhs, psi0, coeffs.grid)
    return Trajectory(coeffs.grid, series.values, noise.seed)


def fidelity_of(trajectory: Trajectory, coeffs: CoefficientSeries, psi0, frame="rotating"):
    """|<psi_ref(t)|psi_t>|^2 along one trajectory"""
    indices = np.arange(trajectory.grid.size)
    ref = reference_states(coeffs, np.asarray(psi0, dtype=complex), indices, frame)
    return np.abs(np.sum(np.conj(ref) * trajectory.psi, axis=-1)) ** 2


def two_level_components(coeffs: CoefficientSeries, noise: NoisePath):
    """
    Closed-form (P, Q) amplitudes of the two-level model for psi_0 = (|0>+|1>)/sqrt(2)
    on the integration grid, by quadrature of the noise path.
    """
    if coeffs.model.family is not Family.TWO_LEVEL:
        raise ValueError("two_level_amplitude applies to the two-level model only")
    if not noise.grid.same_as(coeffs.fine_grid):
        raise ValueError("noise must be sampled on the half-step grid of the integration grid")
    phases = system_energies(coeffs.model, coeffs.detuning_integral())
    int_E0, int_E1 = phases[:, 0], phases[:, 1]
    int_F = coeffs.coefficient_integral()[:, 0]
    int_E1p = int_E1 - 1j * int_F
    integrand = noise.samples * np.exp(-1j * (int_E1p - int_E0))
    driven = cumulative_simpson(ComplexSeries(coeffs.fine_grid, integrand)).values
    amp = 1.0 / np.sqrt(2.0)
    P = amp * np.exp(-1j * int_E0) * (1.0 + driven)
    Q = amp * np.exp(-1j * int_E1p)
    return P[0::2], Q[0::2]


def two_level_amplitude(coeffs: CoefficientSeries, noise: NoisePath, frame="rotating"):
    """<psi_ref(t)|psi_t> of the two-level model from the exact stochastic amplitude formula"""
    P, Q = two_level_components(coeffs, noise)
    psi = np.stack([P, Q], axis=-1)
    psi0 = default_initial_state(coeffs.model)
    ref = reference_states(coeffs, psi0, np.arange(coeffs.grid.size), frame)
    return ComplexSeries(coeffs.grid, np.sum(np.conj(ref) * psi, axis=-1))


def _run_chunk(model, coeffs, psi0, seeds, out_idx, reference, p_vector, guard, variance_scale=1.0):
    """
    Propagate a batch of trajectories and record observables at out_idx.
    The norm guard is checked at every grid point, not only at out_idx.
    """
    noise = sample_paths(coeffs.corr, coeffs.fine_grid, seeds, variance_scale)
    values = coeffs.values
    detuning = coeffs.detuning
    batch = len(seeds)
    slot = {int(k): n for n, k in enumerate(out_idx)}
    fidelity = np.zeros((batch, len(out_idx)))
    norm2 = np.zeros((batch, len(out_idx)))
    population = np.zeros((batch, len(out_idx)))
    peak = np.zeros(batch)

    def rhs(t, psi, step, stage):
        j = fine_index(step, stage)
        return -1j * apply_effective_hamiltonian(model, values[j], noise[:, j], detuning[step], psi)

    def observer(k, psi):
        current = np.sum(np.abs(psi) ** 2, axis=-1)
        np.fmax(peak, np.where(np.isnan(current), np.inf, current), out=peak)
        n = slot.get(k)
        if n is None:
            return
        fidelity[:, n] = np.abs(psi @ np.conj(reference[n])) ** 2
        norm2[:, n] = current
        population[:, n] = np.abs(psi @ np.conj(p_vector)) ** 2

    psi_init = np.tile(psi0, (batch, 1))
    with np.errstate(over='ignore', invalid='ignore'):
        rk4_integrate(rhs, psi_init, coeffs.grid, observer=observer, store=False, check_finite=False)
    divergent = ~(np.isfinite(peak) & (peak <= guard ** 2))
    return fidelity, norm2, population, divergent


def output_indices(grid: TimeGrid, sample_every=None):
    """Grid indices written to result tables"""
    if sample_every is None:
        sample_every = max(1, grid.n_steps // config.DEFAULT_OUTPUT_ROWS)
    return grid.sample_indices(sample_every)


def ensemble_fidelity(model: ModelSpec, coeffs: CoefficientSeries, n_traj, master_seed,
                      psi0=None, frame="rotating", sample_every=None, threads=None,
                      guard=None, p_basis=None):
    """
    Monte-Carlo fidelity M[|<psi_ref|psi_t>|^2] over n_traj trajectories.
    Trajectory i uses seed mix_seed(master_seed, i). Trajectories whose norm
    exceeds `guard` are excluded and counted; the curve is marked failed when
    more than config.DIVERGENT_FRACTION_LIMIT of them diverge.
    """
    logger = get_logger()
    if n_traj < 2:
        raise ValueError(f"an ensemble needs at least 2 trajectories, got {n_traj}")
    _check_frame(frame)
    psi0 = _normalised(psi0, model)
    guard = config.DIVERGENCE_GUARD if guard is None else guard
    threads = config.DEFAULT_THREADS if threads is None else max(1, int(threads))
    if p_basis is None:
        p_vector = np.zeros(model.dimension, dtype=complex)
        p_vector[0] = 1.0
    else:
        p_vector = np.asarray(p_basis, dtype=complex)
        p_vector = p_vector / np.linalg.norm(p_vector)

    out_idx = output_indices(coeffs.grid, sample_every)
    reference = reference_states(coeffs, psi0, out_idx, frame)
    seeds = [mix_seed(master_seed, i) for i in range(n_traj)]
    chunks = [seeds[i:i + config.CHUNK_SIZE] for i in range(0, n_traj, config.CHUNK_SIZE)]
    logger.info(f"Propagating {n_traj} trajectories ({model.family.value}, d={model.dimension}) "
                f"in {len(chunks)} chunks on {threads} worker(s)")

    tasks = (delayed(_run_chunk)(model, coeffs, psi0, chunk, out_idx, reference, p_vector, guard,
                                 bath.NOISE_VARIANCE_SCALE)
             for chunk in tqdm(chunks, desc="trajectories", disable=not config.VERBOSE))
    results = Parallel(n_jobs=threads)(tasks)

    fidelity = np.concatenate([r[0] for r in results])
    norm2 = np.concatenate([r[1] for r in results])
    population = np.concatenate([r[2] for r in results])
    divergent = np.concatenate([r[3] for r in results])
    keep = ~divergent
    n_divergent = int(divergent.sum())
    if n_divergent:
        logger.warning(f"WARNING: {n_divergent}/{n_traj} trajectories exceeded the norm guard "
                       f"{guard:.1e} and were excluded")
    if keep.sum() < 2:
        raise ValueError("fewer than 2 trajectories survived the divergence guard")

    mean, stderr = mean_and_stderr(fidelity[keep])
    norm_mean, norm_stderr = mean_and_stderr(norm2[keep])
    pop_mean, pop_stderr = mean_and_stderr(population[keep])
    curve = FidelityCurve(coeffs.grid.subgrid(out_idx), mean, stderr, int(keep.sum()),
                          divergent=n_divergent, norm_mean=norm_mean, norm_stderr=norm_stderr,
                          population_mean=pop_mean, population_stderr=pop_stderr,
                          label=f"{model.family.value} MC")
    if curve.failed:
        logger.error(f"ERROR: divergent fraction {curve.divergent_fraction:.2%} exceeds "
                     f"{config.DIVERGENT_FRACTION_LIMIT:.0%}")
    return curve


def ensemble_norm(model: ModelSpec, coeffs: CoefficientSeries, n_traj, master_seed, **kwargs):
    """Mean squared norm M[||psi_t||^2] with standard error (1 for the linear equation)"""
    curve = ensemble_fidelity(model, coeffs, n_traj, master_seed, **kwargs)
    return curve.grid, curve.norm_mean, curve.norm_stderr


def ensemble_p_population(model: ModelSpec, coeffs: CoefficientSeries, n_traj, master_seed,
                          p_basis=None, **kwargs):
    """M[|<p|psi_t>|^2], the survival probability of the P component"""
    curve = ensemble_fidelity(model, coeffs, n_traj, master_seed, p_basis=p_basis, **kwargs)
    return curve.grid, curve.population_mean, curve.population_stderr
