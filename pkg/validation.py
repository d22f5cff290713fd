"""
Self-checks run by `main.py validate`: each check rebuilds a small problem
from the run configuration and compares two independent computations.
"""
from dataclasses import dataclass
from typing import List

import numpy as np

from analytic import fidelity_multilevel, fidelity_two_level
from control import PulseTrain, aligned_grid
from logger import get_logger
from models import ModelSpec, default_initial_state, solve_coefficients
from noise import (CorrelationSpec, NoisePath, correlation_from_samples, mix_seed, sample_path,
                   sample_paths)
from numerics import TimeGrid
from pq import block_series, closed_form_propagator, propagator, solve_p
from qsd import propagate_trajectory, reference_states, two_level_amplitude
from run_config import RunConfig

PATHWISE_TOLERANCE = 1e-4
REDUCTION_TOLERANCE = 1e-10
PROPAGATOR_TOLERANCE = 1e-8
NOISE_PATHS = 4000
NOISE_SIGMAS = 5.0
CHECK_HORIZON = 2.0


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass
class ValidationReport:
    checks: List[CheckResult]

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def failures(self):
        return [c for c in self.checks if not c.passed]

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in self.checks]


def _horizon(cfg: RunConfig):
    return min(cfg.run.t_end, CHECK_HORIZON)


def _check_seed(cfg: RunConfig, salt):
    return mix_seed(cfg.run.master_seed, salt)


def check_noise_correlation(cfg: RunConfig):
    """Ensemble M[z_t z*_s] and M[z_t z_s] against the target correlation"""
    corr = cfg.correlation_spec()
    if corr.Gamma == 0:
        corr = CorrelationSpec(1.0, corr.gamma)
    t_end = max(CHECK_HORIZON, 3.0 / corr.gamma)
    grid = TimeGrid.uniform(t_end, t_end / 40)
    seeds = [mix_seed(cfg.run.master_seed, 10_000 + i) for i in range(NOISE_PATHS)]
    samples = sample_paths(corr, grid, seeds)
    worst = 0.0
    last = grid.size - 1
    for i, j in ((0, 0), (last, last), (last, last // 2), (last, 0), (last // 2, 0)):
        target = corr.alpha(grid.points[i], grid.points[j])
        estimate, stderr = correlation_from_samples(samples, i, j)
        worst = max(worst, abs(estimate - target) / max(stderr, 1e-12))
        vanishing, stderr0 = correlation_from_samples(samples, i, j, conjugate=False)
        worst = max(worst, abs(vanishing) / max(stderr0, 1e-12))
    passed = worst <= NOISE_SIGMAS
    return CheckResult("noise correlation", passed,
                       f"largest deviation {worst:.2f} sigma over {NOISE_PATHS} paths (limit {NOISE_SIGMAS:g})")


def check_two_level_amplitude(cfg: RunConfig):
    """
    RK4 trajectory against the closed-form two-level amplitude on one noise
    path, plus a step-doubling estimate of the RK4 error at run.dt.
    """
    dt = cfg.run.dt
    corr = cfg.correlation_spec()
    model = ModelSpec.two_level(cfg.model.omega)
    psi0 = default_initial_state(model)

    grid = aligned_grid(cfg.pulse_train(), _horizon(cfg), dt)
    coeffs = solve_coefficients(model, corr, cfg.pulse_train(), grid)
    path = sample_path(corr, coeffs.fine_grid, _check_seed(cfg, 1))
    trajectory = propagate_trajectory(model, coeffs, path, psi0)
    ref = reference_states(coeffs, psi0, np.arange(grid.size))
    overlap = np.sum(np.conj(ref) * trajectory.psi, axis=-1)
    oracle = two_level_amplitude(coeffs, path).values
    quadrature_gap = float(np.max(np.abs(overlap - oracle)))

    steps = 2 * max(1, int(np.ceil(_horizon(cfg) / (2 * dt))))
    free = PulseTrain.disabled()
    fine = TimeGrid.uniform(steps * dt, dt)
    coarse = TimeGrid(fine.points[0::2], 2 * dt)
    coeffs_fine = solve_coefficients(model, corr, free, fine)
    coeffs_coarse = solve_coefficients(model, corr, free, coarse)
    path_fine = sample_path(corr, coeffs_fine.fine_grid, _check_seed(cfg, 2))
    path_coarse = NoisePath(coeffs_coarse.fine_grid, path_fine.samples[0::2], path_fine.seed)
    psi_fine = propagate_trajectory(model, coeffs_fine, path_fine, psi0).psi[0::2]
    psi_coarse = propagate_trajectory(model, coeffs_coarse, path_coarse, psi0).psi
    doubling = float(np.max(np.abs(psi_fine - psi_coarse))) / 15.0

    error = max(quadrature_gap, doubling)
    passed = error <= PATHWISE_TOLERANCE
    detail = f"|RK4 - closed form| = {quadrature_gap:.2e}, step-doubling estimate {doubling:.2e}"
    if not passed:
        detail += f"; exceeds {PATHWISE_TOLERANCE:g}: reduce run.dt (currently {dt:g}) to resolve the noise"
    return CheckResult("two-level amplitude oracle", passed, detail)


def check_pq_equivalence(cfg: RunConfig):
    """P amplitude from the closed PQ equation against the full qutrit trajectory"""
    model = ModelSpec.qutrit(cfg.model.omega)
    corr = cfg.correlation_spec()
    grid = aligned_grid(cfg.pulse_train(), _horizon(cfg), cfg.run.dt)
    coeffs = solve_coefficients(model, corr, cfg.pulse_train(), grid)
    path = sample_path(corr, coeffs.fine_grid, _check_seed(cfg, 3))
    psi0 = default_initial_state(model)
    trajectory = propagate_trajectory(model, coeffs, path, psi0)
    blocks = block_series(model, coeffs, path)
    P0, Q0 = blocks.split_state(psi0)
    P = solve_p(blocks, P0, Q0).values
    full = trajectory.psi @ np.conj(blocks.p_basis)
    gap = float(np.max(np.abs(P - full)))
    return CheckResult("PQ equivalence (qutrit)", gap <= PATHWISE_TOLERANCE,
                       f"max |P - <p|psi>| = {gap:.2e} (limit {PATHWISE_TOLERANCE:g})")


def check_single_level_reduction(cfg: RunConfig):
    """Multi-level fidelity with N = 1 against the two-level fidelity at doubled detuning"""
    corr = cfg.correlation_spec()
    p = cfg.pulse
    train = PulseTrain(p.tau, p.delta, p.psi, p.enabled)
    doubled = PulseTrain(p.tau, p.delta, 2.0 * p.psi, p.enabled)
    grid = aligned_grid(train, _horizon(cfg), cfg.run.dt)
    multi = fidelity_multilevel(solve_coefficients(ModelSpec.multi_level(cfg.model.omega, 1), corr, train, grid))
    two = fidelity_two_level(solve_coefficients(ModelSpec.two_level(2.0 * cfg.model.omega), corr, doubled, grid))
    gap = float(np.max(np.abs(multi.mean - two.mean)))
    return CheckResult("N = 1 reduction", gap <= REDUCTION_TOLERANCE,
                       f"max difference {gap:.2e} (limit {REDUCTION_TOLERANCE:g})")


def check_propagator_closed_form(cfg: RunConfig, N=5):
    """Stepped time-ordered propagator against the multi-level closed form"""
    model = ModelSpec.multi_level(cfg.model.omega, N)
    corr = cfg.correlation_spec()
    train = cfg.pulse_train()
    grid = aligned_grid(train, _horizon(cfg), cfg.run.dt)
    coeffs = solve_coefficients(model, corr, train, grid)
    path = sample_path(corr, coeffs.fine_grid, _check_seed(cfg, 4))
    blocks = block_series(model, coeffs, path)
    stepped = propagator(blocks, grid.t_start, grid.t_end, method="stepped")
    closed = closed_form_propagator(coeffs, grid.t_start, grid.t_end)
    gap = float(np.max(np.abs(stepped - closed)))
    return CheckResult(f"propagator closed form (N = {N})", gap <= PROPAGATOR_TOLERANCE,
                       f"max entry difference {gap:.2e} (limit {PROPAGATOR_TOLERANCE:g})")


CHECKS = (
    check_noise_correlation,
    check_two_level_amplitude,
    check_pq_equivalence,
    check_single_level_reduction,
    check_propagator_closed_form,
)


def run_validation(cfg: RunConfig):
    """Run every check; a check that raises is reported as failed"""
    logger = get_logger()
    results = []
    for check in CHECKS:
        name = check.__name__.removeprefix("check_").replace("_", " ")
        logger.info(f"Running check: {name}")
        try:
            result = check(cfg)
        except Exception as e:
            result = CheckResult(name, False, f"{type(e).__name__}: {e}")
        logger.info(f"  {'PASS' if result.passed else 'FAIL'}: {result.detail}")
        results.append(result)
    return ValidationReport(results)
