"""
Experiment pipeline: coefficients -> Monte-Carlo ensemble -> analytic
curve -> result table, plot script and sweep summary on disk.
"""
import itertools
import os
from dataclasses import dataclass

from pydantic import ValidationError

import analytic
import config
from errors import ConfigError, StatisticalQualityError
from logger import banner, get_logger
from models import Family, solve_coefficients
from noise import mix_seed
from qsd import ensemble_fidelity
from results import build_table, table_path, write_plot_script, write_sweep_summary
from run_config import SWEEP_AXES, RunConfig

# master seeds stay within the signed 64-bit range of TOML integers
SEED_MASK = (1 << 63) - 1


@dataclass
class RunOutcome:
    table: object
    csv_path: str
    plot_path: str
    failed: bool


def _analytic_curve(cfg: RunConfig, coeffs):
    """Closed-form curve when it applies to this run, else None"""
    logger = get_logger()
    if not cfg.analytic.enabled:
        return None
    if cfg.run.initial_state is not None or cfg.run.frame != "rotating":
        logger.warning("WARNING: analytic fidelity assumes the equal-superposition initial state "
                       "in the rotating frame; column left empty")
        return None
    if cfg.analytic.weak_coupling and coeffs.model.family is Family.QUTRIT:
        logger.warning("WARNING: no weak-coupling formula for the qutrit; using the full formula")
        return analytic.evaluate(coeffs, cfg.analytic.coarsen)
    return analytic.evaluate(coeffs, cfg.analytic.coarsen, weak_coupling=cfg.analytic.weak_coupling)


def run_experiment(cfg: RunConfig, threads=None, out_dir=None):
    """
    Run one configuration and write <label>.csv and <label>.gp.

    Returns:
        RunOutcome

    Raises:
        StatisticalQualityError: more than the allowed fraction of trajectories
            diverged (the table is written first, flagged in its header)
    """
    logger = get_logger()
    model = cfg.model_spec()
    corr = cfg.correlation_spec()
    train = cfg.pulse_train()
    grid = cfg.grid()
    out_dir = out_dir or cfg.output_directory()

    banner(logger, f"Run: {cfg.output.label}")
    logger.info(f"Model: {model.family.value} (d={model.dimension}), omega={model.omega}, "
                f"Gamma={corr.Gamma}, gamma={corr.gamma}")
    if train.enabled:
        logger.info(f"Pulses: tau={train.tau}, delta={train.delta}, psi={train.psi}")
    logger.info(f"Grid: t_end={grid.t_end}, {grid.n_steps} steps (dt <= {grid.dt_nominal})")

    coeffs = solve_coefficients(model, corr, train, grid)
    logger.info("Coefficient equations solved.")

    curve = ensemble_fidelity(model, coeffs, cfg.run.n_traj, cfg.run.master_seed,
                              psi0=cfg.initial_state(), frame=cfg.run.frame,
                              sample_every=cfg.run.sample_every, threads=threads,
                              p_basis=cfg.p_basis())
    exact = _analytic_curve(cfg, coeffs)

    table = build_table(cfg, curve, exact)
    csv_path = table.write(table_path(out_dir, cfg.output.label))
    plot_path = write_plot_script(csv_path)
    logger.info(f"Result table written: {csv_path}")
    logger.info(f"Plot script written: {plot_path}")
    logger.info(f"Final fidelity: {curve.mean[-1]:.6f} +/- {curve.stderr[-1]:.6f} at t = {grid.t_end:g}")

    if curve.failed:
        raise StatisticalQualityError(curve.divergent, curve.divergent + curve.n_traj,
                                      config.DIVERGENT_FRACTION_LIMIT)
    return RunOutcome(table, csv_path, plot_path, curve.failed)


def sweep_points(cfg: RunConfig, axes):
    """
    Configurations of a sweep: the product of all axis values, each with its
    own master seed and label.

    Args:
        axes: {axis name: list of values}

    Returns:
        list of ({axis: value}, RunConfig)
    """
    if not axes:
        raise ConfigError("sweep: no axis given (use --axis/--values or a [sweep] section)")
    for name, values in axes.items():
        if name not in SWEEP_AXES:
            raise ConfigError(f"sweep: unknown axis {name!r}; expected one of {', '.join(SWEEP_AXES)}")
        if not values:
            raise ConfigError(f"sweep.{name}: empty list of values")
    if "N" in axes and cfg.model.family is not Family.MULTI_LEVEL:
        raise ConfigError("sweep.N: the N axis needs model.family = \"multi_level\"")
    for name in ("tau_over_delta", "psi"):
        if name in axes and not cfg.pulse.enabled:
            raise ConfigError(f"sweep.{name}: the {name} axis needs pulse.enabled = true")

    names = list(axes)
    points = []
    for index, combo in enumerate(itertools.product(*(axes[n] for n in names))):
        point = cfg
        for name, value in zip(names, combo):
            point = point.with_value(name, value)
        suffix = "_".join(f"{name}{value:g}" for name, value in zip(names, combo))
        seed = mix_seed(cfg.run.master_seed, index) & SEED_MASK
        data = point.model_dump()
        data["run"]["master_seed"] = seed
        data["output"]["label"] = f"{cfg.output.label}_{suffix}"
        data.pop("sweep", None)
        try:
            point = RunConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError([f"sweep point {suffix}: {err['msg']}" for err in e.errors()]) from e
        points.append((dict(zip(names, combo)), point))
    return points


def sweep(cfg: RunConfig, axes, threads=None, out_dir=None):
    """
    Run every sweep point and write <label>_summary.csv.

    Returns:
        (summary DataFrame, list of failed point labels)
    """
    logger = get_logger()
    out_dir = out_dir or cfg.output_directory()
    points = sweep_points(cfg, axes)
    logger.info(f"Sweep over {', '.join(axes)}: {len(points)} points")

    rows = []
    failed = []
    for i, (values, point) in enumerate(points, 1):
        logger.info("")
        logger.info(f"Sweep point {i}/{len(points)}: {values}")
        try:
            outcome = run_experiment(point, threads=threads, out_dir=out_dir)
        except StatisticalQualityError as e:
            logger.error(f"ERROR: {e}")
            failed.append(point.output.label)
            continue
        rows.append((values, outcome.table, outcome.csv_path))
        logger.info("-" * 80)

    summary_path = os.path.join(out_dir, f"{cfg.output.label}_summary.csv")
    summary = write_sweep_summary(rows, summary_path, cfg.run.checkpoints or None)
    return summary, failed
