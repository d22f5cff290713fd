import argparse
import sys
import traceback
from datetime import datetime

import config
import noise
from errors import ConfigError, GridError, IntegrationError, StatisticalQualityError
from experiment import run_experiment, sweep
from logger import setup_logger
from run_config import SWEEP_AXES, load_config
from validation import run_validation

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_STATISTICS = 3

# Global logger instance (will be initialized in main())
logger = None


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pqdiffusion",
        description="Non-Markovian QSD trajectories, PQ partitioning and pulse-controlled fidelity")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker processes for trajectory ensembles (default {config.DEFAULT_THREADS})")
    parser.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    parser.add_argument("--verbose", action="store_true", help="debug logging and progress bars")
    parser.add_argument("--inject-noise-scale", type=float, default=None,
                        help="scale the variance of the noise innovation (fault injection for validate)")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one configuration")
    run.add_argument("config", help="path to a .cfg file")

    sweep_cmd = commands.add_parser("sweep", help="run a parameter sweep")
    sweep_cmd.add_argument("config", help="path to a .cfg file")
    sweep_cmd.add_argument("--axis", choices=SWEEP_AXES, default=None,
                           help="axis to sweep (default: the [sweep] section of the config)")
    sweep_cmd.add_argument("--values", type=float, nargs="+", default=None, help="values of the axis")

    validate = commands.add_parser("validate", help="run the self-checks for a configuration")
    validate.add_argument("config", help="path to a .cfg file")
    return parser


def command_run(args, cfg):
    outcome = run_experiment(cfg, threads=args.threads, out_dir=args.out)
    logger.info(f"STATUS: {cfg.output.label} - SUCCESS")
    logger.info(f"   Table: {outcome.csv_path}")
    return EXIT_OK


def command_sweep(args, cfg):
    if args.axis is not None:
        if not args.values:
            raise ConfigError(f"sweep: --axis {args.axis} needs --values")
        axes = {args.axis: args.values}
    else:
        axes = cfg.sweep.axes()
    summary, failed = sweep(cfg, axes, threads=args.threads, out_dir=args.out)
    logger.info(f"Completed sweep points: {len(summary)}")
    if failed:
        logger.info(f"Failed sweep points: {len(failed)}")
        logger.info(f"   Labels: {', '.join(failed)}")
        return EXIT_STATISTICS
    return EXIT_OK


def command_validate(args, cfg):
    report = run_validation(cfg)
    logger.info("")
    for line in report.lines():
        logger.info(line)
    if not report.passed:
        names = ", ".join(c.name for c in report.failures)
        logger.error(f"ERROR: validation failed: {names}")
        return EXIT_VALIDATION
    return EXIT_OK


COMMANDS = {"run": command_run, "sweep": command_sweep, "validate": command_validate}


def main(argv=None):
    """Parse arguments, dispatch the command and map errors to exit codes"""
    global logger
    args = build_parser().parse_args(argv)

    logger_instance, log_file_path = setup_logger(verbose=args.verbose or None)
    logger = logger_instance
    previous_verbose = config.VERBOSE
    if args.verbose:
        config.VERBOSE = True

    start_time = datetime.now().strftime('%Y-%m-%d %H:%M:%S')
    logger.info("=" * 80)
    logger.info(f"PQ Diffusion - {args.command}")
    logger.info("=" * 80)
    logger.info(f"STARTING TIME: {start_time}")
    logger.info(f"Log file: {log_file_path}")
    logger.info("")

    previous_scale = noise.NOISE_VARIANCE_SCALE
    if args.inject_noise_scale is not None:
        logger.warning(f"WARNING: noise innovation variance scaled by {args.inject_noise_scale} (fault injection)")
        noise.NOISE_VARIANCE_SCALE = args.inject_noise_scale

    try:
        cfg = load_config(args.config)
        code = COMMANDS[args.command](args, cfg)
    except (ConfigError, GridError) as e:
        for line in str(e).splitlines():
            logger.error(f"ERROR: {line}")
        code = EXIT_CONFIG
    except (StatisticalQualityError, IntegrationError) as e:
        logger.error(f"ERROR: {e}")
        code = EXIT_STATISTICS
    except Exception as e:
        logger.error(f"ERROR: unexpected {type(e).__name__}: {e}")
        logger.debug(traceback.format_exc())
        code = EXIT_VALIDATION
    finally:
        noise.NOISE_VARIANCE_SCALE = previous_scale
        config.VERBOSE = previous_verbose

    end_time = datetime.now().strftime('%Y-%m-%d %H:%M:%S')
    logger.info("")
    logger.info("=" * 80)
    logger.info("FINAL SUMMARY")
    logger.info("=" * 80)
    logger.info(f"Start Time: {start_time}")
    logger.info(f"End Time: {end_time}")
    logger.info(f"Exit code: {code}")
    logger.info("=" * 80)
    return code


if __name__ == "__main__":
    sys.exit(main())
