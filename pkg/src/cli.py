"""
Command-line interface for the tower control toolkit.
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from src.errors import ConfigError, NumericalError
from src.experiments.config import RunConfig, load_config
from src.main import TowerPipeline
from src.optimization.admm_qp import solve
from src.optimization.qp_io import format_solution, read_qp

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def setup_logging(verbose: bool = False, log_file: Optional[str] = None):
    """Setup logging configuration.

    Args:
        verbose: Whether to use DEBUG level logging
        log_file: Optional file that receives the same records
    """
    fmt = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=fmt, force=True)
    if log_file:
        handler = logging.FileHandler(log_file)
        handler.setFormatter(logging.Formatter(fmt))
        logging.getLogger().addHandler(handler)


def _config(args) -> RunConfig:
    config = load_config(getattr(args, "config", None))
    return config.with_overrides(
        seed=getattr(args, "seed", None),
        output_dir=getattr(args, "out", None),
        controller=getattr(args, "controller", None),
    )


def collect_data(args, config: RunConfig):
    pipeline = TowerPipeline(config)
    trajectories = pipeline.collect()
    logger.info(f"Wrote {len(trajectories)} trajectories to {config.training_dir}")


def identify_predictor(args, config: RunConfig):
    pipeline = TowerPipeline(config)
    predictor = pipeline.identify()
    logger.info(f"Predictor with N={predictor.N} saved to {config.predictor_path}")


def design_controller(args, config: RunConfig):
    pipeline = TowerPipeline(config)
    design = pipeline.design_lqr()
    logger.info(f"LQR gain saved to {config.predictor_path} "
                f"(closed-loop spectral radius {design.spectral_radius:.5f})")


def run_scenarios(args, config: RunConfig):
    scenarios = [s.strip() for s in args.scenario.split(",")] if args.scenario else None
    if scenarios == ["collect"] or (scenarios is None and config.scenario.name == "collect"):
        collect_data(args, config)
        return
    pipeline = TowerPipeline(config)
    results = pipeline.run(scenarios)
    pipeline.write_monitor_summary()
    for name, result in results.items():
        m = result.metrics
        print(f"{name}: settling_time={m['settling_time']:.3f}s peak_abs_phi={m['peak_abs_phi']:.4f} "
              f"rms_error={m['rms_error']:.5f} control_effort={m['control_effort']:.5f}")


def evaluate_predictor(args, config: RunConfig):
    pipeline = TowerPipeline(config)
    evaluation = pipeline.evaluate(horizon=args.horizon)
    for k in sorted({1, evaluation.horizon // 2 or 1, evaluation.horizon}):
        print(f"step {k}: predictor {evaluation.predictor[k - 1]:.4f} "
              f"baseline {evaluation.baseline[k - 1]:.4f}")


def solve_qp_file(args, config: RunConfig):
    problem = read_qp(args.file)
    solution = solve(problem, eps_abs=args.eps_abs, eps_rel=args.eps_rel, max_iter=args.max_iter)
    sys.stdout.write(format_solution(solution))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=argparse.SUPPRESS, help='Path to config file')
    common.add_argument('--out', default=argparse.SUPPRESS, help='Output directory')
    common.add_argument('--seed', type=int, default=argparse.SUPPRESS, help='Random seed')
    common.add_argument('--verbose', action='store_true', default=argparse.SUPPRESS,
                        help='Enable verbose logging')
    common.add_argument('--log-file', default=argparse.SUPPRESS, help='Also log to this file')

    parser = argparse.ArgumentParser(description="Voxel tower Koopman control toolkit",
                                     parents=[common])
    subparsers = parser.add_subparsers(dest='command')

    subparsers.add_parser('collect', parents=[common],
                          help='Generate open-loop training trajectories')
    subparsers.add_parser('identify', parents=[common],
                          help='Fit the lifted predictor from the training trajectories')
    subparsers.add_parser('design-lqr', parents=[common],
                          help='Design the LQR gain for the stored predictor')

    run_parser = subparsers.add_parser('run', parents=[common], help='Run closed-loop scenarios')
    run_parser.add_argument('--scenario', help='Scenario name or comma-separated list')
    run_parser.add_argument('--controller', choices=['lqr', 'kmpc', 'none'],
                            help='Controller (overrides the config)')

    eval_parser = subparsers.add_parser('eval-predictor', parents=[common],
                                        help='Multi-step prediction error on held-out data')
    eval_parser.add_argument('--horizon', type=int, help='Prediction horizon in samples')

    qp_parser = subparsers.add_parser('solve-qp', parents=[common],
                                      help='Solve a QP given in the text format (debugging)')
    qp_parser.add_argument('file', help='QP text file')
    qp_parser.add_argument('--eps-abs', type=float, default=1e-6, help='Absolute tolerance')
    qp_parser.add_argument('--eps-rel', type=float, default=1e-6, help='Relative tolerance')
    qp_parser.add_argument('--max-iter', type=int, default=4000, help='Iteration limit')
    return parser


COMMANDS = {
    'collect': collect_data,
    'identify': identify_predictor,
    'design-lqr': design_controller,
    'run': run_scenarios,
    'eval-predictor': evaluate_predictor,
    'solve-qp': solve_qp_file,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entrypoint; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(getattr(args, 'verbose', False), getattr(args, 'log_file', None))

    if args.command not in COMMANDS:
        parser.print_help()
        return EXIT_CONFIG

    try:
        config = _config(args)
        COMMANDS[args.command](args, config)
    except (ConfigError, FileNotFoundError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
