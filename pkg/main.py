"""
ETLServo - Main entry point

    python main.py run scenarios/servo_etl.json --policy etl --seed 3 --out results/run
    python main.py compare scenarios/servo_etl.json --seeds 20 --jobs 4
    python main.py montecarlo scenarios/servo_no_change.json --runs 5000 --alpha 0.05
"""
import argparse
import sys
from typing import List, Optional
from src.cli.commands import EXIT_USAGE, cmd_compare, cmd_montecarlo, cmd_run
from src.config.config import load_config
from src.config.scenario import Policy
from src.utils.logger import setup_logger

class EtlArgumentParser(argparse.ArgumentParser):
    """Argument parser exiting with the usage error code"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")

def positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return number

def nonnegative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {value}")
    return number

def level(value: str) -> float:
    number = float(value)
    if not 0.0 < number < 1.0:
        raise argparse.ArgumentTypeError(f"expected a level in (0, 1), got {value}")
    return number

def build_parser() -> argparse.ArgumentParser:
    parser = EtlArgumentParser(
        prog="etlservo",
        description="Event-triggered learning for a DC servomechanism under MPC",
    )
    parser.add_argument("--log-file", help="Log file (default: ETL_LOG_FILE)")
    parser.add_argument("--log-level", help="Log level (default: ETL_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=EtlArgumentParser)

    run = subparsers.add_parser("run", help="Run one scenario")
    run.add_argument("scenario", help="Scenario JSON file")
    run.add_argument("--policy", choices=[p.value for p in Policy], help="Override the scenario policy")
    run.add_argument("--seed", type=nonnegative_int, help="Override the scenario seed")
    run.add_argument("--out", help="Output directory (default: ETL_OUTPUT_DIR)")

    compare = subparsers.add_parser("compare", help="Compare the three policies on paired seeds")
    compare.add_argument("scenario", help="Scenario JSON file")
    compare.add_argument("--seeds", type=positive_int, default=20, help="Number of paired seeds")
    compare.add_argument("--out", help="Output directory (default: ETL_OUTPUT_DIR)")
    compare.add_argument("--jobs", type=positive_int, help="Worker processes (default: ETL_JOBS)")

    montecarlo = subparsers.add_parser("montecarlo", help="False-positive rate of the trigger with a perfect model")
    montecarlo.add_argument("scenario", help="Scenario JSON file without load changes")
    montecarlo.add_argument("--runs", type=positive_int, default=5000, help="Number of runs")
    montecarlo.add_argument("--alpha", type=level, help="Override the trigger level")
    montecarlo.add_argument("--eval-step", type=nonnegative_int, help="Step at which the rate is read")
    montecarlo.add_argument("--out", help="Output directory (default: ETL_OUTPUT_DIR)")
    montecarlo.add_argument("--jobs", type=positive_int, help="Worker processes (default: ETL_JOBS)")
    return parser

def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    args = build_parser().parse_args(argv)

    try:
        config = load_config()
        logger = setup_logger(
            log_file=args.log_file or config.logging.log_file,
            level=args.log_level or config.logging.level,
        )
    except ValueError as e:
        print(f"etlservo: configuration error: {str(e)}", file=sys.stderr)
        return EXIT_USAGE
    logger.info(f"Starting ETLServo: {args.command} {args.scenario}")

    out = args.out or config.run.output_dir
    if args.command == "run":
        return cmd_run(args.scenario, policy=args.policy, seed=args.seed, out=out)
    jobs = args.jobs or config.run.jobs
    if args.command == "compare":
        return cmd_compare(args.scenario, seeds=args.seeds, out=out, jobs=jobs)
    return cmd_montecarlo(
        args.scenario, runs=args.runs, alpha=args.alpha, out=out, jobs=jobs, eval_step=args.eval_step
    )

if __name__ == "__main__":
    sys.exit(main())
