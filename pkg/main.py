"""This module is the main entry point for the DryMate drier control toolkit."""

import os
import sys
import argparse
import time

from handlers.logger_handler import Logger
from handlers.config_handler import ConfigHandler, load_scenario
from handlers.errors import DryMateError

from scenarios.runner import run_batch, run_scenario, validate_scenario


class WideFormatter(argparse.HelpFormatter):
    """Extend to 120 columns"""
    def __init__(self, *args, **kwargs):
        super().__init__(*args, max_help_position=120, **kwargs)


def parse_args(argv=None):
    """Parse and return command line arguments."""
    parser = argparse.ArgumentParser(description="Optimal control of conveyor driers",
                                     formatter_class=WideFormatter)
    parser.add_argument("-d", "--debug", action="store_true",
                        help="Set log level to DEBUG")
    parser.add_argument("-q", "--quiet", action="store_true",
                        help="Only print warnings and errors")
    parser.add_argument("-c", "--config", default="configuration.ini",
                        help="Specify a global configuration file")
    parser.add_argument("--out",
                        help="Output directory (a parent directory for batch runs)")
    parser.add_argument("--max-iters", type=int,
                        help="Override the optimizer iteration budget")

    commands = parser.add_subparsers(dest="command")
    run = commands.add_parser("run", help="Run a scenario file", formatter_class=WideFormatter)
    run.add_argument("scenario", help="Scenario INI file")
    validate = commands.add_parser("validate", help="Check a scenario file without running it",
                                   formatter_class=WideFormatter)
    validate.add_argument("scenario", help="Scenario INI file")
    batch = commands.add_parser("batch", help="Run every scenario file of a directory in parallel",
                                formatter_class=WideFormatter)
    batch.add_argument("directory", help="Directory of scenario INI files")
    return parser.parse_args(argv), parser


def main(argv=None):
    """Main function: dispatch the sub-command and return its exit code."""
    args, parser = parse_args(argv)

    config_handler = ConfigHandler(args.config)
    drymate_config = config_handler.get_drymate_config()

    if args.debug:
        Logger.set_max_log_level("DEBUG")
    elif args.quiet:
        Logger.set_max_log_level("WARNING")
    else:
        Logger.set_max_log_level(drymate_config.get('loglevel', 'INFO'))

    if args.command is None:
        parser.print_help()
        return 0

    output_root = args.out or drymate_config.get('output_directory')
    start_time = time.time()
    try:
        if args.command == "batch":
            workers = int(drymate_config['max_workers']) if 'max_workers' in drymate_config else None
            code = run_batch(args.directory, output_root, args.max_iters, workers)
        else:
            output = args.out
            if output is None and output_root:
                output = os.path.join(output_root, os.path.splitext(os.path.basename(args.scenario))[0])
            scenario = load_scenario(args.scenario, output)
            if args.command == "validate":
                code = validate_scenario(scenario)
            else:
                code, _ = run_scenario(scenario, args.max_iters)
    except DryMateError as e:
        Logger.log(f"{e}", "ERROR")
        code = e.exit_code
    except Exception as e:
        Logger.log(f"Unexpected {type(e).__name__}: {e}", "ERROR")
        raise

    elapsed_time = time.time() - start_time
    Logger.log(f" {chr(int('f253', 16))} Execution completed in {elapsed_time:.2f} seconds.",
               "INFO")
    return code


if __name__ == "__main__":
    sys.exit(main())
