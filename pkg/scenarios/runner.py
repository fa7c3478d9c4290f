"""Scenario execution, result persistence and batch runs."""

import glob
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed

from tqdm import tqdm

from handlers import utils
from handlers.config_handler import load_scenario
from handlers.errors import ConfigError, DivergenceError, DryMateError, OutputError
from handlers.logger_handler import Logger
from scenarios import HANDLERS
from scenarios.common import SCHEMA_VERSION, ResultBundle, add_trace

TAG = f"[{chr(int('f04b', 16))} Runner]"


def emit_plot_data(bundle, directory):
    """Write every series of the bundle as one CSV file; an empty bundle writes nothing.

    Returns:
        list: Paths of the written files.
    """
    written = []
    for name in sorted(bundle.series):
        header, columns = bundle.series[name]
        path = os.path.join(directory, name)
        utils.write_csv(path, header, columns)
        written.append(path)
    return written


def _prepare_output(config):
    try:
        os.makedirs(config.output, exist_ok=True)
        config.handler.echo(os.path.join(config.output, "config_echo.ini"))
    except OSError as e:
        raise OutputError(f"Could not prepare output directory {config.output}: {e}") from e


def run_scenario(config, max_iters=None):
    """Run one scenario and write its result bundle.

    Args:
        config (ScenarioConfig): Loaded scenario.
        max_iters (int, optional): Overrides [optimizer] max_iters.

    Returns:
        tuple: (exit code, ResultBundle)
    """
    started = time.time()
    handler = None
    code = 0
    try:
        _prepare_output(config)
        handler = HANDLERS[config.kind](config, max_iters)
        bundle = handler.run()
    except DivergenceError as e:
        Logger.log(f"{TAG} {config.name}: {e}", "ERROR")
        bundle = handler.bundle if handler is not None else ResultBundle(config.kind)
        bundle.status = "diverged"
        bundle.summary["error"] = str(e)
        if e.step is not None:
            bundle.summary["failed_step"] = e.step
        if e.trace is not None and len(e.trace):
            add_trace(bundle, e.trace)
        code = e.exit_code
    except ConfigError as e:
        Logger.log(f"{TAG} {config.name}: invalid configuration: {e}", "ERROR")
        if not os.path.isdir(config.output):
            return e.exit_code, ResultBundle(config.kind, status="invalid")
        bundle = ResultBundle(config.kind, status="invalid", summary={"error": str(e)})
        code = e.exit_code
    except OutputError as e:
        Logger.log(f"{TAG} {config.name}: {e}", "ERROR")
        return e.exit_code, ResultBundle(config.kind, status="output_error", summary={"error": str(e)})

    runtime = time.time() - started
    summary = {"schema_version": SCHEMA_VERSION, "kind": config.kind, "status": bundle.status,
               "runtime_s": runtime}
    summary.update(bundle.summary)
    try:
        emit_plot_data(bundle, config.output)
        utils.write2json(os.path.join(config.output, "summary.json"), summary)
    except OutputError as e:
        return e.exit_code, bundle
    Logger.log(f"{TAG} {config.name}: {bundle.status} in {runtime:.2f} s, {len(bundle.series)} series "
               f"written to {config.output}", "SUCCESS" if code == 0 else "WARNING")
    return code, bundle


def validate_scenario(config):
    """Build the scenario's inputs without running it; CFL and unit checks happen here."""
    HANDLERS[config.kind](config)
    Logger.log(f"{TAG} {config.path} is a valid {config.kind} scenario", "SUCCESS")
    return 0


def _run_file(path, output_root, max_iters):
    try:
        output = os.path.join(output_root, os.path.splitext(os.path.basename(path))[0]) if output_root else None
        config = load_scenario(path, output)
    except DryMateError as e:
        Logger.log(f"{TAG} {path}: {e}", "ERROR")
        return path, e.exit_code
    code, _ = run_scenario(config, max_iters)
    return path, code


def run_batch(directory, output_root=None, max_iters=None, max_workers=None):
    """Run every *.ini scenario in `directory`, one worker per scenario.

    Returns:
        int: The largest exit code among the scenarios.
    """
    paths = sorted(glob.glob(os.path.join(directory, "*.ini")))
    if not paths:
        raise ConfigError(f"No scenario files (*.ini) found in {directory}")
    Logger.log(f"{TAG} Running {len(paths)} scenarios from {directory}", "INFO")

    codes = {}
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(_run_file, path, output_root, max_iters) for path in paths]
        for future in tqdm(as_completed(futures), total=len(futures), desc="Scenarios",
                           disable=not Logger.is_enabled("INFO")):
            path, code = future.result()
            codes[path] = code

    failed = {p: c for p, c in codes.items() if c}
    for path, code in sorted(failed.items()):
        Logger.log(f"{TAG} {os.path.basename(path)} exited with code {code}", "WARNING")
    Logger.log(f"{TAG} {len(paths) - len(failed)}/{len(paths)} scenarios succeeded",
               "SUCCESS" if not failed else "WARNING")
    return max(codes.values())
