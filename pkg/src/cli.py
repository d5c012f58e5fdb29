"""
Command-line front end.

    uict grow --m0 3 --moves "+++-+--" --export tri.json
    uict fractal-dim --t-max 4096 --trajectories 50 --seed 7
    uict verify --level quick

Every run is resolved into one ``ExperimentConfig`` (flags over ``--config``
JSON over the YAML defaults over ``AppSettings``) and echoed into each file
it writes. Exit codes: 0 pass, 1 failed check, 2 usage error.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional

from pydantic import ValidationError

from settings import AppSettings
from src.pipelines import experiments as ex
from src.pipelines.verify import verify_suite
from src.state.experiment_state import COMMANDS, ExperimentConfig
from src.tools.boundary_chain import strip_kernel_exact
from src.utils.errors import DomainError, InvariantViolation, UictError
from src.utils.io import dumps


logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _int_list(text: str) -> List[int]:
    """``"1000,10000"`` -> ``[1000, 10000]``."""
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


RUNNERS: Dict[str, Callable[[ExperimentConfig], Dict[str, Any]]] = {
    "grow": ex.run_grow,
    "sample": ex.run_sample,
    "strip-kernel": ex.run_strip_kernel,
    "slice-dist": ex.run_slice_dist,
    "fractal-dim": ex.run_fractal_dim,
    "diffusion-check": ex.run_diffusion_check,
    "duality": ex.run_duality,
    "martingales": ex.run_martingales,
}

# per-command flags: (flag, dest, type, help)
COMMAND_FLAGS: Dict[str, List[tuple]] = {
    "grow": [
        ("--m0", "m0", int, "initial boundary length"),
        ("--moves", "moves", str, 'move string such as "+++-+--"'),
        ("--export", "export", str, "path of the triangulation JSON"),
    ],
    "sample": [
        ("--m0", "m0", int, "initial boundary length"),
        ("--n-steps", "n_steps", int, "number of moves"),
    ],
    "strip-kernel": [
        ("--m", "m", int, "boundary length at the start of the strip"),
        ("--samples", "samples", int, "simulated strips"),
        ("--len-cap", "len_cap", int, "longest strip enumerated exactly"),
        ("--tail", "tail", float, "tail mass at which the kernel table stops"),
    ],
    "slice-dist": [
        ("--m0", "m0", int, "initial boundary length"),
        ("--j-max", "j_max", int, "last generation compared"),
        ("--samples", "samples", int, "grown triangulations"),
        ("--t", "t", int, "slice used for the branching comparison"),
        ("--slice-samples", "slice_samples", int, "samples of the branching comparison"),
    ],
    "fractal-dim": [
        ("--m0", "m0", int, "initial boundary length"),
        ("--t-max", "t_max", int, "last strip stop (a power of 2)"),
        ("--trajectories", "trajectories", int, "independent trajectories"),
    ],
    "diffusion-check": [
        ("--m0", "m0", int, "initial boundary length"),
        ("--n", "n", int, "growth-clock rescaling"),
        ("--u", "u", float, "growth-clock time"),
        ("--samples", "samples", int, "samples for the growth clock"),
        ("--t", "t", int, "slice-clock rescaling"),
        ("--s", "s", float, "slice-clock time"),
        ("--slice-samples", "slice_samples", int, "samples for the slice clock"),
        ("--dt", "dt", float, "Euler step"),
        ("--n-grid", "n_grid", _int_list, "comma-separated growth-clock rescalings for the convergence trend"),
        ("--trend-samples", "trend_samples", int, "samples per rescaling of the convergence trend"),
    ],
    "duality": [
        ("--m0", "m0", int, "initial boundary length"),
        ("--n-steps", "n_steps", int, "moves per ratio trajectory"),
        ("--runs", "runs", int, "ratio trajectories"),
        ("--samples", "samples", int, "paths per side of the time-change comparison"),
        ("--dt", "dt", float, "Euler step"),
        ("--horizon", "horizon", float, "growth-clock horizon of the time change"),
        ("--n", "n", int, "growth-clock rescaling of the height functional"),
        ("--t", "t", int, "slice-clock rescaling of the area functional"),
        ("--functional-samples", "functional_samples", int, "samples of the clock functionals"),
    ],
    "martingales": [
        ("--m-max", "m_max", int, "largest boundary length of the exact grid"),
        ("--runs", "runs", int, "Monte Carlo trajectories for the sup statistics"),
        ("--n-steps", "n_steps", int, "moves per trajectory"),
    ],
    "verify": [],
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--output-dir", dest="output_dir", default=None)
    common.add_argument("--format", choices=["csv", "json"], default=None)
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--config", dest="config_path", default=None, help="JSON file with ExperimentConfig fields")
    common.add_argument("--level", choices=["quick", "full"], default=None)

    parser = argparse.ArgumentParser(prog="uict", description="Grow causal triangulations and check their scaling laws.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name, parents=[common])
        for flag, dest, kind, text in COMMAND_FLAGS[name]:
            cmd.add_argument(flag, dest=dest, type=kind, default=None, help=text)
    return parser


def _load_json_config(path: str) -> Dict[str, Any]:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise DomainError(f"config {path} must hold a JSON object")
    return data


def resolve_config(args: argparse.Namespace, settings: Optional[AppSettings] = None) -> ExperimentConfig:
    """Merge flags, the ``--config`` file, YAML defaults and settings into one config."""
    settings = settings or AppSettings()
    merged: Dict[str, Any] = {
        "seed": settings.seed,
        "output_dir": settings.output_dir,
        "level": settings.level,
        "threads": settings.threads,
    }
    if args.config_path:
        merged.update(_load_json_config(args.config_path))
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("config_path", "command")}
    merged.update(flags)
    merged["command"] = args.command
    return ex.resolve(ExperimentConfig.model_validate(merged))


def _check_output_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise DomainError(f"cannot create output directory {path}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise DomainError(f"output directory {path} is not writable")


def run(config: ExperimentConfig, kernel: ex.Kernel = strip_kernel_exact) -> int:
    """Dispatch one resolved config and return its exit status."""
    logger.info("[CLI] run called", extra={"command": config.command, "seed": config.seed, "level": config.level})
    try:
        _check_output_dir(config.output_dir)
        if config.command == "verify":
            summary = verify_suite(config.level, config.seed, config.output_dir, config.threads, kernel=kernel)
            sys.stdout.write(dumps(summary))
            return EXIT_PASS if summary.status == "pass" else EXIT_FAIL
        if config.command == "strip-kernel":
            result = ex.run_strip_kernel(config, kernel=kernel)
        else:
            result = RUNNERS[config.command](config)
    except InvariantViolation as exc:
        logger.error("[CLI] invariant violated", extra={"command": config.command, "reason": str(exc)})
        return EXIT_FAIL
    except UictError as exc:
        logger.error("[CLI] rejected run", extra={"command": config.command, "reason": str(exc)})
        return EXIT_USAGE

    sys.stdout.write(dumps(ex.without_samples(result)))
    if result.get("status") != "pass":
        logger.warning("[CLI] check failed", extra={"command": config.command, "reason": result.get("reason")})
        return EXIT_FAIL
    return EXIT_PASS


def main(argv: Optional[List[str]] = None) -> int:
    settings = AppSettings()
    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args, settings)
    except (ValidationError, DomainError) as exc:
        logger.error("[CLI] invalid configuration", extra={"reason": str(exc)})
        return EXIT_USAGE
    try:
        return run(config)
    except Exception:
        logger.exception("[CLI] unexpected failure", extra={"command": config.command})
        return EXIT_FAIL


if __name__ == "__main__":
    raise SystemExit(main())
