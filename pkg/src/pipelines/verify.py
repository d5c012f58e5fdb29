"""
The acceptance suite behind ``uict verify``.

Each check reuses the experiment functions with the parameters of its
subcommand at the requested level; nothing is written except the summary.
"""

import logging
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from src.pipelines import experiments as ex
from src.state.report_state import CheckResult, VerifySummary
from src.tools.boundary_chain import strip_kernel_exact
from src.utils.errors import AcceptanceFailure
from src.utils.io import write_json
from src.utils.loaders import experiment_defaults, thresholds


logger = logging.getLogger(__name__)

Check = Tuple[int, str, Callable[[], Dict[str, Any]]]


def _summarise(result: Dict[str, Any]) -> Dict[str, Any]:
    """Drop raw samples and full reports; keep the numbers a reader needs."""
    out: Dict[str, Any] = {}
    for key, value in result.items():
        if key in ("status", "report") or isinstance(value, np.ndarray):
            continue
        out[key] = value
    return out


def _run_check(check_id: int, name: str, fn: Callable[[], Dict[str, Any]]) -> CheckResult:
    start = time.perf_counter()
    try:
        result = fn()
        status = result.get("status", "fail")
        detail = _summarise(result)
    except Exception as exc:
        logger.exception("[Verify] check raised", extra={"check": name})
        status, detail = "error", {"reason": f"{type(exc).__name__}: {exc}"}
    seconds = time.perf_counter() - start
    logger.info("[Verify] check finished", extra={"check": name, "status": status, "seconds": round(seconds, 3)})
    return CheckResult(id=check_id, name=name, status=status, detail=detail, seconds=seconds)


def build_checks(level: str, seed: int, threads: Optional[int] = None, kernel: ex.Kernel = strip_kernel_exact) -> List[Check]:
    limits = thresholds(level)
    strip = experiment_defaults("strip-kernel", level)
    slices = experiment_defaults("slice-dist", level)
    fractal = experiment_defaults("fractal-dim", level)
    diff = experiment_defaults("diffusion-check", level)
    dual = experiment_defaults("duality", level)
    mart = experiment_defaults("martingales", level)

    return [
        (1, "kernel_bruteforce", lambda: ex.check_kernel_bruteforce(max_len=int(limits["bruteforce_len"]))),
        (2, "cross_dual", lambda: ex.check_cross_dual()),
        (
            3,
            "strip_monte_carlo",
            lambda: ex.check_strip_kernel(strip["m"], strip["samples"], seed, limits["p_min"], kernel=kernel),
        ),
        (
            4,
            "slice_marginals",
            lambda: ex.check_slice_marginals(slices["m0"], slices["j_max"], slices["samples"], seed, limits["p_min"]),
        ),
        (5, "martingale_identities", lambda: ex.check_martingale_exact(mart["m_max"], limits["residual_max"])),
        (
            6,
            "fractal_dimension",
            lambda: ex.check_fractal_dimension(
                fractal["trajectories"],
                fractal["t_max"],
                seed,
                m0=fractal["m0"],
                slope_low=limits["slope_low"],
                slope_high=limits["slope_high"],
                threads=threads,
            ),
        ),
        (
            7,
            "growth_diffusion",
            lambda: ex.check_growth_diffusion(
                diff["n"], diff["u"], diff["m0"], diff["samples"], seed, diff["dt"], limits["ks_max"]
            ),
        ),
        (
            8,
            "slice_diffusion",
            lambda: ex.check_slice_diffusion(
                diff["t"], diff["s"], diff["slice_samples"], seed, diff["dt"], limits["ks_max"], limits["mean_tol"]
            ),
        ),
        (
            9,
            "time_change",
            lambda: ex.check_time_change(dual["samples"], seed, dual["dt"], dual["horizon"], limits["ks_max"]),
        ),
        (
            10,
            "duality_ratio",
            lambda: ex.check_duality_ratio(
                dual["runs"],
                dual["n_steps"],
                seed,
                dual["m0"],
                limits["ratio_low"],
                limits["ratio_high"],
                limits["within_fraction"],
                threads=threads,
            ),
        ),
        (11, "bijection", lambda: ex.check_bijection(2, 2, int(limits["bijection_moves"]))),
        (12, "generator_coefficients", lambda: ex.check_generator_coeffs()),
    ]


def verify_suite(
    level: str = "quick",
    seed: int = 7,
    output_dir: Optional[str] = None,
    threads: Optional[int] = None,
    kernel: ex.Kernel = strip_kernel_exact,
    only: Optional[List[int]] = None,
) -> VerifySummary:
    """
    Run the acceptance checks and return their summary; ``only`` restricts
    the run to the given check ids. With ``output_dir`` the summary is also
    written to ``verify_summary.json``.
    """
    logger.info("[Verify] verify_suite called", extra={"level": level, "seed": seed})
    start = time.perf_counter()
    results = [
        _run_check(check_id, name, fn)
        for check_id, name, fn in build_checks(level, seed, threads, kernel)
        if only is None or check_id in only
    ]
    summary = VerifySummary(
        level=level,
        seed=seed,
        status="pass" if all(r.status == "pass" for r in results) else "fail",
        checks=results,
        thresholds=thresholds(level),
        seconds=time.perf_counter() - start,
    )
    if output_dir is not None:
        # timings stay on stdout; the file depends on level and seed only
        timeless = summary.model_dump(mode="json", exclude={"seconds": True, "checks": {"__all__": {"seconds"}}})
        write_json(f"{output_dir}/verify_summary.json", timeless)
    return summary


def assert_passed(summary: VerifySummary) -> None:
    """
    Raises:
        AcceptanceFailure: naming every check that did not pass.
    """
    failed = [f"{c.id}:{c.name}={c.status}" for c in summary.checks if c.status != "pass"]
    if failed:
        raise AcceptanceFailure(", ".join(failed))
