"""
Estimators and tests that tie simulations to exact or limiting quantities:
fractal dimension of the growth, martingale identities of the boundary
chain, the duality ratio between the two clocks, and KS / chi-square
machinery.
"""

import logging
import math
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats as sps

from src.state.chain_state import BoundaryTrajectory
from src.state.report_state import (
    ChiSquareResult,
    DualityReport,
    DualityRun,
    MartingaleReport,
    MartingaleRow,
    ScalingReport,
    SupCheckpoint,
    TrajectoryScaling,
)
from src.tools.boundary_chain import StripDetector, all_strip_stops, sample_trajectory, step_prob, stream_boundary
from src.utils.errors import DomainError, InsufficientLengthError
from src.utils.pool import map_ordered
from src.utils.rng import stream


logger = logging.getLogger(__name__)

StreamFactory = Callable[[int], Iterator[np.ndarray]]


# ---------------------------------------------------------------------------
# Generic tests
# ---------------------------------------------------------------------------


def ks_distance(sample_a: Sequence[float], sample_b_or_cdf: Union[Sequence[float], Callable, str]) -> float:
    """Two-sample, or one-sample against a CDF, Kolmogorov-Smirnov statistic."""
    a = np.asarray(sample_a, dtype=np.float64)
    if a.size == 0:
        raise DomainError("ks_distance needs a non-empty sample")
    if callable(sample_b_or_cdf) or isinstance(sample_b_or_cdf, str):
        return float(sps.kstest(a, sample_b_or_cdf).statistic)
    b = np.asarray(sample_b_or_cdf, dtype=np.float64)
    if b.size == 0:
        raise DomainError("ks_distance needs a non-empty sample")
    return float(sps.ks_2samp(a, b).statistic)


def chi_square(
    counts: Mapping[int, int],
    probs: Mapping[int, float],
    min_bin: float = 5.0,
    tolerance: float = 1e-9,
) -> ChiSquareResult:
    """
    Pearson statistic of ``counts`` against the model ``probs``.

    Bins whose expected count is below ``min_bin`` are pooled together with
    the mass the model leaves unassigned (its truncated tail) and with every
    observation outside the model's support.
    """
    total = int(sum(counts.values()))
    if total == 0:
        raise DomainError("chi_square needs at least one observation")
    mass = float(sum(probs.values()))
    if mass > 1.0 + tolerance:
        raise DomainError(f"model probabilities sum to {mass} > 1")

    observed: List[float] = []
    expected: List[float] = []
    pooled_obs = float(sum(c for k, c in counts.items() if k not in probs))
    pooled_exp = max(0.0, 1.0 - mass) * total
    for key in sorted(probs):
        e = float(probs[key]) * total
        o = float(counts.get(key, 0))
        if e >= min_bin:
            observed.append(o)
            expected.append(e)
        else:
            pooled_obs += o
            pooled_exp += e
    if pooled_exp > tolerance * total:
        observed.append(pooled_obs)
        expected.append(pooled_exp)
    elif pooled_obs > 0:
        return ChiSquareResult(statistic=math.inf, dof=max(1, len(observed) - 1), p=0.0, bins=len(observed), total=total)

    obs = np.asarray(observed)
    exp = np.asarray(expected)
    statistic = float(np.sum((obs - exp) ** 2 / exp))
    dof = max(1, obs.size - 1)
    return ChiSquareResult(statistic=statistic, dof=dof, p=float(sps.chi2.sf(statistic, dof)), bins=int(obs.size), total=total)


def histogram(values: Sequence[int]) -> Dict[int, int]:
    keys, freq = np.unique(np.asarray(values, dtype=np.int64), return_counts=True)
    return {int(k): int(c) for k, c in zip(keys, freq)}


# ---------------------------------------------------------------------------
# Fractal dimension
# ---------------------------------------------------------------------------


def _geometric_grid(t_min: int, t_max: int) -> List[int]:
    grid = []
    t = t_min
    while t <= t_max:
        grid.append(t)
        t *= 2
    return grid


def _stops_for(factory: StreamFactory, index: int, t_max: int) -> Tuple[List[int], int]:
    detector = StripDetector(t_max=t_max)
    for block in factory(index):
        detector.feed(block)
        if detector.done:
            break
    if detector.count < t_max:
        raise InsufficientLengthError(found=detector.count, wanted=t_max)
    return detector.times, detector.strips_checked


def fractal_dimension(
    trajectories: int,
    t_max: int,
    seed: int,
    m0: int = 1,
    t_min: int = 64,
    threads: Optional[int] = None,
    stream_factory: Optional[StreamFactory] = None,
) -> ScalingReport:
    """
    Least-squares slope of log n_t against log t over t = t_min, 2 t_min, ..., t_max
    for each trajectory, plus the two bound ratios n_t log^2 t / t^2 and
    n_t / (t^2 log^2 t) on the same grid.
    """
    if t_max < t_min or t_max & (t_max - 1):
        raise DomainError("t_max must be a power of 2 no smaller than t_min")
    grid = _geometric_grid(t_min, t_max)
    if len(grid) < 2:
        raise DomainError("the t grid needs at least two points")
    factory = stream_factory or (lambda i: stream_boundary(m0, stream(seed, i)))
    logger.info("[Stats] fractal_dimension called", extra={"trajectories": trajectories, "t_max": t_max, "seed": seed})

    results = map_ordered(lambda i: _stops_for(factory, i, t_max), range(trajectories), threads)

    log_t = np.log(np.asarray(grid, dtype=np.float64))
    t_arr = np.asarray(grid, dtype=np.float64)
    per: List[TrajectoryScaling] = []
    checked = 0
    for times, n_checked in results:
        checked += n_checked
        n_t = np.asarray([times[t - 1] for t in grid], dtype=np.float64)
        slope = float(np.polyfit(log_t, np.log(n_t), 1)[0])
        upper = n_t * log_t**2 / t_arr**2
        lower = n_t / (t_arr**2 * log_t**2)
        per.append(
            TrajectoryScaling(
                slope=slope,
                n_t=[int(v) for v in n_t],
                upper_ratio_min=float(upper.min()),
                upper_ratio_max=float(upper.max()),
                lower_ratio_min=float(lower.min()),
                lower_ratio_max=float(lower.max()),
            )
        )

    slopes = np.asarray([p.slope for p in per])
    mean = float(slopes.mean())
    if slopes.size > 1:
        half = float(sps.t.ppf(0.975, slopes.size - 1) * slopes.std(ddof=1) / math.sqrt(slopes.size))
    else:
        half = 0.0
    return ScalingReport(
        m0=m0,
        t_min=t_min,
        t_max=t_max,
        seed=seed,
        t_grid=grid,
        trajectories=per,
        median_slope=float(np.median(slopes)),
        mean_slope=mean,
        slope_interval=[mean - half, mean + half],
        strips_checked=checked,
    )


# ---------------------------------------------------------------------------
# Duality ratio
# ---------------------------------------------------------------------------


def duality_ratio(traj: BoundaryTrajectory) -> np.ndarray:
    """
    ratio[n - 1] = t_n / sum_{i=1}^{n} 1 / (2 M_i) for n = 1 .. len, where
    t_n = max{t : n_t <= n}.
    """
    values = traj.values
    if values.size < 2:
        raise DomainError("duality_ratio needs at least one step")
    if values.size < 1001:
        logger.warning("[Stats] duality_ratio on a short trajectory", extra={"steps": int(values.size - 1)})
    stops = np.asarray(all_strip_stops(values).times, dtype=np.int64)
    n = np.arange(1, values.size, dtype=np.int64)
    t_n = np.searchsorted(stops, n, side="right")
    clock = np.cumsum(0.5 / values[1:])
    return t_n / clock


def dyadic_checkpoints(n_max: int, start: int = 1024) -> List[int]:
    out = []
    n = start
    while n <= n_max:
        out.append(n)
        n *= 2
    return out


def duality_report(
    runs: int,
    n: int,
    seed: int,
    m0: int = 1,
    low: float = 0.9,
    high: float = 1.1,
    threads: Optional[int] = None,
) -> DualityReport:
    """Final duality ratio over ``runs`` seeded trajectories of ``n`` steps."""
    checkpoints = dyadic_checkpoints(n)

    def one(i: int) -> DualityRun:
        traj = sample_trajectory(m0, n, seed, method="pitman", key=(i,))
        ratio = duality_ratio(traj)
        return DualityRun(
            index=i,
            final_ratio=float(ratio[-1]),
            checkpoints={str(c): float(ratio[c - 1]) for c in checkpoints},
        )

    results = map_ordered(one, range(runs), threads)
    finals = np.asarray([r.final_ratio for r in results])
    gaps = []
    for a, b in zip(checkpoints, checkpoints[1:]):
        gaps.append(float(np.median([abs(r.checkpoints[str(a)] - r.checkpoints[str(b)]) for r in results])))
    return DualityReport(
        n=n,
        m0=m0,
        seed=seed,
        low=low,
        high=high,
        runs=results,
        fraction_within=float(np.mean((finals >= low) & (finals <= high))),
        median_final_ratio=float(np.median(finals)),
        dyadic_gaps=gaps,
    )


# ---------------------------------------------------------------------------
# Martingales
# ---------------------------------------------------------------------------


def default_m_grid(m_max: int = 10**6) -> List[int]:
    """Every m up to 1000, then a geometric grid up to ``m_max``."""
    dense = list(range(1, min(m_max, 1000) + 1))
    sparse = np.unique(np.geomspace(1000, m_max, num=200).astype(np.int64)) if m_max > 1000 else []
    return sorted(set(dense) | {int(m) for m in sparse})


def exact_residuals(m: int) -> Tuple[Fraction, Fraction, Fraction]:
    """
    One-step conditional expectations given M_n = m, summed over the two moves:
    E[(m + xi)^2 - m^2 - 3], E[xi - 1/m] and E[((m + xi)^2 - m^2 - 3)^2].
    """
    square = Fraction(0)
    additive = Fraction(0)
    second = Fraction(0)
    for xi in (1, -1):
        p = step_prob(m, xi, exact=True)
        inc = (m + xi) ** 2 - m * m - 3
        square += p * inc
        additive += p * (xi - Fraction(1, m))
        second += p * inc * inc
    return square, additive, second


def float_residuals(m: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    m = np.asarray(m, dtype=np.float64)
    p_up = (m + 1) / (2 * m)
    p_down = (m - 1) / (2 * m)
    square = p_up * ((m + 1) ** 2 - m * m - 3) + p_down * ((m - 1) ** 2 - m * m - 3)
    additive = p_up * (1 - 1 / m) + p_down * (-1 - 1 / m)
    return square, additive


def _sup_statistics(n_max: int, checkpoints: Sequence[int], rng: np.random.Generator) -> List[Tuple[float, float]]:
    values = next(stream_boundary(1, rng, chunk=n_max)).astype(np.float64)[: n_max + 1]
    n = np.arange(values.size, dtype=np.float64)
    comp = np.concatenate(([0.0], np.cumsum(1.0 / values[:-1])))
    additive = np.abs(values - comp)
    out = []
    for c in checkpoints:
        lo = max(2, c // 10 + 1)
        block = slice(lo, c + 1)
        nb = n[block]
        out.append(
            (
                float(np.max(values[block] / np.sqrt(nb * np.log(nb)))),
                float(np.max(additive[block] / (np.sqrt(nb) * np.log(nb)))),
            )
        )
    return out


def martingale_residuals(
    m_grid: Optional[Sequence[int]] = None,
    runs: int = 0,
    n_max: int = 10**6,
    seed: int = 0,
    checkpoints: Optional[Sequence[int]] = None,
    threads: Optional[int] = None,
) -> MartingaleReport:
    """
    Exact one-step residuals of X_n = M_n^2 - 3n and X_n = M_n - sum_{i<n} 1/M_i
    on ``m_grid``, and optionally Monte Carlo sup statistics of
    M_n / sqrt(n log n) and (M_n - sum 1/M_i) / (sqrt(n) log n) over decade
    blocks (N/10, N].
    """
    grid = sorted(set(m_grid)) if m_grid is not None else default_m_grid()
    if not grid or grid[0] < 1:
        raise DomainError("m_grid must hold positive integers")

    rows: List[MartingaleRow] = []
    exact_zero = True
    second_ok = True
    sample_every = max(1, len(grid) // 50)
    for i, m in enumerate(grid):
        square, additive, second = exact_residuals(m)
        exact_zero = exact_zero and square == 0 and additive == 0
        second_ok = second_ok and second == 4 * (m * m - 1)
        if i % sample_every == 0 or i == len(grid) - 1:
            fs, fa = float_residuals(np.asarray([m]))
            rows.append(
                MartingaleRow(
                    m=m,
                    residual_square=str(square),
                    residual_additive=str(additive),
                    second_moment=str(second),
                    float_residual_square=float(fs[0]),
                    float_residual_additive=float(fa[0]),
                )
            )
    fs, fa = float_residuals(np.asarray(grid))

    report = MartingaleReport(
        m_grid_size=len(grid),
        m_max=grid[-1],
        rows=rows,
        max_abs_residual_square=float(np.max(np.abs(fs))),
        max_abs_residual_additive=float(np.max(np.abs(fa))),
        exact_zero=exact_zero,
        second_moment_ok=second_ok,
        runs=runs,
        seed=seed if runs else None,
    )
    if runs:
        points = list(checkpoints) if checkpoints else [c for c in (10**4, 10**5, 10**6) if c <= n_max]
        stats = map_ordered(lambda i: _sup_statistics(n_max, points, stream(seed, i)), range(runs), threads)
        arr = np.asarray(stats)  # runs x checkpoints x 2
        medians = np.median(arr, axis=0)
        report.checkpoints = [
            SupCheckpoint(n=c, median_boundary=float(medians[j, 0]), median_additive=float(medians[j, 1]))
            for j, c in enumerate(points)
        ]
        if len(points) > 1:
            report.decreasing = bool(
                medians[-1, 0] < medians[0, 0] and medians[-1, 1] < medians[0, 1]
            )
    return report
