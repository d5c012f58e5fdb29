"""
Reference simulations of the two scaling limits of the boundary chain and
the random time change relating them.

Paths are floored at ``EPS_FLOOR`` after every Euler step. The drift and any
clock integrand are evaluated at max(x, cutoff) with cutoff = sqrt(dt), which
keeps a single step from the floor bounded by sqrt(dt).
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.state.diffusion_state import GROWTH, SLICE, SdePath, SdeSpec, TimeChange
from src.tools.boundary_chain import BatchGrowth
from src.utils.errors import DomainError, TruncatedClockError
from src.utils.rng import batch_sizes, seed_token, stream


logger = logging.getLogger(__name__)

EPS_FLOOR = 1e-6
DEFAULT_DT = 1e-4
BATCH = 4096

Clock = Callable[[np.ndarray], np.ndarray]


def half_inverse(x: np.ndarray) -> np.ndarray:
    """g(x) = 1 / (2x): maps the growth clock to the slice clock."""
    return 0.5 / x


def twice(x: np.ndarray) -> np.ndarray:
    """g(x) = 2x: the area functional along slice-clock paths."""
    return 2.0 * x


def _eval_clock(g: Clock, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(g(x), dtype=np.float64), x.shape)


def _check_grid(x0: float, dt: float, horizon: float) -> None:
    if x0 < 0:
        raise DomainError("x0 must be non-negative")
    if dt <= 0:
        raise DomainError("dt must be positive")
    if horizon < dt:
        raise DomainError("horizon must be at least dt")


def _start(spec: SdeSpec, x0: float, floor: float) -> float:
    # the growth drift is singular at 0
    if spec.name == "GROWTH":
        return max(x0, floor)
    return x0


def _euler_step(spec: SdeSpec, x: np.ndarray, dt: float, cutoff: float, floor: float, z: np.ndarray) -> np.ndarray:
    drift = spec.drift(np.maximum(x, cutoff))
    return np.maximum(x + drift * dt + spec.noise(x) * math.sqrt(dt) * z, floor)


def euler_path(
    spec: SdeSpec,
    x0: float,
    dt: float = DEFAULT_DT,
    horizon: float = 4.0,
    seed: int = 0,
    floor: float = EPS_FLOOR,
    key: Tuple[int, ...] = (),
) -> SdePath:
    """One Euler-Maruyama path x <- x + b(x) dt + sigma(x) sqrt(dt) N(0, 1)."""
    _check_grid(x0, dt, horizon)
    steps = int(round(horizon / dt))
    cutoff = math.sqrt(dt)
    rng = stream(seed, *key)
    z = rng.standard_normal(steps)
    values = np.empty(steps + 1)
    values[0] = _start(spec, x0, floor)
    x = np.array([values[0]])
    for i in range(steps):
        x = _euler_step(spec, x, dt, cutoff, floor, z[i:i + 1])
        values[i + 1] = x[0]
    return SdePath(spec=spec.name, dt=dt, values=values, floor=floor, cutoff=cutoff, seed=seed_token(seed, key))


def clock(path: SdePath, g: Clock) -> TimeChange:
    """tau_u = sum_{i < u/dt} g(x_i) dt along the path."""
    x = np.maximum(path.values[:-1], path.cutoff)
    increments = _eval_clock(g, x) * path.dt
    if np.any(increments < 0):
        raise DomainError("g must be positive along the path")
    return TimeChange(dt=path.dt, clock=np.concatenate(([0.0], np.cumsum(increments))))


def time_change(path: SdePath, g: Clock, s_horizon: Optional[float] = None) -> SdePath:
    """
    Y_s = X_{tau^{-1}(s)} on a uniform s-grid with the path's step.

    Raises:
        TruncatedClockError: if tau does not reach ``s_horizon``.
    """
    tc = clock(path, g)
    if s_horizon is None:
        s_horizon = math.floor(tc.reach / path.dt + 1e-9) * path.dt
    elif s_horizon > tc.reach + 1e-12:
        raise TruncatedClockError(available=tc.reach, wanted=s_horizon)
    n = int(math.floor(s_horizon / path.dt + 1e-9))
    s_grid = np.arange(n + 1, dtype=np.float64) * path.dt
    u_of_s = tc.inverse(s_grid)
    values = np.interp(u_of_s, path.grid, path.values)
    return SdePath(spec=f"{path.spec}@tau", dt=path.dt, values=values, floor=path.floor, cutoff=path.cutoff, seed=path.seed)


def euler_marginals(
    spec: SdeSpec,
    x0: float,
    dt: float,
    at: Sequence[float],
    samples: int,
    seed: int,
    floor: float = EPS_FLOOR,
    batch: int = BATCH,
) -> Dict[float, np.ndarray]:
    """Marginals of ``samples`` Euler paths at the times in ``at``."""
    times = sorted(float(a) for a in at)
    _check_grid(x0, dt, max(times[-1], dt))
    marks = {int(round(a / dt)): a for a in times}
    steps = max(marks)
    cutoff = math.sqrt(dt)
    out: Dict[float, List[np.ndarray]] = {a: [] for a in times}

    for b, size in enumerate(batch_sizes(samples, batch)):
        rng = stream(seed, b)
        x = np.full(size, _start(spec, x0, floor))
        if 0 in marks:
            out[marks[0]].append(x.copy())
        for i in range(1, steps + 1):
            x = _euler_step(spec, x, dt, cutoff, floor, rng.standard_normal(size))
            if i in marks:
                out[marks[i]].append(x.copy())
    return {a: np.concatenate(parts) for a, parts in out.items()}


def time_changed_marginals(
    spec: SdeSpec,
    g: Clock,
    x0: float,
    dt: float,
    horizon: float,
    s_points: Sequence[float],
    samples: int,
    seed: int,
    floor: float = EPS_FLOOR,
    batch: int = BATCH,
    compact_every: int = 64,
) -> Tuple[Dict[float, np.ndarray], Dict[float, int]]:
    """
    Values of X_{tau^{-1}(s)} for each s in ``s_points``, interpolated at the
    step where the clock crosses s. Paths whose clock stays below s up to
    ``horizon`` are dropped and counted in the second return value.
    """
    _check_grid(x0, dt, horizon)
    points = sorted(float(s) for s in s_points)
    steps = int(round(horizon / dt))
    cutoff = math.sqrt(dt)
    s_top = points[-1]
    out: Dict[float, List[np.ndarray]] = {s: [] for s in points}
    truncated = {s: 0 for s in points}

    for b, size in enumerate(batch_sizes(samples, batch)):
        rng = stream(seed, b)
        x = np.full(size, _start(spec, x0, floor))
        tau = np.zeros(size)
        recorded = {s: np.full(size, np.nan) for s in points}
        if 0.0 in recorded:
            recorded[0.0][:] = x
        positive = [s for s in points if s > 0.0]
        alive = np.arange(size) if positive else np.arange(0)
        for step in range(steps):
            if alive.size == 0:
                break
            xa, ta = x[alive], tau[alive]
            tn = ta + _eval_clock(g, np.maximum(xa, cutoff)) * dt
            xn = _euler_step(spec, xa, dt, cutoff, floor, rng.standard_normal(alive.size))
            for s in positive:
                crossed = (ta < s) & (tn >= s)
                if crossed.any():
                    w = (s - ta[crossed]) / (tn[crossed] - ta[crossed])
                    recorded[s][alive[crossed]] = xa[crossed] + w * (xn[crossed] - xa[crossed])
            x[alive] = xn
            tau[alive] = tn
            if step % compact_every == compact_every - 1:
                alive = alive[tau[alive] < s_top]
        for s in points:
            ok = ~np.isnan(recorded[s])
            truncated[s] += int(size - ok.sum())
            out[s].append(recorded[s][ok])

    for s, count in truncated.items():
        if count:
            logger.warning("[Diffusion] clock did not reach s on some paths", extra={"s": s, "truncated": count})
    return {s: np.concatenate(parts) for s, parts in out.items()}, truncated


def sde_functional_marginal(
    spec: SdeSpec,
    g: Clock,
    x0: float,
    dt: float,
    at: float,
    samples: int,
    seed: int,
    floor: float = EPS_FLOOR,
    batch: int = BATCH,
) -> np.ndarray:
    """int_0^at g(X_u) du along ``samples`` Euler paths (left Riemann sums)."""
    _check_grid(x0, dt, at)
    steps = int(round(at / dt))
    cutoff = math.sqrt(dt)
    parts: List[np.ndarray] = []
    for b, size in enumerate(batch_sizes(samples, batch)):
        rng = stream(seed, b)
        x = np.full(size, _start(spec, x0, floor))
        acc = np.zeros(size)
        for _ in range(steps):
            acc += _eval_clock(g, np.maximum(x, cutoff)) * dt
            x = _euler_step(spec, x, dt, cutoff, floor, rng.standard_normal(size))
        parts.append(acc)
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# Rescaled chain
# ---------------------------------------------------------------------------


def _growth_batches(m0: int, samples: int, seed: int, run: Callable[[BatchGrowth], np.ndarray], batch: int = BATCH) -> np.ndarray:
    parts = []
    for b, size in enumerate(batch_sizes(samples, batch)):
        parts.append(run(BatchGrowth(m0, size, stream(seed, b))))
    return np.concatenate(parts) if parts else np.empty(0)


def rescaled_growth_marginal(n: int, u: float, m0_raw: int, samples: int, seed: int) -> np.ndarray:
    """Sample of M_{[un]} / sqrt(n) for the chain started at ``m0_raw``."""
    if n < 1:
        raise DomainError("n must be at least 1")
    steps = int(math.floor(u * n))
    logger.info("[Diffusion] rescaled_growth_marginal", extra={"n": n, "u": u, "m0": m0_raw, "samples": samples})
    values = _growth_batches(m0_raw, samples, seed, lambda g: g.advance(steps).m.copy())
    return values / math.sqrt(n)


def rescaled_slice_marginal(t: int, s: float, samples: int, seed: int, m0: int = 1) -> np.ndarray:
    """Sample of M_{n_[st]} / t."""
    if t < 1:
        raise DomainError("t must be at least 1")
    stop = int(math.floor(s * t))
    if stop < 1:
        raise DomainError("s * t must be at least 1 (n_1 is the first stop)")
    logger.info("[Diffusion] rescaled_slice_marginal", extra={"t": t, "s": s, "samples": samples})
    values = _growth_batches(m0, samples, seed, lambda g: g.advance_to_stops(stop).boundary_at(stop))
    return values / float(t)


def rescaled_height_marginal(n: int, u: float, m0: int, samples: int, seed: int) -> np.ndarray:
    """Sample of t_{[un]} / sqrt(n), the number of completed stops rescaled."""
    if n < 1:
        raise DomainError("n must be at least 1")
    steps = int(math.floor(u * n))
    values = _growth_batches(m0, samples, seed, lambda g: g.advance(steps).stop_counts())
    return values / math.sqrt(n)


def rescaled_area_marginal(t: int, s: float, samples: int, seed: int, m0: int = 1) -> np.ndarray:
    """Sample of n_{[st]} / t^2, the number of triangles below height [st] rescaled."""
    if t < 1:
        raise DomainError("t must be at least 1")
    stop = int(math.floor(s * t))
    if stop < 1:
        raise DomainError("s * t must be at least 1")
    values = _growth_batches(m0, samples, seed, lambda g: g.advance_to_stops(stop).stop_time(stop))
    return values / float(t * t)

