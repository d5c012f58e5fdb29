"""
The boundary-length chain of the growth process.

A (+)-move happens with probability (m + 1) / (2m) and a (-)-move with
probability (m - 1) / (2m), where m is the current boundary length. Strips are
delimited by the stopping times n_t: starting from n_1 = 0, the next stop is
reached after M_{n_t} (-)-moves.
"""

import logging
import math
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
from scipy.special import gammaln

from src.state.chain_state import (
    BoundaryTrajectory,
    Move,
    MoveSequence,
    StripKernelEnumeration,
    StripKernelRow,
    StripStops,
)
from src.utils.errors import DomainError, IllegalMoveError, InsufficientLengthError, InvariantViolation
from src.utils.rng import seed_token, stream


logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)
DEFAULT_CHUNK = 1 << 20


def _check_length(m: int, name: str = "m") -> None:
    if int(m) != m or m < 1:
        raise DomainError(f"{name} must be a positive integer, got {m!r}; the boundary length is never zero")


# ---------------------------------------------------------------------------
# Moves
# ---------------------------------------------------------------------------


def parse_moves(text: str) -> MoveSequence:
    """Parse a string such as ``"+++-+--"`` (whitespace and commas ignored)."""
    out: MoveSequence = []
    for ch in text:
        if ch in " ,\t\n[]":
            continue
        out.append(Move.coerce(ch).sign)
    return out


def format_moves(moves: MoveSequence) -> str:
    return "".join("+" if s > 0 else "-" for s in moves)


def step_prob(m: int, move: Union[Move, int, str], exact: bool = False) -> Union[float, Fraction]:
    """Probability of ``move`` from boundary length ``m``: (m + sign) / (2m)."""
    _check_length(m)
    sign = Move.coerce(move).sign
    if exact:
        return Fraction(m + sign, 2 * m)
    return (m + sign) / (2.0 * m)


def path_probability(m0: int, moves: MoveSequence, exact: bool = True) -> Union[float, Fraction]:
    """Product of step probabilities along ``moves``; equals (M_n / M_0) 2^{-n}."""
    _check_length(m0, "m0")
    m = m0
    prob: Union[float, Fraction] = Fraction(1) if exact else 1.0
    for i, sign in enumerate(moves):
        if sign < 0 and m == 1:
            raise IllegalMoveError(i)
        prob = prob * step_prob(m, sign, exact=exact)
        m += sign
    return prob


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------


def stream_boundary(m0: int, rng: np.random.Generator, chunk: int = DEFAULT_CHUNK) -> Iterator[np.ndarray]:
    """
    Yield consecutive blocks of an infinite path of the chain started at ``m0``.

    With a simple symmetric walk S (S_0 = 0) and its running maximum, the
    process ``2 max(S) - S + 1`` moves up from m with probability (m+1)/(2m),
    so it is the chain started at 1. For m0 > 1 the prefix before the first
    visit to m0 is discarded. The first block starts with M_0 = m0.
    """
    _check_length(m0, "m0")
    s_last = 0
    max_last = 0
    started = m0 == 1
    first = True
    while True:
        steps = rng.integers(0, 2, size=chunk, dtype=np.int8).astype(np.int64) * 2 - 1
        s = s_last + np.cumsum(steps)
        mx = np.maximum(np.maximum.accumulate(s), max_last)
        block = 2 * mx - s + 1
        s_last = int(s[-1])
        max_last = int(mx[-1])

        if first:
            block = np.concatenate(([1], block))
            first = False
        if not started:
            hits = np.flatnonzero(block == m0)
            if hits.size == 0:
                continue
            block = block[hits[0]:]
            started = True
        yield block


def sample_trajectory(
    m0: int,
    n_steps: int,
    seed: int,
    method: str = "kernel",
    key: Tuple[int, ...] = (),
) -> BoundaryTrajectory:
    """
    Sample M_0 = m0, ..., M_{n_steps}.

    ``method="kernel"`` steps with ``step_prob`` directly; ``method="pitman"``
    reads the same law from ``stream_boundary`` and is used for long runs.
    """
    _check_length(m0, "m0")
    if n_steps < 0:
        raise DomainError("n_steps must be non-negative")
    rng = stream(seed, *key)

    if method == "kernel":
        values = np.empty(n_steps + 1, dtype=np.int64)
        values[0] = m0
        u = rng.random(n_steps)
        m = m0
        for i in range(n_steps):
            m = m + 1 if u[i] * (2 * m) < m + 1 else m - 1
            if m < 1:
                raise InvariantViolation(f"boundary length reached 0 at step {i + 1}")
            values[i + 1] = m
    elif method == "pitman":
        parts: List[np.ndarray] = []
        need = n_steps + 1
        chunk = min(DEFAULT_CHUNK, max(need, 1024))
        for block in stream_boundary(m0, rng, chunk=chunk):
            parts.append(block[:need])
            need -= parts[-1].size
            if need <= 0:
                break
        values = np.concatenate(parts)
    else:
        raise DomainError(f"unknown sampling method {method!r}")

    moves = np.diff(values).astype(np.int8)
    return BoundaryTrajectory(m0=m0, values=values, moves=moves, seed=seed_token(seed, key))


def trajectory_from_moves(m0: int, moves: MoveSequence) -> BoundaryTrajectory:
    _check_length(m0, "m0")
    values = [m0]
    for i, sign in enumerate(moves):
        if sign < 0 and values[-1] == 1:
            raise IllegalMoveError(i)
        values.append(values[-1] + sign)
    return BoundaryTrajectory(
        m0=m0,
        values=np.asarray(values, dtype=np.int64),
        moves=np.asarray(moves, dtype=np.int8),
    )


# ---------------------------------------------------------------------------
# Strip detection
# ---------------------------------------------------------------------------


class StripDetector:
    """
    Online detection of the stopping times n_t.

    Values are fed in consecutive blocks. A stop is found by counting
    (-)-moves since the previous stop; every stop is cross-checked against
    the hitting time of s - n_{t-1} = M_s + M_{n_{t-1}} and against
    max_{strip} M_i <= n_t - n_{t-1}. Only the values since the last stop are
    kept between blocks.
    """

    def __init__(self, t_max: Optional[int] = None, check: bool = True):
        self.t_max = t_max
        self.check = check
        self.times: List[int] = []
        self.boundary: List[int] = []
        self.strips_checked = 0
        self._buffer: Optional[np.ndarray] = None
        self._offset = 0  # global index of _buffer[0]

    @property
    def count(self) -> int:
        return len(self.times)

    @property
    def done(self) -> bool:
        return self.t_max is not None and self.count >= self.t_max

    def feed(self, block: np.ndarray) -> int:
        """Consume the next values of the path; returns the number of new stops."""
        block = np.asarray(block, dtype=np.int64)
        if block.size == 0 or self.done:
            return 0
        if self._buffer is None:
            self.times.append(0)
            self.boundary.append(int(block[0]))
            buf = block
        else:
            buf = np.concatenate((self._buffer, block))

        minus = np.diff(buf) < 0
        counts = np.concatenate(([0], np.cumsum(minus, dtype=np.int64)))
        start = 0
        found = 0
        while not self.done:
            m_prev = self.boundary[-1]
            target = counts[start] + m_prev
            end = int(np.searchsorted(counts, target, side="left"))
            if end >= counts.size:
                break
            if self.check:
                self._check_strip(buf, start, end, m_prev)
            self.times.append(self._offset + end)
            self.boundary.append(int(buf[end]))
            start = end
            found += 1

        self._buffer = buf[start:]
        self._offset += start
        return found

    def _check_strip(self, buf: np.ndarray, start: int, end: int, m_prev: int) -> None:
        seg = buf[start:end + 1]
        length = end - start
        # s - n_{t-1} - M_s first equals M_{n_{t-1}} at the stop
        line = np.arange(seg.size, dtype=np.int64) - seg
        hits = np.flatnonzero(line == m_prev)
        if hits.size == 0 or hits[0] != length:
            raise InvariantViolation(
                f"stop characterisations disagree on strip starting at n={self._offset + start}"
            )
        if seg[1:].max() > length:
            raise InvariantViolation(
                f"max boundary {int(seg[1:].max())} exceeds strip length {length} at n={self._offset + start}"
            )
        self.strips_checked += 1

    def stops(self) -> StripStops:
        return StripStops(times=list(self.times), boundary_at_stop=list(self.boundary))


def strip_stops(traj: BoundaryTrajectory, t_max: int) -> StripStops:
    """The first ``t_max`` stopping times n_1 = 0, ..., n_{t_max} of a trajectory."""
    if t_max < 1:
        raise DomainError("t_max must be at least 1")
    logger.info("[Chain] strip_stops called", extra={"t_max": t_max, "length": int(traj.values.size)})
    detector = StripDetector(t_max=t_max)
    detector.feed(traj.values)
    if detector.count < t_max:
        raise InsufficientLengthError(found=detector.count, wanted=t_max)
    return detector.stops()


def all_strip_stops(values: np.ndarray) -> StripStops:
    detector = StripDetector()
    detector.feed(values)
    return detector.stops()


# ---------------------------------------------------------------------------
# Vectorised growth
# ---------------------------------------------------------------------------


class BatchGrowth:
    """
    Many independent copies of the chain advanced in lock-step.

    Strip stops are detected online for every copy and checked exactly as in
    ``StripDetector``. ``history[:, t - 1]`` holds M_{n_t} and ``times[:, t - 1]``
    holds n_t for the stops reached so far.
    """

    def __init__(self, m0: int, samples: int, rng: np.random.Generator, capacity: int = 8):
        _check_length(m0, "m0")
        self.m0 = m0
        self.samples = samples
        self.rng = rng
        self.m = np.full(samples, m0, dtype=np.int64)
        self.m_stop = self.m.copy()
        self.minus = np.zeros(samples, dtype=np.int64)
        self.since = np.zeros(samples, dtype=np.int64)
        self.strip_max = np.zeros(samples, dtype=np.int64)
        self.steps = np.zeros(samples, dtype=np.int64)
        self.stops = np.ones(samples, dtype=np.int64)
        self.history = np.zeros((samples, max(2, capacity)), dtype=np.int64)
        self.times = np.zeros_like(self.history)
        self.history[:, 0] = m0
        self.strips_checked = 0

    def _grow_capacity(self, needed: int) -> None:
        cap = self.history.shape[1]
        if needed < cap:
            return
        new_cap = max(needed + 1, 2 * cap)
        for name in ("history", "times"):
            old = getattr(self, name)
            fresh = np.zeros((self.samples, new_cap), dtype=np.int64)
            fresh[:, :cap] = old
            setattr(self, name, fresh)

    def _step(self, idx: np.ndarray) -> np.ndarray:
        """One move for the copies in ``idx``; returns the copies that just completed a strip."""
        m = self.m[idx]
        plus = self.rng.random(idx.size) * (2 * m) < m + 1
        new_m = np.where(plus, m + 1, m - 1)
        if new_m.min() < 1:
            raise InvariantViolation("boundary length reached 0")
        since = self.since[idx] + 1
        smax = np.maximum(self.strip_max[idx], new_m)
        minus = self.minus[idx] + ~plus
        m_stop = self.m_stop[idx]
        done = minus == m_stop

        self.m[idx] = new_m
        self.steps[idx] += 1
        if not done.any():
            self.since[idx] = since
            self.strip_max[idx] = smax
            self.minus[idx] = minus
            return idx[:0]

        d = idx[done]
        lengths = since[done]
        ends = new_m[done]
        if np.any(lengths != ends + m_stop[done]):
            raise InvariantViolation("stop characterisations disagree")
        if np.any(smax[done] > lengths):
            raise InvariantViolation("max boundary inside a strip exceeds the strip length")
        self.strips_checked += int(d.size)

        slot = self.stops[d]
        self._grow_capacity(int(slot.max()))
        self.history[d, slot] = ends
        self.times[d, slot] = self.steps[d]
        self.stops[d] = slot + 1

        since[done] = 0
        smax[done] = 0
        minus[done] = 0
        m_stop[done] = ends
        self.since[idx] = since
        self.strip_max[idx] = smax
        self.minus[idx] = minus
        self.m_stop[idx] = m_stop
        return d

    def advance(self, steps: int) -> "BatchGrowth":
        idx = np.arange(self.samples)
        for _ in range(int(steps)):
            self._step(idx)
        return self

    def advance_to_stops(self, t: int, compact_every: int = 1024) -> "BatchGrowth":
        """Run every copy until it has reached n_t, and freeze it there."""
        if t < 1:
            raise DomainError("t must be at least 1")
        self._grow_capacity(t)
        active = np.flatnonzero(self.stops < t)
        n = 0
        while active.size:
            finished = self._step(active)
            n += 1
            if finished.size and np.any(self.stops[finished] >= t):
                active = active[self.stops[active] < t]
            elif n % compact_every == 0:
                active = active[self.stops[active] < t]
        return self

    def boundary_at(self, t: int) -> np.ndarray:
        """M_{n_t} for every copy (t is 1-based)."""
        return self.history[:, t - 1].copy()

    def stop_time(self, t: int) -> np.ndarray:
        return self.times[:, t - 1].copy()

    def stop_counts(self) -> np.ndarray:
        """t_n = max{t : n_t <= n} for the current n of every copy."""
        return self.stops.copy()


def sample_strip_endpoints(m: int, samples: int, seed: int, key: Tuple[int, ...] = ()) -> Tuple[np.ndarray, np.ndarray]:
    """Final boundary length and length of one strip started from boundary ``m``."""
    _check_length(m)
    batch = BatchGrowth(m, samples, stream(seed, *key)).advance_to_stops(2)
    return batch.boundary_at(2), batch.stop_time(2)


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def strip_kernel_exact(m: int, k: int, exact: bool = False) -> Union[float, Fraction]:
    """
    Probability that a strip started from boundary ``m`` ends at ``m + k``:
    ((m + k) / m) C(2m + k - 1, m - 1) / 2^(2m + k).
    """
    _check_length(m)
    if k < 1 - m:
        raise DomainError(f"k must be at least 1 - m = {1 - m}, got {k}")
    n = 2 * m + k
    if exact:
        return Fraction((m + k) * math.comb(n - 1, m - 1), m * 2**n)
    log_p = (
        math.log(m + k)
        - math.log(m)
        + gammaln(n)
        - gammaln(m)
        - gammaln(m + k + 1)
        - n * LOG2
    )
    return float(math.exp(log_p))


def strip_kernel_bruteforce(m: int, len_cap: int) -> StripKernelEnumeration:
    """
    Enumerate every move sequence of length <= ``len_cap`` that completes one
    strip from boundary ``m`` and accumulate exact path probabilities.

    Sequences are merged on (boundary, (-)-count), which keeps the sweep linear
    in ``len_cap`` while every path is still counted with its exact weight.
    """
    _check_length(m)
    states: Dict[Tuple[int, int], Fraction] = {(m, 0): Fraction(1)}
    probs: Dict[int, Fraction] = {}
    for _ in range(len_cap):
        nxt: Dict[Tuple[int, int], Fraction] = {}
        for (b, c), p in states.items():
            up = p * Fraction(b + 1, 2 * b)
            nxt[(b + 1, c)] = nxt.get((b + 1, c), Fraction(0)) + up
            if b > 1:
                down = p * Fraction(b - 1, 2 * b)
                if c + 1 == m:
                    k = b - 1 - m
                    probs[k] = probs.get(k, Fraction(0)) + down
                else:
                    nxt[(b - 1, c + 1)] = nxt.get((b - 1, c + 1), Fraction(0)) + down
        states = nxt
    residual = Fraction(1) - sum(probs.values(), Fraction(0))
    return StripKernelEnumeration(m=m, len_cap=len_cap, probs=dict(sorted(probs.items())), residual=residual)


def strip_kernel_table(
    m: int,
    tail: float = 1e-12,
    bruteforce_cap: Optional[int] = None,
    kernel: Optional[Callable[[int, int], float]] = None,
) -> Tuple[List[StripKernelRow], float]:
    """
    Kernel row from ``m`` for k = 1 - m, 2 - m, ... until the remaining mass
    drops below ``tail``. Returns the rows and the residual mass.
    """
    _check_length(m)
    kernel = kernel or strip_kernel_exact
    brute = strip_kernel_bruteforce(m, bruteforce_cap).probs if bruteforce_cap else {}
    rows: List[StripKernelRow] = []
    total = 0.0
    k = 1 - m
    while True:
        p = float(kernel(m, k))
        total += p
        b = brute.get(k)
        rows.append(StripKernelRow(m=m, k=k, p_exact=p, p_bruteforce=float(b) if b is not None else None))
        k += 1
        if k > 0 and (1.0 - total < tail or p < tail * 1e-6):
            break
    residual = max(0.0, 1.0 - total)
    if residual > tail:
        logger.warning("[Chain] kernel table residual above tail", extra={"m": m, "residual": residual})
    return rows, residual


# ---------------------------------------------------------------------------
# Generator coefficients
# ---------------------------------------------------------------------------


def discrete_generator_coeffs(
    m: int,
    n: int,
    eps: Optional[float] = None,
) -> Tuple[Union[float, Fraction], Union[float, Fraction], Union[float, Fraction]]:
    """
    Coefficients of the rescaled chain M / sqrt(n) with time step h = 1/n,
    evaluated at x = m / sqrt(n):

        b = (1/h) sum (y - x) K(x, dy),  sigma^2 = (1/h) sum (y - x)^2 K(x, dy),
        delta_eps = (1/h) K(x, {|y - x| > eps}).

    Exact rationals are returned when n is a perfect square. ``eps`` defaults
    to twice the jump size 1/sqrt(n).
    """
    _check_length(m)
    if n < 1:
        raise DomainError("n must be at least 1")
    root = math.isqrt(n)
    exact = root * root == n
    p_up = step_prob(m, 1, exact=exact)
    p_down = step_prob(m, -1, exact=exact)
    if exact:
        jump: Union[float, Fraction] = Fraction(1, root)
        inv_h: Union[float, Fraction] = Fraction(n)
    else:
        jump = 1.0 / math.sqrt(n)
        inv_h = float(n)

    b = inv_h * (jump * p_up - jump * p_down)
    sigma2 = inv_h * (jump * jump * p_up + jump * jump * p_down)
    threshold = float(jump) * 2 if eps is None else eps
    jumps_mass = (p_up if float(jump) > threshold else 0) + (p_down if float(jump) > threshold else 0)
    delta = inv_h * jumps_mass
    return b, sigma2, delta
