"""
Critical Galton-Watson chain with geometric offspring p_k = 2^{-(k+1)} and its
size-biased version (conditioned on non-extinction).

Generation j of the branching chain is slice j + 1 of the triangulation, so
eta_0 = k_1 = m0 and the one-step size-biased kernel from l to m is the strip
kernel from boundary l to boundary m.
"""

import logging
import math
from fractions import Fraction
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import gammaln
from scipy.stats import nbinom

from src.state.branching_state import GwState, SliceMarginal
from src.utils.errors import DomainError
from src.utils.rng import stream


logger = logging.getLogger(__name__)

LOG2 = math.log(2.0)


def offspring_prob(k: int, exact: bool = False) -> Union[float, Fraction]:
    if k < 0:
        raise DomainError("offspring count must be non-negative")
    if exact:
        return Fraction(1, 2 ** (k + 1))
    return 0.5 ** (k + 1)


def gw_kernel(l: int, k: int, exact: bool = False) -> Union[float, Fraction]:
    """P(eta_{j+1} = k | eta_j = l) = C(k + l - 1, k) / 2^(k + l)."""
    if l < 1:
        raise DomainError("gw_kernel needs l >= 1; state 0 is absorbing")
    if k < 0:
        raise DomainError("k must be non-negative")
    if exact:
        return Fraction(math.comb(k + l - 1, k), 2 ** (k + l))
    log_p = gammaln(k + l) - gammaln(k + 1) - gammaln(l) - (k + l) * LOG2
    return float(math.exp(log_p))


def conditioned_kernel(l: int, m: int, exact: bool = False) -> Union[float, Fraction]:
    """Size-biased kernel (m / l) gw_kernel(l, m)."""
    if l < 1:
        raise DomainError("l must be at least 1")
    if m < 1:
        raise DomainError("the conditioned chain never visits 0")
    if exact:
        return Fraction(m, l) * gw_kernel(l, m, exact=True)
    return m / l * float(gw_kernel(l, m))


def conditioned_row(l: int, tail: float = 1e-14) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Support points and probabilities of conditioned_kernel(l, .) up to the
    point where the remaining mass is below ``tail``.

    conditioned_kernel(l, .) is the law of 1 + NegBin(l + 1, 1/2), which
    gives the cut-off directly.
    """
    if l < 1:
        raise DomainError("l must be at least 1")
    dist = nbinom(l + 1, 0.5)
    top = int(dist.isf(tail)) + 2
    ms = np.arange(1, top + 2)
    probs = ms / l * np.exp(gammaln(ms + l) - gammaln(ms + 1) - gammaln(l) - (ms + l) * LOG2)
    return ms, probs, max(0.0, 1.0 - float(probs.sum()))


def default_trunc(m0: int, j: int) -> int:
    return 40 * (j + m0) + 64


def slice_marginal_dp(m0: int, j: int, trunc: Optional[int] = None, exact: bool = False) -> SliceMarginal:
    """
    P(k_{j+1} = m) for the triangulation grown from boundary m0: the law of
    eta_j under the unconditioned chain started at m0, computed by iterated
    convolution on {0, ..., trunc}, times m / m0.
    """
    if m0 < 1:
        raise DomainError("m0 must be at least 1")
    if j < 0:
        raise DomainError("j must be non-negative")
    trunc = trunc or default_trunc(m0, j)
    if trunc < m0:
        raise DomainError("trunc must be at least m0")

    if exact:
        dist = [Fraction(0)] * (trunc + 1)
        dist[m0] = Fraction(1)
        for _ in range(j):
            nxt = [Fraction(0)] * (trunc + 1)
            nxt[0] = dist[0]
            for l in range(1, trunc + 1):
                if dist[l] == 0:
                    continue
                for k in range(trunc + 1):
                    nxt[k] += dist[l] * gw_kernel(l, k, exact=True)
            dist = nxt
        probs = {m: Fraction(m, m0) * dist[m] for m in range(1, trunc + 1) if dist[m] != 0}
        residual: Union[float, Fraction] = Fraction(1) - sum(probs.values(), Fraction(0))
    else:
        ls = np.arange(1, trunc + 1)
        ks = np.arange(trunc + 1)
        kernel = np.zeros((trunc + 1, trunc + 1))
        kernel[0, 0] = 1.0
        kernel[1:, :] = nbinom.pmf(ks[None, :], ls[:, None], 0.5)
        dist = np.zeros(trunc + 1)
        dist[m0] = 1.0
        for _ in range(j):
            dist = dist @ kernel
        weights = np.arange(trunc + 1) / m0 * dist
        probs = {m: float(weights[m]) for m in range(1, trunc + 1) if weights[m] > 0.0}
        residual = max(0.0, 1.0 - float(weights[1:].sum()))
        if residual > 1e-12:
            logger.warning(
                "[Branching] slice marginal residual above 1e-12",
                extra={"m0": m0, "j": j, "trunc": trunc, "residual": residual},
            )
    return SliceMarginal(m0=m0, j=j, trunc=trunc, probs=probs, residual=residual)


def sample_conditioned_chain(m0: int, t: int, seed: int, tail: float = 1e-14, key: Tuple[int, ...] = ()) -> List[int]:
    """eta_0 = m0, ..., eta_t by inverse-CDF steps of the size-biased kernel."""
    if m0 < 1:
        raise DomainError("m0 must be at least 1")
    if t < 0:
        raise DomainError("t must be non-negative")
    rng = stream(seed, *key)
    path = [GwState(generation=0, population=m0)]
    for gen in range(1, t + 1):
        ms, probs, _ = conditioned_row(path[-1].population, tail=tail)
        cdf = np.cumsum(probs)
        idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        path.append(GwState(generation=gen, population=int(ms[min(idx, ms.size - 1)])))
    return [s.population for s in path]


def sample_conditioned_batch(m0: int, t: int, samples: int, seed: int, key: Tuple[int, ...] = ()) -> np.ndarray:
    """
    ``samples`` independent paths eta_0..eta_t as an array of shape
    (samples, t + 1), stepping with eta' = 1 + NegBin(eta + 1, 1/2).
    """
    if m0 < 1:
        raise DomainError("m0 must be at least 1")
    rng = stream(seed, *key)
    out = np.empty((samples, t + 1), dtype=np.int64)
    out[:, 0] = m0
    for gen in range(1, t + 1):
        out[:, gen] = 1 + rng.negative_binomial(out[:, gen - 1] + 1, 0.5)
    return out
