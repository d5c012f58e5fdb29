from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import nbinom

from src.state.branching_state import GwState
from src.tools.boundary_chain import strip_kernel_exact
from src.tools.branching import (
    conditioned_kernel,
    conditioned_row,
    gw_kernel,
    offspring_prob,
    sample_conditioned_batch,
    sample_conditioned_chain,
    slice_marginal_dp,
)
from src.utils.errors import DomainError


def test_offspring_law_is_critical_geometric():
    probs = [offspring_prob(k, exact=True) for k in range(60)]

    assert probs[0] == Fraction(1, 2)
    assert float(sum(k * p for k, p in enumerate(probs))) == pytest.approx(1.0, abs=1e-12)


def test_gw_kernel_values():
    assert gw_kernel(1, 0, exact=True) == Fraction(1, 2)
    assert gw_kernel(2, 1, exact=True) == Fraction(2, 8)
    assert gw_kernel(5, 7) == pytest.approx(float(gw_kernel(5, 7, exact=True)), rel=1e-12)


def test_gw_kernel_rejects_extinct_parent():
    with pytest.raises(DomainError):
        gw_kernel(0, 1)


def test_conditioned_kernel_is_the_strip_kernel():
    for l in range(1, 6):
        for m in range(1, 15):
            assert conditioned_kernel(l, m, exact=True) == strip_kernel_exact(l, m - l, exact=True)


def test_conditioned_kernel_is_shifted_negative_binomial():
    for m in range(1, 20):
        assert conditioned_kernel(3, m) == pytest.approx(nbinom.pmf(m - 1, 4, 0.5), rel=1e-10)


def test_conditioned_kernel_domain():
    with pytest.raises(DomainError):
        conditioned_kernel(0, 1)
    with pytest.raises(DomainError):
        conditioned_kernel(2, 0)


def test_conditioned_row_mass():
    ms, probs, residual = conditioned_row(4, tail=1e-12)

    assert ms[0] == 1
    assert residual < 1e-11
    assert float(np.sum(ms * probs)) == pytest.approx(6.0, abs=1e-8)


def test_gw_state_rejects_zero_population_when_conditioned():
    with pytest.raises(ValueError):
        GwState(generation=1, population=0)
    assert GwState(generation=1, population=0, conditioned=False).population == 0


def test_slice_marginal_first_generation():
    marginal = slice_marginal_dp(1, 1, trunc=30, exact=True)

    assert marginal.probs[1] == Fraction(1, 4)
    assert marginal.probs[3] == Fraction(3, 16)
    assert slice_marginal_dp(1, 0).probs == {1: 1.0}


def test_slice_marginal_mean_grows_by_two():
    marginal = slice_marginal_dp(2, 3)

    mean = sum(m * p for m, p in marginal.probs.items())
    assert mean == pytest.approx(2 + 2 * 3, abs=1e-8)
    assert marginal.residual < 1e-12


def test_two_generations_compose_the_size_biased_kernel():
    marginal = slice_marginal_dp(1, 2, trunc=60, exact=True)

    for m in range(1, 11):
        composed = sum(
            (conditioned_kernel(1, l, exact=True) * conditioned_kernel(l, m, exact=True) for l in range(1, 61)),
            Fraction(0),
        )
        assert marginal.probs[m] == composed


def test_exact_and_float_marginals_agree():
    exact = slice_marginal_dp(2, 2, trunc=40, exact=True)
    approx = slice_marginal_dp(2, 2, trunc=40)

    for m in range(1, 12):
        assert approx.probs[m] == pytest.approx(float(exact.probs[m]), rel=1e-9)


def test_conditioned_chain_path():
    path = sample_conditioned_chain(3, 10, seed=2)

    assert len(path) == 11
    assert path[0] == 3
    assert min(path) >= 1
    assert path == sample_conditioned_chain(3, 10, seed=2)


def test_samplers_agree_on_one_step():
    inverse_cdf = np.asarray([sample_conditioned_chain(3, 1, seed=6, key=(i,))[1] for i in range(3000)])
    batch = sample_conditioned_batch(3, 1, 20000, seed=6)[:, 1]

    assert inverse_cdf.mean() == pytest.approx(5.0, abs=0.3)
    assert batch.mean() == pytest.approx(5.0, abs=0.1)


def test_conditioned_batch_mean():
    paths = sample_conditioned_batch(1, 5, 20000, seed=1)

    assert paths.shape == (20000, 6)
    assert np.all(paths[:, 0] == 1)
    assert paths[:, 5].mean() == pytest.approx(11.0, abs=0.5)
