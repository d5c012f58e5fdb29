from fractions import Fraction

import numpy as np
import pytest

from src.tools.boundary_chain import trajectory_from_moves
from src.tools.stats import (
    chi_square,
    default_m_grid,
    duality_ratio,
    duality_report,
    dyadic_checkpoints,
    exact_residuals,
    fractal_dimension,
    histogram,
    ks_distance,
    martingale_residuals,
)
from src.utils.errors import DomainError


def _alternating(length: int):
    # boundary 1, 2, 1, 2, ...: every strip is a single (+)(-) pair
    return lambda index: iter([np.tile(np.array([1, 2], dtype=np.int64), length)])


def test_ks_distance_of_identical_samples_is_zero():
    sample = np.linspace(0.0, 1.0, 101)

    assert ks_distance(sample, sample) == 0.0
    assert ks_distance(np.random.default_rng(0).uniform(size=2000), "uniform") < 0.05


def test_ks_distance_rejects_empty_sample():
    with pytest.raises(DomainError):
        ks_distance([], [1.0])


def test_chi_square_accepts_matching_counts():
    probs = {0: 0.25, 1: 0.5, 2: 0.25}

    result = chi_square({0: 2500, 1: 5000, 2: 2500}, probs)

    assert result.statistic == pytest.approx(0.0)
    assert result.p == pytest.approx(1.0)
    assert result.dof == 2


def test_chi_square_rejects_shifted_counts():
    probs = {0: 0.25, 1: 0.5, 2: 0.25}

    result = chi_square({1: 2500, 2: 5000, 3: 2500}, probs)

    assert result.p < 1e-12


def test_chi_square_pools_truncated_tail():
    probs = {0: 0.5, 1: 0.25, 2: 0.125}

    result = chi_square({0: 500, 1: 250, 2: 125, 7: 125}, probs)

    assert result.bins == 4
    assert result.statistic == pytest.approx(0.0)


def test_histogram_counts():
    assert histogram([3, 1, 3, 3]) == {1: 1, 3: 3}


def test_fractal_dimension_of_alternating_chain():
    report = fractal_dimension(2, 256, seed=0, t_min=64, threads=1, stream_factory=_alternating(2000))

    assert report.t_grid == [64, 128, 256]
    assert report.median_slope == pytest.approx(1.0, abs=0.05)
    assert report.trajectories[0].n_t == [126, 254, 510]
    assert report.strips_checked == 2 * 255


def test_fractal_dimension_grid_must_be_dyadic():
    with pytest.raises(DomainError):
        fractal_dimension(1, 100, seed=0)


def test_fractal_dimension_is_thread_invariant():
    one = fractal_dimension(3, 128, seed=5, t_min=32, threads=1)
    many = fractal_dimension(3, 128, seed=5, t_min=32, threads=3)

    assert one.model_dump() == many.model_dump()


def test_duality_ratio_of_alternating_chain():
    traj = trajectory_from_moves(1, [1, -1] * 500)

    ratio = duality_ratio(traj)

    assert ratio.size == 1000
    assert ratio[0] == pytest.approx(4.0)
    # t_n = n/2 + 1 and the clock is n/8 + n/4
    assert ratio[-1] == pytest.approx(501 / 375)


def test_dyadic_checkpoints():
    assert dyadic_checkpoints(5000) == [1024, 2048, 4096]


def test_duality_report_is_thread_invariant():
    one = duality_report(4, 4096, seed=3, threads=1)
    many = duality_report(4, 4096, seed=3, threads=2)

    assert one.model_dump() == many.model_dump()
    assert len(one.runs) == 4
    assert 0.0 <= one.fraction_within <= 1.0
    assert len(one.dyadic_gaps) == 2


@pytest.mark.parametrize("m", [1, 2, 17, 999, 10**6])
def test_exact_residuals_vanish(m):
    square, additive, second = exact_residuals(m)

    assert square == 0
    assert additive == 0
    assert second == Fraction(4 * (m * m - 1))


def test_default_grid():
    grid = default_m_grid(10**6)

    assert grid[:3] == [1, 2, 3]
    assert grid[-1] == 10**6
    assert len(grid) == len(set(grid))


def test_martingale_report_without_runs():
    report = martingale_residuals(default_m_grid(10**4))

    assert report.exact_zero
    assert report.second_moment_ok
    assert report.max_abs_residual_square < 1e-6
    assert report.max_abs_residual_additive < 1e-6
    assert report.checkpoints == []
    assert report.decreasing is None


def test_martingale_report_with_runs():
    report = martingale_residuals([1, 2, 3], runs=3, n_max=20000, seed=1, checkpoints=[10000, 20000], threads=1)

    assert [c.n for c in report.checkpoints] == [10000, 20000]
    assert all(c.median_boundary > 0 for c in report.checkpoints)
    assert report.decreasing in (True, False)
