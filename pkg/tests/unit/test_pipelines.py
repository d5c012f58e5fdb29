import json

import pytest

from src.cli import main
from src.pipelines import experiments as ex
from src.pipelines.verify import assert_passed, verify_suite
from src.tools.boundary_chain import strip_kernel_exact
from src.utils.errors import AcceptanceFailure
from src.utils.loaders import thresholds


def test_exact_checks_pass():
    assert ex.check_kernel_bruteforce(max_len=12)["status"] == "pass"
    assert ex.check_cross_dual(m_max=4, k_max=10)["status"] == "pass"
    assert ex.check_generator_coeffs(m_max=10, n_max=400)["status"] == "pass"
    assert ex.check_martingale_exact(m_max=10**4)["status"] == "pass"


def test_bijection_check_counts_sequences():
    result = ex.check_bijection(2, 2, 10)

    assert result["status"] == "pass"
    assert result["sequences"] > 0


def test_strip_kernel_check_rejects_wrong_kernel():
    result = ex.check_strip_kernel(3, 20000, seed=1, kernel=lambda m, k: strip_kernel_exact(m, k + 1))

    assert result["status"] == "fail"
    assert result["reason"] == "chi_square_rejected"


def test_verify_exact_subset(tmp_path):
    summary = verify_suite("quick", seed=7, output_dir=str(tmp_path), threads=1, only=[1, 2, 5, 11, 12])

    assert summary.status == "pass"
    assert [c.id for c in summary.checks] == [1, 2, 5, 11, 12]
    written = json.loads((tmp_path / "verify_summary.json").read_text())
    assert written["status"] == "pass"
    assert written["thresholds"] == thresholds("quick")
    assert_passed(summary)


def test_verify_summary_file_is_reproducible(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    first.mkdir()
    second.mkdir()

    verify_suite("quick", seed=7, output_dir=str(first), threads=1, only=[1, 2, 5, 11, 12])
    summary = verify_suite("quick", seed=7, output_dir=str(second), threads=2, only=[1, 2, 5, 11, 12])

    text = (first / "verify_summary.json").read_text()
    assert text == (second / "verify_summary.json").read_text()
    assert "seconds" not in text
    assert all(c.seconds >= 0.0 for c in summary.checks)


def test_verify_catches_sabotaged_kernel():
    summary = verify_suite("quick", seed=7, only=[3], kernel=lambda m, k: strip_kernel_exact(m, k + 1))

    assert summary.status == "fail"
    assert summary.checks[0].detail["chi_square"]["p"] < 1e-6
    with pytest.raises(AcceptanceFailure, match="strip_monte_carlo"):
        assert_passed(summary)


def test_verify_reports_errors_as_status():
    summary = verify_suite("quick", seed=7, only=[3], kernel=lambda m, k: 1 / 0)

    assert summary.checks[0].status == "error"
    assert "ZeroDivisionError" in summary.checks[0].detail["reason"]


def test_slice_dist_writes_marginal_table(tmp_path):
    code = main(
        [
            "slice-dist",
            "--j-max", "2",
            "--samples", "2000",
            "--t", "8",
            "--slice-samples", "2000",
            "--output-dir", str(tmp_path),
        ]
    )

    assert code in (0, 1)
    report = json.loads((tmp_path / "slice_dist_report.json").read_text())
    assert [g["j"] for g in report["marginals"]["generations"]] == [1, 2]
    assert (tmp_path / "slice_marginals.csv").exists()
    assert report["branching"]["ks_max"] == thresholds("quick")["branching_ks_max"]
    assert report["thresholds"] == thresholds("quick")


def test_diffusion_check_writes_samples_with_sidecars(tmp_path):
    code = main(
        [
            "diffusion-check",
            "--n", "400",
            "--samples", "500",
            "--t", "16",
            "--slice-samples", "500",
            "--dt", "0.001",
            "--n-grid", "100,400",
            "--trend-samples", "300",
            "--output-dir", str(tmp_path),
        ]
    )

    assert code in (0, 1)
    for name in ("growth_chain", "growth_sde", "slice_chain", "slice_sde"):
        assert (tmp_path / f"{name}.csv").exists()
        sidecar = json.loads((tmp_path / f"{name}.json").read_text())
        assert sidecar["count"] == 500
    report = json.loads((tmp_path / "diffusion_report.json").read_text())
    assert "ks_closed_form" in report["growth"]
    assert [row["n"] for row in report["trend"]["trend"]] == [100, 400]
    assert "ks_max" in report["thresholds"]


def test_martingales_command(tmp_path):
    code = main(["martingales", "--m-max", "5000", "--runs", "2", "--n-steps", "20000", "--output-dir", str(tmp_path)])

    assert code == 0
    report = json.loads((tmp_path / "martingale_report.json").read_text())["report"]
    assert report["exact_zero"] is True
    assert [c["n"] for c in report["checkpoints"]] == [10000]


def test_growth_trend_reports_one_distance_per_n():
    result = ex.check_growth_trend([1600, 100, 400], 1.0, 1, 1000, seed=3, dt=1e-3)

    assert [row["n"] for row in result["trend"]] == [100, 400, 1600]
    assert all(0.0 <= row["ks"] <= 1.0 for row in result["trend"])
    assert result["trend_ok"] is True
    assert result["status"] == "pass"


def test_growth_trend_fails_when_distance_grows(monkeypatch):
    distances = iter([0.01, 0.05, 0.5])
    monkeypatch.setattr(ex, "ks_distance", lambda a, b: next(distances))

    result = ex.check_growth_trend([100, 200, 400], 1.0, 1, 400, seed=3, dt=1e-2)

    assert result["status"] == "fail"
    assert result["reason"] == "ks_increasing_with_n"
    assert [row["ks"] for row in result["trend"]] == [0.01, 0.05, 0.5]
