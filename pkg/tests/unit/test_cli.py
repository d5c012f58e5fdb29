import json

import pytest

from src.cli import build_parser, main, resolve_config, run
from src.tools.boundary_chain import strip_kernel_exact
from src.utils.io import read_csv


def test_grow_writes_both_triangulations(tmp_path):
    export = tmp_path / "tri.json"

    code = main(["grow", "--m0", "3", "--moves", "+++-+--", "--export", str(export), "--output-dir", str(tmp_path)])

    assert code == 0
    grown = json.loads(export.read_text())
    causal = json.loads((tmp_path / "tri.causal.json").read_text())
    assert grown["kind"] == "almost_causal"
    assert grown["slice_sizes"] == [3, 4]
    assert grown["config"]["moves"] == "+++-+--"
    assert causal["strips"] == [{"down_degrees": [2, 1, 1], "shift": 0}]


def test_grow_rejects_illegal_moves(tmp_path):
    assert main(["grow", "--m0", "1", "--moves", "-", "--output-dir", str(tmp_path)]) == 2


def test_invalid_values_are_usage_errors(tmp_path):
    assert main(["grow", "--m0", "0", "--moves", "+", "--output-dir", str(tmp_path)]) == 2


def test_unknown_flag_exits_with_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["grow", "--bogus"])

    assert exc.value.code == 2


def test_unwritable_output_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")

    assert main(["sample", "--n-steps", "10", "--output-dir", str(blocker / "sub")]) == 2


def test_sample_csv_is_deterministic(tmp_path):
    args = ["sample", "--m0", "2", "--n-steps", "300", "--seed", "5", "--format", "csv"]

    assert main(args + ["--output-dir", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(args + ["--output-dir", str(tmp_path / "b"), "--threads", "4"]) == 0

    a = read_csv(str(tmp_path / "a" / "trajectory.csv"))
    b = read_csv(str(tmp_path / "b" / "trajectory.csv"))
    assert a["rows"] == b["rows"]
    assert a["header"] == ["n", "M_n", "is_strip_stop", "t"]
    assert a["rows"][0] == ["0", "2", "1", "1"]
    assert a["config"]["seed"] == 5
    assert "threads" not in a["config"]


def test_config_file_and_flag_precedence(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"m0": 3, "moves": "+-", "seed": 11}))
    parser = build_parser()

    resolved = resolve_config(parser.parse_args(["grow", "--config", str(config), "--moves", "+++-+--"]))

    assert resolved.m0 == 3
    assert resolved.seed == 11
    assert resolved.moves == "+++-+--"


def test_yaml_defaults_fill_unset_fields():
    resolved = resolve_config(build_parser().parse_args(["strip-kernel", "--level", "quick"]))

    assert resolved.m == 3
    assert resolved.samples == 10000
    assert resolved.m0 == 1


def test_strip_kernel_run_passes(tmp_path):
    code = main(["strip-kernel", "--m", "3", "--samples", "5000", "--output-dir", str(tmp_path)])

    assert code == 0
    table = read_csv(str(tmp_path / "strip_kernel.csv"))
    assert table["header"] == ["m", "k", "p_exact", "p_bruteforce"]
    assert table["rows"][0][:2] == ["3", "-2"]
    report = json.loads((tmp_path / "strip_kernel_report.json").read_text())
    assert report["thresholds"]["p_min"] == 0.001


def test_off_by_one_kernel_fails(tmp_path):
    config = resolve_config(
        build_parser().parse_args(["strip-kernel", "--m", "3", "--samples", "20000", "--output-dir", str(tmp_path)])
    )

    code = run(config, kernel=lambda m, k: strip_kernel_exact(m, k + 1))

    assert code == 1
    report = json.loads((tmp_path / "strip_kernel_report.json").read_text())
    assert report["chi_square"]["p"] < 1e-6


def test_n_grid_flag_parses_comma_separated_integers():
    resolved = resolve_config(build_parser().parse_args(["diffusion-check", "--n-grid", "100,400,1600"]))

    assert resolved.n_grid == [100, 400, 1600]


def test_n_grid_flag_rejects_non_integers():
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["diffusion-check", "--n-grid", "100,abc"])

    assert exc.value.code == 2
