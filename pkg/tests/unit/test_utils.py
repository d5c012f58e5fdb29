import json

import numpy as np

from settings import AppSettings
from src.utils.io import read_csv, write_csv, write_json
from src.utils.loaders import experiment_defaults, thresholds
from src.utils.pool import map_ordered
from src.utils.rng import batch_sizes, derive_seed, seed_token, stream


def test_streams_are_reproducible_and_independent():
    a = stream(7, 0).random(5)
    b = stream(7, 0).random(5)
    c = stream(7, 1).random(5)

    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_seed_tokens():
    assert seed_token(7, (1,)) == seed_token(7, (1,))
    assert seed_token(7, (1,)) != seed_token(7, (2,))
    assert 0 <= derive_seed(7, 1) < 2**63


def test_batch_sizes():
    assert batch_sizes(10, 4) == [4, 4, 2]
    assert batch_sizes(8, 4) == [4, 4]
    assert batch_sizes(0, 4) == []


def test_map_ordered_keeps_input_order():
    assert map_ordered(lambda x: x * x, range(20), threads=4) == [x * x for x in range(20)]
    assert map_ordered(lambda x: x, [], threads=2) == []


def test_pool_size_from_settings():
    assert AppSettings(threads=3).pool_size() == 3
    assert AppSettings(threads=None).pool_size() >= 1


def test_csv_round_trip_keeps_config(tmp_path):
    path = write_csv(str(tmp_path / "out.csv"), ["n", "M_n"], [[0, 1], [1, 2]], config={"seed": 7})

    text = (tmp_path / "out.csv").read_text()
    loaded = read_csv(path)

    assert text.startswith('# config: {"seed": 7}\n')
    assert loaded["config"] == {"seed": 7}
    assert loaded["header"] == ["n", "M_n"]
    assert loaded["rows"] == [["0", "1"], ["1", "2"]]


def test_json_is_sorted_and_numpy_aware(tmp_path):
    write_json(str(tmp_path / "out.json"), {"b": np.int64(2), "a": [np.float64(0.5)]})

    text = (tmp_path / "out.json").read_text()

    assert json.loads(text) == {"a": [0.5], "b": 2}
    assert text.index('"a"') < text.index('"b"')
    assert not list(tmp_path.glob(".tmp-*"))


def test_quick_level_scales_sample_sizes():
    full = experiment_defaults("strip-kernel", "full")
    quick = experiment_defaults("strip-kernel", "quick")

    assert full["samples"] == 100000
    assert quick["samples"] == 10000
    assert quick["m"] == full["m"] == 3


def test_level_overrides():
    assert experiment_defaults("martingales", "quick")["n_steps"] == 100000
    assert experiment_defaults("martingales", "full")["n_steps"] == 1000000


def test_thresholds_per_level():
    assert thresholds("full")["ks_max"] == 0.03
    assert thresholds("quick")["ks_max"] > thresholds("full")["ks_max"]
    assert thresholds("quick")["p_min"] == 0.001


def test_branching_threshold_is_tighter_than_generic_ks():
    assert thresholds("full")["branching_ks_max"] == 0.02
    assert thresholds("full")["branching_ks_max"] < thresholds("full")["ks_max"]
    assert thresholds("quick")["branching_ks_max"] > thresholds("full")["branching_ks_max"]


def test_growth_trend_defaults():
    assert experiment_defaults("diffusion-check", "full")["n_grid"] == [1000, 10000, 100000]
    assert experiment_defaults("diffusion-check", "full")["trend_samples"] == 2000
    assert experiment_defaults("diffusion-check", "quick")["trend_samples"] == 200
    assert experiment_defaults("diffusion-check", "quick")["n_grid"] == [250, 1000, 4000]
