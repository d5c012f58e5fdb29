import os
from functools import lru_cache
from typing import Any, Dict

import yaml


EXPERIMENTS_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "../config/experiments.yaml")


@lru_cache(maxsize=4)
def load_experiments_config(path: str = EXPERIMENTS_CONFIG_PATH) -> Dict[str, Any]:
    """Load the per-subcommand defaults and per-level thresholds."""
    with open(path, encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


def experiment_defaults(name: str, level: str = "quick") -> Dict[str, Any]:
    """
    Defaults for one experiment at one level.

    The ``levels`` block may override any key of an experiment block;
    ``sample_scale`` multiplies every key ending in ``samples`` or
    ``trajectories``.
    """
    config = load_experiments_config()
    block = dict(config.get("experiments", {}).get(name, {}))
    level_block = config.get("levels", {}).get(level, {})
    scale = float(level_block.get("sample_scale", 1.0))
    for key, value in list(block.items()):
        if isinstance(value, int) and (key.endswith("samples") or key.endswith("trajectories") or key == "runs"):
            block[key] = max(1, int(round(value * scale)))
    block.update(level_block.get("overrides", {}).get(name, {}))
    return block


def thresholds(level: str = "quick") -> Dict[str, Any]:
    config = load_experiments_config()
    merged = dict(config.get("thresholds", {}))
    merged.update(config.get("levels", {}).get(level, {}).get("thresholds", {}))
    return merged
