"""Run configuration: JSON file with defaults, canonical hashing, metadata.

Every artifact a subcommand writes carries the hash of the fully merged
config plus the seed, so artifacts from different settings never silently
mix.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os

from .groundtruth import DEFAULT_Q, DEFAULT_R0
from .model import ModelConfig, TrainConfig

DEFAULTS: dict = {
    "seed": 0,
    "model": ModelConfig().to_dict(),
    "train": TrainConfig().to_dict(),
    # nu/gamma tuned on standardized features: clean-corpus acceptance must
    # clear 0.9 while motion-burst windows stay rejected.
    "quality": {"nu": 0.03, "gamma": 0.05, "max_train_windows": 2000, "train_on": "clean"},
    "groundtruth": {"q": DEFAULT_Q, "r0": DEFAULT_R0},
    "sampling": {"mode": "fixed", "windows_per_segment": 1},
}


def merge_defaults(overrides: dict | None) -> dict:
    """Deep-merge a partial config over the defaults; unknown keys rejected."""
    merged = copy.deepcopy(DEFAULTS)
    if not overrides:
        return merged
    if not isinstance(overrides, dict):
        raise ValueError("config root must be a JSON object")
    for key, val in overrides.items():
        if key not in merged:
            raise ValueError(f"unknown config section: {key}")
        if isinstance(merged[key], dict):
            if not isinstance(val, dict):
                raise ValueError(f"config section {key} must be an object")
            unknown = set(val) - set(merged[key])
            if unknown:
                raise ValueError(f"unknown keys in config section {key}: {sorted(unknown)}")
            merged[key].update(val)
        else:
            merged[key] = val
    # Round-trip through the typed configs so invalid values fail here.
    ModelConfig.from_dict(merged["model"])
    TrainConfig.from_dict(merged["train"])
    if merged["sampling"]["mode"] not in ("fixed", "random"):
        raise ValueError("sampling.mode must be 'fixed' or 'random'")
    if merged["quality"]["train_on"] not in ("clean", "all"):
        raise ValueError("quality.train_on must be 'clean' or 'all'")
    return merged


def load_config(path: str | None) -> dict:
    if path is None:
        return merge_defaults(None)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ValueError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"config file {path} is not valid JSON: {exc}") from exc
    return merge_defaults(raw)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()[:16]


def artifact_meta(config: dict) -> dict:
    return {"config_hash": config_hash(config), "seed": config["seed"]}


def worker_threads() -> int:
    """Worker cap from RRFORGE_THREADS; 1 (serial) when unset or invalid."""
    raw = os.environ.get("RRFORGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1
