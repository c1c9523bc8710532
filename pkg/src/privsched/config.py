"""Experiment configuration: a YAML schema with strict validation.

Unknown keys are rejected with their field path. Environment variables
override only the output directory (PRIVSCHED_OUTPUT_DIR) and the
parallelism degree (PRIVSCHED_PARALLELISM).
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Any

import yaml

from .rdp import DEFAULT_ALPHA_GRID, validate_grid


class ConfigError(ValueError):
    """Invalid experiment configuration; message carries the field path."""


_WORKLOAD_GENERATORS = ("microbenchmark", "weighted_two_category", "trace")
_SCHEDULER_NAMES = ("dpk", "dpf", "fcfs", "optimal")
_SCHEDULER_PARAMS = {
    "dpk": {"eta"},
    "dpf": {"n_share"},
    "fcfs": set(),
    "optimal": {"max_tasks", "node_limit"},
}

_TOP_KEYS = {"workload", "blocks", "schedulers", "mode", "batch_period",
             "seeds", "repetitions", "output_dir", "grid", "n_share",
             "horizon"}
_BLOCK_KEYS = {"initial", "arrival_per_tick", "max_blocks", "epsilon",
               "delta", "unlock_steps"}
_WORKLOAD_KEYS = {"generator", "params", "file"}


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _no_unknown(mapping: dict, allowed: set[str], path: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    _require(not unknown, path, f"unknown key(s) {unknown}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; `raw` round-trips to YAML."""

    raw: dict

    @property
    def workload(self) -> dict:
        return self.raw["workload"]

    @property
    def blocks(self) -> dict:
        return self.raw.get("blocks", {})

    @property
    def schedulers(self) -> list[dict]:
        return self.raw["schedulers"]

    @property
    def mode(self) -> str:
        return self.raw.get("mode", "offline")

    @property
    def batch_period(self) -> float:
        t = self.raw.get("batch_period", 1)
        return math.inf if t == "inf" else float(t)

    @property
    def seeds(self) -> list[int]:
        if "seeds" in self.raw:
            return list(self.raw["seeds"])
        return list(range(int(self.raw.get("repetitions", 1))))

    @property
    def output_dir(self) -> str:
        return os.environ.get("PRIVSCHED_OUTPUT_DIR",
                              self.raw.get("output_dir", "results"))

    @property
    def parallelism(self) -> int:
        return int(os.environ.get("PRIVSCHED_PARALLELISM", "1"))

    @property
    def grid(self) -> tuple[float, ...]:
        return validate_grid(self.raw.get("grid", DEFAULT_ALPHA_GRID))

    @property
    def n_share(self) -> int:
        return int(self.raw.get("n_share", 50))

    @property
    def horizon(self):
        return self.raw.get("horizon")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.raw, sort_keys=True)


def validate_config(doc: Any) -> ExperimentConfig:
    _require(isinstance(doc, dict), "<root>", "config must be a mapping")
    _no_unknown(doc, _TOP_KEYS, "<root>")

    _require("workload" in doc, "workload", "required section missing")
    wl = doc["workload"]
    _require(isinstance(wl, dict), "workload", "must be a mapping")
    _no_unknown(wl, _WORKLOAD_KEYS, "workload")
    has_gen = "generator" in wl
    has_file = "file" in wl
    _require(has_gen != has_file, "workload",
             "exactly one of 'generator' or 'file' is required")
    if has_gen:
        _require(wl["generator"] in _WORKLOAD_GENERATORS,
                 "workload.generator",
                 f"must be one of {_WORKLOAD_GENERATORS}")
        params = wl.get("params", {})
        _require(isinstance(params, dict), "workload.params",
                 "must be a mapping")
        if wl["generator"] == "trace":
            _require("file" in params or "records" in params,
                     "workload.params", "trace generator needs 'file'")

    blocks = doc.get("blocks", {})
    _require(isinstance(blocks, dict), "blocks", "must be a mapping")
    _no_unknown(blocks, _BLOCK_KEYS, "blocks")
    if "epsilon" in blocks:
        _require(blocks["epsilon"] > 0, "blocks.epsilon", "must be > 0")
    if "delta" in blocks:
        _require(0 < blocks["delta"] < 1, "blocks.delta",
                 "must be in (0, 1)")
    if "unlock_steps" in blocks:
        _require(int(blocks["unlock_steps"]) >= 1, "blocks.unlock_steps",
                 "must be >= 1")

    _require("schedulers" in doc, "schedulers", "required section missing")
    scheds = doc["schedulers"]
    _require(isinstance(scheds, list) and scheds, "schedulers",
             "must be a non-empty list")
    for i, s in enumerate(scheds):
        path = f"schedulers[{i}]"
        _require(isinstance(s, dict) and "name" in s, path,
                 "must be a mapping with a 'name'")
        _require(s["name"] in _SCHEDULER_NAMES, f"{path}.name",
                 f"must be one of {_SCHEDULER_NAMES}")
        _no_unknown(s, _SCHEDULER_PARAMS[s["name"]] | {"name"}, path)

    mode = doc.get("mode", "offline")
    _require(mode in ("offline", "online"), "mode",
             "must be 'offline' or 'online'")
    if "batch_period" in doc:
        t = doc["batch_period"]
        ok = t == "inf" or (isinstance(t, int) and t >= 1)
        _require(ok, "batch_period", "must be a positive integer or 'inf'")
    if "seeds" in doc:
        _require(isinstance(doc["seeds"], list) and doc["seeds"],
                 "seeds", "must be a non-empty list of integers")
        _require("repetitions" not in doc, "repetitions",
                 "give either 'seeds' or 'repetitions', not both")
    if "repetitions" in doc:
        _require(isinstance(doc["repetitions"], int)
                 and doc["repetitions"] >= 1,
                 "repetitions", "must be a positive integer")
    if "grid" in doc:
        try:
            validate_grid(doc["grid"])
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None
    return ExperimentConfig(doc)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return validate_config(doc)
