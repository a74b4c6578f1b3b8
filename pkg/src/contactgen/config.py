"""Declarative run configuration: one YAML file drives every subcommand.

The file is a nested mapping with these sections (all optional):

    embodiment: fingers | arms | arms_soft
    physics:        PhysicalParams field overrides
    randomization:  RandomizationSpec field overrides (ranges as [lo, hi])
    cem:            CemConfig field overrides
    weights:        CostWeights field overrides
    retarget:       margin, max_iters
    success:        pos_tol, rot_tol, hold_time
    generate:       mode, episodes, workers, out_dir, control_hz,
                    execution_fraction, timeout_factor, settle_time, replay_hold
    server:         host, port, demo_dir, ui_dir, realtime
    demos:          list of demo file paths (defaults to the built-in suite)

Unknown keys anywhere are rejected: a typo must fail loudly, not silently run
with defaults. Command-line flags override file values; the CONTACTGEN_CONFIG
environment variable supplies the default file path.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .datagen import RandomizationSpec
from .dynamics import PhysicalParams, arms_physics
from .embodiments import Embodiment, get_embodiment
from .trajopt import CemConfig, CostWeights, SuccessSpec

ENV_VAR = "CONTACTGEN_CONFIG"


class ConfigError(ValueError):
    """Invalid or unknown configuration input; maps to exit code 2."""


_SECTIONS = {
    "embodiment",
    "physics",
    "randomization",
    "cem",
    "weights",
    "retarget",
    "success",
    "generate",
    "server",
    "demos",
}
_RETARGET_KEYS = {"margin", "max_iters"}
_GENERATE_KEYS = {
    "mode",
    "episodes",
    "workers",
    "out_dir",
    "control_hz",
    "execution_fraction",
    "timeout_factor",
    "settle_time",
    "replay_hold",
}
_SERVER_KEYS = {"host", "port", "demo_dir", "ui_dir", "realtime"}


def _check_keys(section: str, given: dict, allowed: set[str]) -> None:
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(f"unknown {section} keys: {sorted(unknown)}")


def _dataclass_overrides(section: str, cls, given: dict) -> dict:
    fields = {f.name: f for f in dataclasses.fields(cls)}
    _check_keys(section, given, set(fields))
    out = {}
    for k, v in given.items():
        # ranges arrive from YAML as lists; the dataclasses expect tuples
        if isinstance(v, list):
            v = tuple(v)
        out[k] = v
    return out


@dataclass
class RunConfig:
    """Validated, typed view of one configuration file plus flag overrides."""

    embodiment_name: str = "fingers"
    physics: dict = field(default_factory=dict)
    randomization: dict = field(default_factory=dict)
    cem: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    retarget: dict = field(default_factory=dict)
    success: dict = field(default_factory=dict)
    generate: dict = field(default_factory=dict)
    server: dict = field(default_factory=dict)
    demos: list[str] = field(default_factory=list)

    def embodiment(self) -> Embodiment:
        try:
            return get_embodiment(self.embodiment_name)
        except KeyError as exc:
            raise ConfigError(f"unknown embodiment {self.embodiment_name!r}") from exc

    def physical_params(self) -> PhysicalParams:
        base = arms_physics() if self.embodiment().kind == 1 else PhysicalParams()
        try:
            return dataclasses.replace(base, **self.physics)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad physics value: {exc}") from exc

    def randomization_spec(self) -> RandomizationSpec:
        seed = self.randomization.get("master_seed", 0)
        base = RandomizationSpec.for_embodiment(self.embodiment(), master_seed=seed)
        try:
            return dataclasses.replace(base, **self.randomization)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad randomization value: {exc}") from exc

    def cem_config(self) -> CemConfig:
        base = CemConfig.for_embodiment(self.embodiment())
        try:
            return dataclasses.replace(base, **self.cem)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad cem value: {exc}") from exc

    def cost_weights(self) -> CostWeights:
        base = CostWeights.for_embodiment(self.embodiment())
        try:
            return dataclasses.replace(base, **self.weights)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad weights value: {exc}") from exc

    def success_spec(self) -> SuccessSpec:
        base = SuccessSpec.for_embodiment(self.embodiment())
        try:
            return dataclasses.replace(base, **self.success)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad success value: {exc}") from exc


def _validate(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys("top-level", raw, _SECTIONS)
    cfg = RunConfig()
    if "embodiment" in raw:
        if not isinstance(raw["embodiment"], str):
            raise ConfigError("embodiment must be a string")
        cfg.embodiment_name = raw["embodiment"]
    for section, cls in (
        ("physics", PhysicalParams),
        ("randomization", RandomizationSpec),
        ("cem", CemConfig),
        ("weights", CostWeights),
        ("success", SuccessSpec),
    ):
        given = raw.get(section) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"{section} must be a mapping")
        setattr(cfg, section, _dataclass_overrides(section, cls, given))
    for section, allowed in (
        ("retarget", _RETARGET_KEYS),
        ("generate", _GENERATE_KEYS),
        ("server", _SERVER_KEYS),
    ):
        given = raw.get(section) or {}
        if not isinstance(given, dict):
            raise ConfigError(f"{section} must be a mapping")
        _check_keys(section, given, allowed)
        setattr(cfg, section, dict(given))
    demos = raw.get("demos") or []
    if not isinstance(demos, list) or not all(isinstance(d, str) for d in demos):
        raise ConfigError("demos must be a list of file paths")
    cfg.demos = demos
    # eagerly build every typed object so bad values fail at load time
    cfg.physical_params()
    cfg.randomization_spec()
    cfg.cem_config()
    cfg.cost_weights()
    cfg.success_spec()
    return cfg


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Load and validate a config file; `overrides` are {section: {key: value}}
    (or {"embodiment": name}) applied on top, as command-line flags do."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            loaded = yaml.safe_load(p.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError("config root must be a mapping")
        raw = loaded
    for section, value in (overrides or {}).items():
        if isinstance(value, dict):
            merged = dict(raw.get(section) or {})
            merged.update({k: v for k, v in value.items() if v is not None})
            raw[section] = merged
        elif value is not None:
            raw[section] = value
    return _validate(raw)
