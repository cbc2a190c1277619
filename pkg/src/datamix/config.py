"""One config for the whole pipeline.

Values merge from four layers, strongest last applied first in lookups:
command-line flags over EMMA_* environment variables over the --config file
over the shipped default_config.json. Unknown keys anywhere are an error, not
a warning; so is an unknown EMMA_ variable, since a typo there would silently
change nothing otherwise.

The shipped defaults file is the declared source of defaults (the window
length L, gamma, lambda and friends); the dataclass mirrors it and a test
keeps the two from drifting apart.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .metrics import SMOOTHNESS_MODES
from .quality import FilterConfig
from .sampler import SamplerConfig, StrataMode

ENV_PREFIX = "EMMA_"

# JSON/env key -> dataclass attribute, where they differ
_KEY_ATTR = {"lambda": "lam"}
_ATTR_KEY = {v: k for k, v in _KEY_ATTR.items()}

_INT_KEYS = frozenset({"window_len", "seed", "total_steps", "phase_switch_step", "batch_size"})
_FLOAT_KEYS = frozenset({"min_mat_pix", "max_sq_rel", "min_overall_sim", "gamma", "lambda", "alpha"})
_STR_KEYS = frozenset({"smoothness", "strata_mode"})
_NULLABLE = frozenset({"min_mat_pix", "max_sq_rel", "min_overall_sim", "phase_switch_step"})
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


@dataclass(frozen=True)
class PipelineConfig:
    window_len: int = 50
    smoothness: str = "full"
    min_mat_pix: float | None = None
    max_sq_rel: float | None = None
    min_overall_sim: float | None = None
    gamma: float = 0.1
    lam: float = 1.0
    alpha: float = 0.5
    seed: int = 0
    total_steps: int = 1000
    phase_switch_step: int | None = None
    batch_size: int = 64
    strata_mode: str = "per_source"

    def __post_init__(self) -> None:
        if self.window_len < 1:
            raise ConfigError(f"window_len must be >= 1, got {self.window_len}")
        if self.smoothness not in SMOOTHNESS_MODES:
            raise ConfigError(
                f"smoothness must be one of {SMOOTHNESS_MODES}, got {self.smoothness!r}"
            )
        try:
            StrataMode(self.strata_mode)
        except ValueError:
            raise ConfigError(
                f"strata_mode must be one of "
                f"{[m.value for m in StrataMode]}, got {self.strata_mode!r}"
            ) from None
        # constructing the sub-configs runs their validation
        self.filter_config()
        self.sampler_config()

    def filter_config(self) -> FilterConfig:
        try:
            return FilterConfig(
                min_mat_pix=self.min_mat_pix,
                max_sq_rel=self.max_sq_rel,
                min_overall_sim=self.min_overall_sim,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def sampler_config(self) -> SamplerConfig:
        return SamplerConfig(
            gamma=self.gamma,
            lam=self.lam,
            alpha=self.alpha,
            seed=self.seed,
            total_steps=self.total_steps,
            phase_switch_step=self.phase_switch_step,
            batch_size=self.batch_size,
            strata_mode=StrataMode(self.strata_mode),
        )


def shipped_defaults() -> dict[str, Any]:
    text = resources.files("datamix").joinpath("default_config.json").read_text("utf-8")
    return json.loads(text)


def _coerce(key: str, value: Any, where: str) -> Any:
    if value is None:
        if key in _NULLABLE:
            return None
        raise ConfigError(f"{where}: {key} may not be null")
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: {key} must be an integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: {key} must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: {key} must be a string, got {value!r}")
    return value


def _coerce_env(key: str, text: str, where: str) -> Any:
    if key in _NULLABLE and text.strip().lower() in ("", "null", "none"):
        return None
    try:
        if key in _INT_KEYS:
            return int(text)
        if key in _FLOAT_KEYS:
            return float(text)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} for {key}") from None
    return text


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> PipelineConfig:
    """Merge defaults <- config file <- EMMA_* environment <- flag overrides.

    `overrides` holds already-typed values keyed by config name; pass only
    the flags the user actually set.
    """
    merged = dict(shipped_defaults())

    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            obj = json.loads(p.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p}: invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise ConfigError(f"config file {p}: top level must be an object")
        unknown = set(obj) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"config file {p}: unknown keys {sorted(unknown)}")
        for key, value in obj.items():
            merged[key] = _coerce(key, value, str(p))

    if env is not None:
        for name in sorted(env):
            if not name.startswith(ENV_PREFIX):
                continue
            key = name[len(ENV_PREFIX) :].lower()
            if key not in KNOWN_KEYS:
                raise ConfigError(f"unknown environment variable {name}")
            merged[key] = _coerce_env(key, env[name], name)

    if overrides:
        unknown = set(overrides) - KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown config overrides {sorted(unknown)}")
        merged.update(overrides)

    kwargs = {_KEY_ATTR.get(k, k): v for k, v in merged.items()}
    return PipelineConfig(**kwargs)


def sampler_snapshot(cfg: SamplerConfig) -> dict[str, Any]:
    """Config fields carried in weight-table and plan headers, fixed order."""
    return {
        "gamma": cfg.gamma,
        "lambda": cfg.lam,
        "alpha": cfg.alpha,
        "seed": cfg.seed,
        "total_steps": cfg.total_steps,
        "phase_switch_step": cfg.phase_switch_step,
        "batch_size": cfg.batch_size,
        "strata_mode": cfg.strata_mode.value,
    }
