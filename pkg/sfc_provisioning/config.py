"""
sfc_provisioning/config.py

Run configuration for the simulator engines.

Values are layered, later layers winning:
    settings.SFC_DEFAULTS  <  environment  <  --config overrides file  <  CLI flags

The overrides file is JSON with the same nesting as SFC_DEFAULTS, e.g.
    {"learner": {"episodes": 500}, "ga": {"generations": 50}}
Unknown keys are rejected.
"""

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from django.conf import settings
from pydantic import BaseModel, ConfigDict, ValidationError

from .ga_baseline import GaConfig
from .mdp_learner import LearnerConfig
from .mfg_core import TIE_BREAKS


class ConfigError(ValueError):
    """The overrides file could not be read or failed validation."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MfgOverrides(_Strict):
    congestion_weight: Optional[float] = None
    tol: Optional[float] = None
    max_iters: Optional[int] = None
    damping: Optional[float] = None
    tie_break: Optional[str] = None
    literal_fpk: Optional[bool] = None


class LearnerOverrides(_Strict):
    episodes: Optional[int] = None
    actor_lr: Optional[float] = None
    critic_lr: Optional[float] = None
    temperature_start: Optional[float] = None
    temperature_end: Optional[float] = None
    congestion_weight: Optional[float] = None
    value_bound: Optional[float] = None
    reward_scale: Optional[float] = None


class GaOverrides(_Strict):
    population_size: Optional[int] = None
    generations: Optional[int] = None
    crossover_rate: Optional[float] = None
    mutation_rate: Optional[float] = None
    tournament_size: Optional[int] = None
    infeasibility_penalty: Optional[float] = None


class OverridesSchema(_Strict):
    reference_packet_size: Optional[float] = None
    enumeration_limit: Optional[int] = None
    workers: Optional[int] = None
    mfg: Optional[MfgOverrides] = None
    learner: Optional[LearnerOverrides] = None
    ga: Optional[GaOverrides] = None


@dataclass
class MfgConfig:
    congestion_weight: Optional[float] = None
    tol: float = 1e-9
    max_iters: int = 200
    damping: float = 0.5
    tie_break: str = "lowest"
    literal_fpk: bool = False

    def validate(self):
        if self.tie_break not in TIE_BREAKS:
            raise ConfigError(
                f"tie_break must be one of {', '.join(TIE_BREAKS)}, got '{self.tie_break}'"
            )


@dataclass
class RunConfig:
    output_dir: Path
    golden_path: Path
    # None trains at the scenario's own reference packet size
    reference_packet_size: Optional[float] = None
    enumeration_limit: int = 1_000_000
    workers: int = 1
    mfg: MfgConfig = field(default_factory=MfgConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    ga: GaConfig = field(default_factory=GaConfig)

    def learner_config(self, seed: int) -> LearnerConfig:
        return LearnerConfig(**{**self.learner.__dict__, "seed": seed})

    def ga_config(self, seed: int) -> GaConfig:
        return GaConfig(**{**self.ga.__dict__, "seed": seed})


def _merge(base: Dict[str, Any], updates: Mapping[str, Any]) -> Dict[str, Any]:
    for key, value in updates.items():
        if isinstance(value, Mapping) and isinstance(base.get(key), dict):
            _merge(base[key], value)
        else:
            base[key] = value
    return base


def _drop_none(values: Mapping[str, Any]) -> Dict[str, Any]:
    out = {}
    for key, value in values.items():
        if isinstance(value, Mapping):
            value = _drop_none(value)
            if not value:
                continue
        if value is not None:
            out[key] = value
    return out


def read_overrides(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Could not read overrides {path}: {e}") from e
    try:
        return OverridesSchema.model_validate(document).model_dump(exclude_unset=True)
    except ValidationError as e:
        raise ConfigError(f"Invalid overrides file {path}: {e}") from e


def _optional_float(value) -> Optional[float]:
    return None if value is None else float(value)


def _env_defaults() -> Dict[str, Any]:
    out: Dict[str, Any] = {}
    workers = os.getenv("SFC_WORKERS")
    if workers:
        out["workers"] = int(workers)
    return out


def load_run_config(
    overrides_path=None,
    cli: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Build a RunConfig from settings, environment, the optional overrides
    file and explicit CLI values (None values in ``cli`` are ignored).
    """
    values = copy.deepcopy(getattr(settings, "SFC_DEFAULTS", {}))
    _merge(values, _env_defaults())
    if overrides_path:
        _merge(values, read_overrides(overrides_path))
    if cli:
        _merge(values, _drop_none(cli))

    output_dir = values.pop("output_dir", None) or os.getenv(
        "SFC_OUTPUT_DIR", getattr(settings, "SFC_OUTPUT_DIR", "results")
    )
    golden_path = os.getenv(
        "SFC_GOLDEN_PATH", getattr(settings, "SFC_GOLDEN_PATH", "golden_values.json")
    )

    config = RunConfig(
        output_dir=Path(output_dir),
        golden_path=Path(golden_path),
        reference_packet_size=_optional_float(values.get("reference_packet_size")),
        enumeration_limit=int(values.get("enumeration_limit", 1_000_000)),
        workers=int(values.get("workers", 1)),
        mfg=MfgConfig(**values.get("mfg", {})),
        learner=LearnerConfig(**values.get("learner", {})),
        ga=GaConfig(**values.get("ga", {})),
    )
    config.mfg.validate()
    try:
        config.learner.validate()
        config.ga.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e
    if config.workers < 1:
        raise ConfigError("workers must be at least 1")
    if config.reference_packet_size is not None and not config.reference_packet_size > 0:
        raise ConfigError("reference_packet_size must be positive")
    return config
