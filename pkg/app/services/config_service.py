from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from app.core.errors import ConfigError
from app.core.presets import PRESETS, deep_merge, preset_dict
from app.schemas.optimizer import GaitSolution
from app.schemas.run_config import RunConfig


def _read_json(path: str | Path) -> Dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"Config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Unreadable JSON in {p}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return data


def build_run_config(data: Optional[Dict[str, Any]] = None, *, preset: Optional[str] = None) -> RunConfig:
    """Validate a raw config dict, deep-merged over the named preset (argument wins over the dict's own key)."""
    data = dict(data or {})
    name = preset or data.get("preset")
    if name and name != "custom":
        if name not in PRESETS:
            raise ConfigError(f"Unknown preset: {name}")
        data = deep_merge(preset_dict(name), {k: v for k, v in data.items() if k != "preset"})
        data["preset"] = name
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config: {e}") from e


def load_run_config(
    path: Optional[str | Path] = None,
    *,
    preset: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Read a JSON config (or nothing) and apply command-line overrides before validation."""
    data = _read_json(path) if path else {}
    if overrides:
        data = deep_merge(data, overrides)
    return build_run_config(data, preset=preset)


def dump_run_config(cfg: RunConfig) -> str:
    return cfg.model_dump_json(indent=2)


def load_gait_solution(path: str | Path) -> GaitSolution:
    data = _read_json(path)
    try:
        return GaitSolution.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid gait file {path}: {e}") from e


def save_gait_solution(solution: GaitSolution, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(solution.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return p
