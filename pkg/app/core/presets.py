from __future__ import annotations

import copy
from typing import Any, Dict


# Both cases share the robot, the bounds, the eigenvalue cap and the controller gains.
_COMMON: Dict[str, Any] = {
    "optimizer": {
        "u_min": -0.7,
        "u_max": 0.7,
        "x_min": {"x_sc": -0.7, "l_s": -40.0},
        "x_max": {"x_sc": 0.7, "l_s": 40.0},
        "eigen_cap": 0.69,
    },
    "scenario": {
        "duration_steps": 20,
        "physics_dt": 1e-4,
        "planner_rate": 100.0,
        "gains": {"kp": 2500.0, "kd": 100.0},
        "pattern": {"phi4": [0.0, 0.075, 0.05, 0.045, 0.05, 0.075, 0.0], "phi3_order": 6, "trunk_pitch": 0.0},
    },
}

PRESETS: Dict[str, Dict[str, Any]] = {
    # walking forward on a surface swaying with period 0.4 s
    "caseA": {
        "gait": {"H": 0.81, "m": 39.8, "g": 9.81, "T": 0.4, "surface": {"amplitude": 0.03, "period": 0.4, "phase": 0.0}},
        "optimizer": {"gait_style": "ForwardWalk"},
    },
    # stepping in place on a surface swaying with period 0.2 s
    "caseB": {
        "gait": {"H": 0.81, "m": 39.8, "g": 9.81, "T": 0.2, "surface": {"amplitude": 0.03, "period": 0.2, "phase": 0.0}},
        "optimizer": {"gait_style": "StepInPlace"},
    },
}


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def preset_dict(name: str) -> Dict[str, Any]:
    if name not in PRESETS:
        raise KeyError(name)
    merged = deep_merge(_COMMON, PRESETS[name])
    merged["preset"] = name
    return merged
