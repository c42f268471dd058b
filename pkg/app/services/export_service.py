"""Trace CSV and summary JSON writers.

Trace columns (one row per planner tick):
    t, step, stance (0 left / 1 right), s,
    px, pz, theta, q1..q4, dpx, dpz, dtheta, dq1..dq4,
    x_sc, l_s, y1..y4, dy1..dy4, tau1..tau4, u_cmd,
    impact, clamped, planner_held
Floats carry 17 significant digits.
"""

from __future__ import annotations

import json
import math
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd

from app.services.hybrid_sim_service import STATE_COLUMNS, ImpactRecord, SimTrace

TRACE_COLUMNS: List[str] = (
    ["t", "step", "stance", "s"]
    + list(STATE_COLUMNS)
    + [f"d{c}" for c in STATE_COLUMNS]
    + ["x_sc", "l_s"]
    + [f"y{i}" for i in range(1, 5)]
    + [f"dy{i}" for i in range(1, 5)]
    + [f"tau{i}" for i in range(1, 5)]
    + ["u_cmd", "impact", "clamped", "planner_held"]
)
INT_COLUMNS = ("step", "stance", "impact", "clamped", "planner_held")


def trace_frame(trace: SimTrace) -> pd.DataFrame:
    df = pd.DataFrame(trace.samples, columns=TRACE_COLUMNS)
    for col in INT_COLUMNS:
        df[col] = df[col].astype("int64")
    return df


def write_trace_csv(trace: SimTrace, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    trace_frame(trace).to_csv(p, index=False, float_format="%.17g")
    return p


IMPACT_COLUMNS: List[str] = [f.name for f in fields(ImpactRecord)] + ["momentum_jump"]


def impacts_frame(trace: SimTrace) -> pd.DataFrame:
    rows = [dict(vars(r), momentum_jump=r.momentum_jump) for r in trace.impacts]
    return pd.DataFrame(rows, columns=IMPACT_COLUMNS)


def write_impacts_csv(trace: SimTrace, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    impacts_frame(trace).to_csv(p, index=False, float_format="%.17g")
    return p


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return _json_safe(value.item())
    return value


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(_json_safe(payload), indent=2, allow_nan=False)


def write_json(payload: Dict[str, Any], path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps(payload) + "\n", encoding="utf-8")
    return p
