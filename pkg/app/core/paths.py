from __future__ import annotations

from pathlib import Path
from typing import Optional

from .config import settings


def repo_root() -> Path:
    # assumes app/ is at repo root/app
    return Path(__file__).resolve().parents[2]


def output_root(out_dir: Optional[str | Path] = None) -> Path:
    base = Path(out_dir) if out_dir is not None else Path(settings.output_dir)
    if not base.is_absolute():
        base = Path.cwd() / base
    return base


def ledger_path(out_dir: Optional[str | Path] = None) -> Path:
    return output_root(out_dir) / settings.ledger_filename


def gait_path(out_dir: Optional[str | Path] = None, name: str = "gait") -> Path:
    return output_root(out_dir) / f"{name}.json"


def trace_path(out_dir: Optional[str | Path] = None, name: str = "trace") -> Path:
    return output_root(out_dir) / f"{name}.csv"


def summary_path(out_dir: Optional[str | Path] = None, name: str = "summary") -> Path:
    return output_root(out_dir) / f"{name}.json"


def report_path(out_dir: Optional[str | Path] = None) -> Path:
    return output_root(out_dir) / "acceptance.json"


def impacts_path(out_dir: Optional[str | Path] = None, name: str = "impacts") -> Path:
    return output_root(out_dir) / f"{name}.csv"
