from __future__ import annotations

from pathlib import Path
from typing import Optional

from .paths import output_root


def bootstrap_filesystem(out_dir: Optional[str | Path] = None) -> Path:
    root = output_root(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    return root
