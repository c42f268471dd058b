from __future__ import annotations

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="DRSWALK_")

    # artifacts (traces, summaries, gait files, ledger) all live under this directory
    output_dir: str = "runs"
    ledger_filename: str = "drswalk_ledger.db"

    # thread pool used for multi-start optimization and parallel scenarios
    max_workers: int = 2

    log_level: str = "INFO"


settings = Settings()
