from __future__ import annotations

from sqlalchemy.engine import Engine

from .base import Base

# Ensure ORM models are imported so Base.metadata is populated before create_all().
from . import models  # noqa: F401


def init_db(engine: Engine) -> None:
    Base.metadata.create_all(bind=engine)
