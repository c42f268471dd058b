from __future__ import annotations

from typing import Generator, Optional

from fastapi import Depends
from sqlalchemy.orm import Session, sessionmaker

from app.core.database import make_engine, make_session_factory
from app.db.init_db import init_db

_factory: Optional[sessionmaker] = None


def get_session_factory() -> sessionmaker:
    global _factory
    if _factory is None:
        engine = make_engine()
        init_db(engine)
        _factory = make_session_factory(engine)
    return _factory


def get_db(factory: sessionmaker = Depends(get_session_factory)) -> Generator[Session, None, None]:
    db = factory()
    try:
        yield db
    finally:
        db.close()
