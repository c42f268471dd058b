from __future__ import annotations

import logging
import traceback
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, List, Optional, TypeVar

from sqlalchemy.orm import sessionmaker

from app.core.config import settings
from app.core.errors import exit_code_for
from app.repositories import run_repo

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

_executor = ThreadPoolExecutor(max_workers=settings.max_workers)


def map_ordered(fn: Callable[[T], R], items: Iterable[T], *, max_workers: Optional[int] = None) -> List[R]:
    """Run fn over items on a thread pool; results come back in submission order."""
    items = list(items)
    workers = max(1, min(max_workers or settings.max_workers, len(items) or 1))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, item) for item in items]
        return [f.result() for f in futures]


def submit(factory: sessionmaker, run_id: int, fn: Callable[..., Any], *args, **kwargs) -> None:
    """Fire-and-forget ledger-tracked job.

    fn returns (result dict, exit code). Each job gets its own DB session.
    """

    def _wrapped():
        db = factory()
        try:
            run_repo.mark_running(db, run_id)
            db.commit()
            result, exit_code = fn(*args, **kwargs)
            run_repo.close_run(db, run_id, result=result, exit_code=exit_code)
            db.commit()
        except Exception as e:
            db.rollback()
            logger.exception("background run %s failed", run_id)
            run_repo.close_run(
                db,
                run_id,
                result={"trace": traceback.format_exc()[:4000]},
                error=str(e) or type(e).__name__,
                exit_code=exit_code_for(e),
            )
            db.commit()
        finally:
            db.close()

    _executor.submit(_wrapped)
