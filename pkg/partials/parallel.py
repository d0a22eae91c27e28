"""Order-preserving worker pool for independent numeric evaluations."""

import logging
from concurrent.futures import ThreadPoolExecutor

from django.conf import settings

logger = logging.getLogger(__name__)


def worker_count() -> int:
    if settings.configured:
        return max(1, int(getattr(settings, 'MIXCHECK_THREADS', 1)))
    return 1


def pmap(fn, items, workers=None) -> list:
    """
    Map fn over items and return the results in input order.

    Reductions are left to the caller so that they always run in index
    order, whatever the number of workers.
    """
    items = list(items)
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) < 2:
        return [fn(item) for item in items]
    logger.debug(f"pmap: {len(items)} items on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
