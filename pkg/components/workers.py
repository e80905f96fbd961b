import logging
from multiprocessing import Pool

logger = logging.getLogger(__name__)


def parallel_map(fn, items, threads: int = 1) -> list:
    """Ordered map of a picklable ``fn`` over ``items`` on up to ``threads`` processes.

    Results always come back in item order, whatever order workers finish in.
    """
    items = list(items)
    workers = min(max(1, int(threads)), len(items)) if items else 1
    if workers == 1:
        return [fn(item) for item in items]

    chunk = max(1, len(items) // (workers * 4))
    logger.debug("Mapping %d items over %d workers (chunksize %d)", len(items), workers, chunk)
    with Pool(processes=workers) as pool:
        return pool.map(fn, items, chunksize=chunk)
