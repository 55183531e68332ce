"""Order-preserving helper for optional thread parallelism."""

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, workers=1):
    """Map fn over items, returning results in input order.

    Work is chunked by the caller; only the scheduling changes with the
    worker count, never the result.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=int(workers)) as pool:
        return list(pool.map(fn, items))
