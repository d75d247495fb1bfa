"""Order-preserving map over worker processes, capped by FBL_THREADS."""
import os
from concurrent.futures import ProcessPoolExecutor


def worker_count():
    try:
        n = int(os.environ.get("FBL_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def pmap(fn, items, chunksize=1):
    """list(map(fn, items)), in parallel when FBL_THREADS > 1; fn must be picklable."""
    items = list(items)
    nw = worker_count()
    if nw <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=nw) as ex:
        return list(ex.map(fn, items, chunksize=chunksize))
