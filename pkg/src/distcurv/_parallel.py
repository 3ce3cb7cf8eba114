import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

ENV_THREADS = "DISTCURV_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(ENV_THREADS)
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def map_chunks(fn, points: np.ndarray, threads: int | None = None, min_chunk: int = 512):
    """Apply ``fn`` to contiguous row blocks of ``points`` and reassemble in order.

    ``fn`` returns an array or a tuple of arrays with one leading entry per row.
    """
    n = resolve_threads(threads)
    if n == 1 or len(points) <= min_chunk:
        return fn(points)
    blocks = np.array_split(points, min(n, max(1, len(points) // min_chunk)))
    with ThreadPoolExecutor(max_workers=n) as pool:
        parts = list(pool.map(fn, blocks))
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate([p[i] for p in parts]) for i in range(len(parts[0])))
    return np.concatenate(parts)
