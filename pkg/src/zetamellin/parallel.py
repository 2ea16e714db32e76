"""Deterministic chunked map over a process pool.

Work is always cut into the same fixed-size chunks, whatever the worker
count, and results are reassembled in chunk order. Each chunk is computed by
the same vectorised call, so outputs are bit-identical for any ``workers``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

DEFAULT_CHUNK = 4096


def chunked_map(func: Callable[..., np.ndarray], values: np.ndarray, *args,
                workers: int = 1, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """Apply ``func(values[i:i+chunk], *args)`` to consecutive chunks and concatenate."""
    values = np.asarray(values)
    if values.size == 0:
        return func(values, *args)
    pieces: Sequence[np.ndarray] = [values[i:i + chunk] for i in range(0, len(values), chunk)]
    if workers <= 1 or len(pieces) == 1:
        results = [func(p, *args) for p in pieces]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(func, pieces, *([a] * len(pieces) for a in args)))
    return np.concatenate(results)
