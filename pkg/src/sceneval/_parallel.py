"""Thread-pool helpers for row-blocked numeric kernels.

Thread count comes from the SCENE_EVAL_THREADS environment variable (default
1). Every kernel parallelised here maps independent row blocks to independent
output slices, so results are bit-identical for any thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np


def thread_count() -> int:
    raw = os.environ.get("SCENE_EVAL_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SCENE_EVAL_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def iter_blocks(n: int, block: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + block, n)) for lo in range(0, n, block)]


def map_row_blocks(
    fn: Callable[[int, int], np.ndarray],
    n_rows: int,
    block: int = 64,
) -> list[np.ndarray]:
    """Apply fn(lo, hi) to consecutive row blocks, in order.

    fn must depend only on its block; blocks may run on worker threads but the
    returned list is always in block order.
    """
    blocks = iter_blocks(n_rows, block)
    workers = thread_count()
    if workers == 1 or len(blocks) <= 1:
        return [fn(lo, hi) for lo, hi in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(b[0], b[1]), blocks))


def concat_row_blocks(parts: Sequence[np.ndarray]) -> np.ndarray:
    if len(parts) == 1:
        return parts[0]
    return np.concatenate(parts, axis=0)
