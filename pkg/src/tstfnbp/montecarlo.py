"""Fan-out of Monte Carlo batches over worker streams.

Worker ``i`` draws from ``RngStream(seed, i)``; results are reduced in
stream order, so output depends only on ``(seed, workers)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .samplers import RngStream

__all__ = ["split_counts", "run_streams"]


def split_counts(n: int, workers: int) -> list[int]:
    """Near-equal batch sizes; the first ``n % workers`` batches get one extra."""
    if n < 1 or workers < 1:
        raise ValueError("n and workers must be positive")
    base, extra = divmod(n, workers)
    return [base + (i < extra) for i in range(workers) if base + (i < extra) > 0]


def run_streams(task: Callable[[RngStream, int], np.ndarray], n_samples: int, seed: int,
                workers: int = 1) -> np.ndarray:
    """Run ``task(stream, count)`` per worker and stack the results along axis 0."""
    counts = split_counts(n_samples, workers)
    streams = [RngStream(seed, i) for i in range(len(counts))]
    if len(counts) == 1:
        parts: Sequence[np.ndarray] = [task(streams[0], counts[0])]
    else:
        # numpy releases the GIL in the heavy kernels, threads are enough
        with ThreadPoolExecutor(max_workers=len(counts)) as pool:
            parts = list(pool.map(task, streams, counts))
    return np.concatenate(parts, axis=0)
