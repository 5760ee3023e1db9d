"""Monte Carlo plumbing: batch means, replicate merging, slope fits, worker fan-out."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np


def batch_means(x, batches: int = 32) -> tuple[float, float]:
    """Mean and batch-means standard error of a (correlated) series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n == 0:
        return math.nan, math.nan
    mean = float(x.mean())
    b = min(batches, n // 2)
    if b < 2:
        return mean, math.nan
    size = n // b
    bm = x[: b * size].reshape(b, size).mean(axis=1)
    return mean, float(bm.std(ddof=1) / math.sqrt(b))


def merge(values, ses) -> tuple[float, float]:
    """Equal-weight mean of replicate estimates and its standard error."""
    values = np.asarray(values, dtype=float)
    ses = np.asarray(ses, dtype=float)
    r = values.size
    return float(values.mean()), float(math.sqrt(np.sum(ses ** 2)) / r)


def spread_se(values) -> float:
    """Between-replicate standard error (nan for a single replicate)."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return math.nan
    return float(values.std(ddof=1) / math.sqrt(values.size))


def combined_se(*ses) -> float:
    return float(math.sqrt(sum(s * s for s in ses)))


def ls_slope(x, y) -> tuple[float, float]:
    """Least-squares slope and its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, y - y.mean()) / sxx)
    if x.size <= 2:
        return slope, math.nan
    resid = y - y.mean() - slope * xc
    return slope, float(math.sqrt(np.dot(resid, resid) / (x.size - 2) / sxx))


def default_workers() -> int:
    return os.cpu_count() or 1


def map_replicates(fn, seeds, workers: int = 1, **kwargs) -> list:
    """Run ``fn(seed, **kwargs)`` per seed; results come back sorted by seed."""
    seeds = sorted(int(s) for s in seeds)
    if workers <= 1 or len(seeds) <= 1:
        results = [fn(s, **kwargs) for s in seeds]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            futures = [pool.submit(fn, s, **kwargs) for s in seeds]
            results = [f.result() for f in futures]
    return results
