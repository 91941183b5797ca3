"""Small shared helpers: seeding, thread budget, parallel map."""

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def derive_rng(seed, *keys):
    """Generator seeded from ``seed`` and any mix of ints and strings.

    Used so that every parallel task gets its own stream that depends only on
    its identity, never on scheduling order or worker count.
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            entropy.append(zlib.crc32(key.encode("utf-8")))
        else:
            entropy.append(int(key) & 0xFFFFFFFF)
    return np.random.default_rng(entropy)


def derive_seed(seed, *keys):
    return int(derive_rng(seed, *keys).integers(0, 2**31 - 1))


def resolve_threads(n_threads=None):
    if n_threads is None:
        env = os.environ.get("MAIT_THREADS")
        n_threads = int(env) if env else 1
    return max(1, int(n_threads))


def parallel_map(fn, items, n_threads=1):
    """Ordered map over ``items`` using up to ``n_threads`` threads."""
    items = list(items)
    n_threads = resolve_threads(n_threads)
    if n_threads == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_threads) as pool:
        return list(pool.map(fn, items))


def linear_quantile(values, q):
    """Quantile with linear interpolation at index (n - 1) * q."""
    return np.quantile(np.asarray(values, dtype=float), q, method="linear")


def percentile_interval(samples, confidence):
    lo = (1.0 - confidence) / 2.0
    return (float(linear_quantile(samples, lo)), float(linear_quantile(samples, 1.0 - lo)))
