"""Keyed, counter-based random streams.

Every random decision in the package is drawn from a Philox stream whose key
comes from ``(seed, purpose)`` and whose counter block comes from an integer
index (a node id, a split number, ...). Output therefore never depends on how
work is chunked across threads.
"""

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(seed, *labels):
    """Hash ``seed`` and string ``labels`` into a 64-bit child seed."""
    text = "/".join([str(int(seed))] + [str(lab) for lab in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _key(seed, purpose):
    text = f"{int(seed)}/{purpose}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(text).digest()[:16], "little")


def keyed_stream(seed, purpose, index=0):
    """Return an independent generator for ``(seed, purpose, index)``.

    The index selects a disjoint 2**64-block region of the Philox counter
    space, so streams for different indices never overlap.
    """
    if index < 0:
        raise ValueError("stream index must be non-negative")
    counter = [0, index & _MASK64, index >> 64, 0]
    return np.random.Generator(np.random.Philox(key=_key(seed, purpose), counter=counter))


def resolve_threads(threads=None):
    """Worker count from the argument, then ``MLGF_THREADS``, then 1."""
    if threads is None:
        env = os.environ.get("MLGF_THREADS")
        threads = int(env) if env else 1
    threads = int(threads)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def chunked_map(fn, n_items, threads=1, chunks_per_thread=4):
    """Apply ``fn(start, stop)`` over ``range(n_items)`` and return results in order.

    Results are concatenated by the caller; the order is always ascending in
    ``start`` regardless of ``threads``.
    """
    threads = resolve_threads(threads)
    if n_items == 0:
        return []
    if threads == 1:
        return [fn(0, n_items)]
    n_chunks = min(n_items, threads * chunks_per_thread)
    bounds = np.linspace(0, n_items, n_chunks + 1).astype(int)
    spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), spans))
