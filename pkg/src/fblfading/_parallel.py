"""Deterministic chunked Monte Carlo collection, optionally multi-process.

Chunk i always draws from stream ``base.shifted(i)`` and results are
concatenated in chunk order, so output is a pure function of the seed and
chunk size, independent of worker count or scheduling.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np

from .matkit import RngStream

DEFAULT_CHUNK_SIZE = 32768


def _run_one(chunk_fn, base: RngStream, spec):
    index, count = spec
    return chunk_fn(count, base.shifted(index))


def run_chunked(
    chunk_fn,
    total: int,
    base: RngStream,
    *,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    workers: int = 1,
) -> tuple[np.ndarray, dict]:
    """Collect ``total`` draws from ``chunk_fn(count, stream)``.

    ``chunk_fn`` must be picklable (top-level function or partial thereof)
    and return ``(values, diagnostics_dict)``.  Integer-valued diagnostics
    are summed across chunks.
    """
    if total < 1:
        raise ValueError("total must be >= 1")
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    specs = []
    done = 0
    while done < total:
        count = min(chunk_size, total - done)
        specs.append((len(specs), count))
        done += count
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(partial(_run_one, chunk_fn, base), specs))
    else:
        results = [_run_one(chunk_fn, base, spec) for spec in specs]
    values = np.concatenate([r[0] for r in results])
    diag: dict = {}
    for _, d in results:
        for key, val in d.items():
            diag[key] = diag.get(key, 0) + val
    return values, diag
