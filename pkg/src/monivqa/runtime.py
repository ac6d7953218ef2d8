"""Seed splitting, worker pools, and CSV emission shared by the drivers.

Seed-splitting rule (part of the determinism contract): every task draws
from ``default_rng(SeedSequence(entropy=master_seed, spawn_key=key))``
where ``key`` starts with a per-experiment stream id followed by the task
indices. Results are aggregated in task-index order, so output is
independent of worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

STREAM_VARIANCE = 1
STREAM_OPTIMIZE = 2
STREAM_LANDSCAPE = 3
STREAM_ENTROPY = 4
STREAM_MUTUALINFO = 5
STREAM_COLLAPSE = 6
STREAM_BOOTSTRAP = 7


def derive_rng(master_seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return np.random.default_rng(seq)


def default_workers() -> int:
    return os.cpu_count() or 1


def map_tasks(fn, tasks, workers: int):
    """Order-preserving map, serial when workers <= 1."""
    tasks = list(tasks)
    if workers <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def fmt(x) -> str:
    """Canonical float formatting for CSV cells: 17 significant digits."""
    if isinstance(x, float) or isinstance(x, np.floating):
        if np.isnan(x):
            return ""
        return f"{x:.17g}"
    return str(x)


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(c) for c in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
