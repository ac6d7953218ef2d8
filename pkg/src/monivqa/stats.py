"""Bootstrap statistics used across the experiment drivers."""
from __future__ import annotations

import numpy as np

from .errors import ContractError

_STATISTICS = {
    "mean": np.mean,
    "variance": lambda x: np.var(x, ddof=1),
}


def _resolve(statistic):
    if callable(statistic):
        return statistic
    try:
        return _STATISTICS[statistic]
    except KeyError:
        raise ContractError(f"unknown statistic {statistic!r}")


def bootstrap_replicates(samples, statistic, n_resamples: int,
                         rng: np.random.Generator) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    if samples.size < 2:
        raise ContractError("bootstrap needs at least 2 samples")
    stat = _resolve(statistic)
    idx = rng.integers(0, samples.size, size=(n_resamples, samples.size))
    return np.array([stat(samples[row]) for row in idx])


def bootstrap_ci(samples, statistic="mean", n_resamples: int = 1000,
                 level: float = 0.95, rng: np.random.Generator | None = None,
                 ) -> tuple[float, float, float]:
    """Percentile bootstrap: (point estimate, low, high).

    Deterministic under a fixed rng.
    """
    if not 0.0 < level < 1.0:
        raise ContractError("level must be in (0, 1)")
    rng = np.random.default_rng(0) if rng is None else rng
    samples = np.asarray(samples, dtype=float)
    point = float(_resolve(statistic)(samples))
    reps = bootstrap_replicates(samples, statistic, n_resamples, rng)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(reps, [alpha, 1.0 - alpha])
    return point, float(lo), float(hi)


def bootstrap_stderr(samples, statistic="mean", n_resamples: int = 200,
                     rng: np.random.Generator | None = None) -> float:
    """Standard error as the std of bootstrap replicates."""
    rng = np.random.default_rng(0) if rng is None else rng
    samples = np.asarray(samples, dtype=float)
    if np.all(samples == samples[0]):
        return 0.0
    reps = bootstrap_replicates(samples, statistic, n_resamples, rng)
    return float(np.std(reps, ddof=1))
