"""Experiment drivers: gradient-variance sweeps, optimization ensembles,
and cost-landscape slices.

All drivers are deterministic functions of (config, seed); see
:mod:`monivqa.runtime` for the seed-splitting rule.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import runtime
from .ansatz import build_template, realize, run
from .costgrad import (
    SITE_CAP,
    mixed_grad,
    mixed_grad_sampled,
    projective_cost_and_grad,
    projective_grad_analytic,
)
from .errors import ContractError, DeadBranchError
from .lbfgs import OptTrace, lbfgs_minimize
from .observables import Observable, exact_ground_energy
from .stats import bootstrap_ci

__all__ = [
    "VarianceConfig", "VarianceRow", "variance_sweep", "write_variance_csv",
    "OptimizeConfig", "optimize_ensemble", "write_traces_csv",
    "LandscapeSlice", "landscape_slice", "write_landscape_csv",
    "bootstrap_ci", "lbfgs_minimize", "OptTrace",
]

VARIANCE_HEADER = ["ansatz", "n", "depth", "p", "variant", "grad_index",
                   "variance", "ci_low", "ci_high", "n_samples", "seed"]
TRACES_HEADER = ["trace_id", "iter", "cost"]
LANDSCAPE_HEADER = ["alpha", "beta", "cost"]


# ---------------------------------------------------------------------------
# gradient-variance sweep (Fig. 3 style)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarianceConfig:
    ansatz: str
    n_list: tuple[int, ...]
    depth: int
    p_grid: tuple[float, ...]
    variant: str = "projective"          # or "mixed"
    n_samples: int = 1000
    grad_index: int | None = None        # None = first slot of first layer
    obs_kind: str = "zz01"
    delta: float = 0.5
    seed: int = 0
    workers: int = 1
    mixed_inner_samples: int = 64        # Born samples when not enumerable


@dataclass(frozen=True)
class VarianceRow:
    ansatz: str
    n: int
    depth: int
    p: float
    variant: str
    grad_index: int
    variance: float
    ci_low: float
    ci_high: float
    n_samples: int
    seed: int


def _variance_task(args):
    (tpl, p, variant, grad_slot, obs_kind, delta, inner, seed, ni, pi, s) = args
    rng = runtime.derive_rng(seed, runtime.STREAM_VARIANCE, ni, pi, s)
    real = realize(tpl, p, rng, seed=seed)
    theta = real.theta_array()
    obs = Observable(obs_kind, tpl.n_qubits, delta)
    if variant == "projective":
        _, record = run(real, theta, rng=rng)
        return float(projective_grad_analytic(real, theta, record, obs)[grad_slot])
    if len(real.meas_sites) <= SITE_CAP:
        return float(mixed_grad(real, theta, obs, mode="exact")[grad_slot])
    return float(mixed_grad_sampled(real, theta, obs, inner, rng)[grad_slot])


def variance_sweep(cfg: VarianceConfig) -> list[VarianceRow]:
    """Var_k over (realization, outcome) samples on a (N, p) grid.

    The projective variant samples one outcome record per realization by
    the Born rule, so realization and record are drawn jointly; the mixed
    variant uses exact enumeration when the site count allows, otherwise
    a Born-sampled average with ``mixed_inner_samples`` trajectories.
    """
    if cfg.variant not in ("projective", "mixed"):
        raise ContractError(f"unknown variant {cfg.variant!r}")
    if cfg.n_samples < 2:
        raise ContractError("need at least 2 samples for a variance")
    rows = []
    for ni, n in enumerate(cfg.n_list):
        tpl = build_template(cfg.ansatz, n, cfg.depth, cfg.delta)
        grad_slot = (tpl.default_grad_slot() if cfg.grad_index is None
                     else cfg.grad_index)
        if not 0 <= grad_slot < tpl.parameter_count:
            raise ContractError(f"grad_index {grad_slot} out of range")
        for pi, p in enumerate(cfg.p_grid):
            tasks = [(tpl, p, cfg.variant, grad_slot, cfg.obs_kind, cfg.delta,
                      cfg.mixed_inner_samples, cfg.seed, ni, pi, s)
                     for s in range(cfg.n_samples)]
            grads = np.array(runtime.map_tasks(_variance_task, tasks, cfg.workers))
            boot_rng = runtime.derive_rng(cfg.seed, runtime.STREAM_BOOTSTRAP,
                                          ni, pi)
            var, lo, hi = bootstrap_ci(grads, "variance", 1000, 0.95, boot_rng)
            rows.append(VarianceRow(cfg.ansatz, n, cfg.depth, float(p),
                                    cfg.variant, grad_slot, var, lo, hi,
                                    cfg.n_samples, cfg.seed))
    return rows


def write_variance_csv(rows, path):
    runtime.write_csv(path, VARIANCE_HEADER,
                      [(r.ansatz, r.n, r.depth, r.p, r.variant, r.grad_index,
                        r.variance, r.ci_low, r.ci_high, r.n_samples, r.seed)
                       for r in rows])


# ---------------------------------------------------------------------------
# optimization ensembles (Fig. 4 style)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizeConfig:
    ansatz: str
    n: int
    depth: int
    p: float
    obs_kind: str = "zz01"
    delta: float = 0.5
    n_traces: int = 10
    seed: int = 0
    workers: int = 1
    max_iters: int = 500
    grad_tol: float = 1e-7
    memory: int = 10


def _optimize_task(args):
    cfg, t = args
    tpl = build_template(cfg.ansatz, cfg.n, cfg.depth, cfg.delta)
    rng = runtime.derive_rng(cfg.seed, runtime.STREAM_OPTIMIZE, t)
    real = realize(tpl, cfg.p, rng, seed=cfg.seed)
    theta0 = real.theta_array()
    # post-selection policy: the record is sampled once at theta0 and held
    # fixed for the whole run; driving it dead aborts the trace
    _, record = run(real, theta0, rng=rng)
    obs = Observable(cfg.obs_kind, cfg.n, cfg.delta)

    def fun_grad(theta):
        return projective_cost_and_grad(real, theta, record, obs)

    trace = lbfgs_minimize(fun_grad, theta0, memory=cfg.memory,
                           max_iters=cfg.max_iters, grad_tol=cfg.grad_tol)
    trace.realization = real
    trace.record = record
    return trace


def optimize_ensemble(cfg: OptimizeConfig) -> list[OptTrace]:
    """n_traces independent post-selected optimization runs."""
    if cfg.n_traces < 1:
        raise ContractError("need at least 1 trace")
    tasks = [(cfg, t) for t in range(cfg.n_traces)]
    return runtime.map_tasks(_optimize_task, tasks, cfg.workers)


def write_traces_csv(traces, path):
    rows = []
    for tid, tr in enumerate(traces):
        for it, cost in enumerate(tr.cost_history):
            rows.append((tid, it, cost))
    runtime.write_csv(path, TRACES_HEADER, rows)


# ---------------------------------------------------------------------------
# landscape slices (Fig. 5 style)
# ---------------------------------------------------------------------------

@dataclass
class LandscapeSlice:
    center: np.ndarray
    dir1: np.ndarray
    dir2: np.ndarray
    alphas: np.ndarray
    betas: np.ndarray
    values: np.ndarray        # NaN marks dead-branch cells


def landscape_slice(cost_fn, theta_star, extent: float = np.pi,
                    resolution: int = 51,
                    rng: np.random.Generator | None = None) -> LandscapeSlice:
    """Cost on the plane spanned by two random orthonormal directions.

    ``resolution`` must be odd and >= 11 so the center theta* lies on the
    lattice; dead branches become missing cells rather than failures.
    """
    if resolution < 11 or resolution % 2 == 0:
        raise ContractError("resolution must be odd and >= 11")
    rng = np.random.default_rng(0) if rng is None else rng
    theta_star = np.asarray(theta_star, dtype=float)
    d = theta_star.shape[0]
    dir1 = rng.normal(size=d)
    dir1 /= np.linalg.norm(dir1)
    dir2 = rng.normal(size=d)
    dir2 -= (dir2 @ dir1) * dir1
    dir2 /= np.linalg.norm(dir2)
    assert abs(dir1 @ dir2) <= 1e-10
    alphas = np.linspace(-extent, extent, resolution)
    betas = np.linspace(-extent, extent, resolution)
    values = np.full((resolution, resolution), np.nan)
    for i, a in enumerate(alphas):
        for j, b in enumerate(betas):
            try:
                values[i, j] = cost_fn(theta_star + a * dir1 + b * dir2)
            except DeadBranchError:
                pass
    return LandscapeSlice(theta_star, dir1, dir2, alphas, betas, values)


def write_landscape_csv(sl: LandscapeSlice, path):
    rows = []
    for i, a in enumerate(sl.alphas):
        for j, b in enumerate(sl.betas):
            rows.append((float(a), float(b), float(sl.values[i, j])))
    runtime.write_csv(path, LANDSCAPE_HEADER, rows)


def ensemble_ground_energy(cfg: OptimizeConfig) -> float:
    """Exact ground energy of the ensemble's cost operator (for figures)."""
    return exact_ground_energy(Observable(cfg.obs_kind, cfg.n, cfg.delta))
