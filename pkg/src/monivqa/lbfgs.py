"""L-BFGS with two-loop recursion and a strong-Wolfe line search.

The optimizer owns the per-iteration trace and the dead-branch abort
policy needed by post-selected cost functions: when the objective raises
DeadBranchError the run stops and the offending iterate is retained.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DeadBranchError


@dataclass
class OptTrace:
    cost_history: list[float]
    theta_final: np.ndarray
    final_cost: float
    converged: bool
    aborted: bool = False
    message: str = ""
    n_iters: int = 0
    theta_history: list | None = None
    grad_norm: float = float("nan")
    realization: object = None
    record: object = None


def _two_loop(grad, s_list, y_list, rho_list):
    q = grad.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if s_list:
        gamma = (s_list[-1] @ y_list[-1]) / (y_list[-1] @ y_list[-1])
        q *= gamma
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def _cubic_min(a, fa, da, b, fb):
    """Minimizer of the cubic through (a, fa, da) and (b, fb); None if flat."""
    d = b - a
    if d == 0:
        return None
    c2 = (fb - fa - da * d) / (d * d)
    # quadratic model fallback; robust enough for zoom
    if c2 <= 0:
        return None
    return a - da / (2.0 * c2)


def _zoom(phi, lo, f_lo, d_lo, hi, f_hi, f0, d0, c1, c2, max_iter=30):
    for _ in range(max_iter):
        trial = _cubic_min(lo, f_lo, d_lo, hi, f_hi)
        width = abs(hi - lo)
        if (trial is None or not np.isfinite(trial)
                or not (min(lo, hi) + 0.1 * width <= trial <= max(lo, hi) - 0.1 * width)):
            trial = 0.5 * (lo + hi)
        f_t, g_t, d_t = phi(trial)
        if f_t > f0 + c1 * trial * d0 or f_t >= f_lo:
            hi, f_hi = trial, f_t
        else:
            if abs(d_t) <= -c2 * d0:
                return trial, f_t, g_t
            if d_t * (hi - lo) >= 0:
                hi, f_hi = lo, f_lo
            lo, f_lo, d_lo = trial, f_t, d_t
        if width < 1e-14:
            break
    return None


def _wolfe_search(phi, f0, d0, c1, c2, max_iter=20):
    """Strong Wolfe search along phi(alpha) -> (f, grad, slope).

    Returns (alpha, f, grad) or None on failure. d0 must be negative.
    """
    alpha_prev, f_prev, d_prev = 0.0, f0, d0
    alpha = 1.0
    for i in range(max_iter):
        f_a, g_a, d_a = phi(alpha)
        if f_a > f0 + c1 * alpha * d0 or (i > 0 and f_a >= f_prev):
            return _zoom(phi, alpha_prev, f_prev, d_prev, alpha, f_a, f0, d0, c1, c2)
        if abs(d_a) <= -c2 * d0:
            return alpha, f_a, g_a
        if d_a >= 0:
            return _zoom(phi, alpha, f_a, d_a, alpha_prev, f_prev, f0, d0, c1, c2)
        alpha_prev, f_prev, d_prev = alpha, f_a, d_a
        alpha *= 2.0
    return None


def lbfgs_minimize(fun_grad, theta0, memory: int = 10, max_iters: int = 500,
                   grad_tol: float = 1e-7, c1: float = 1e-4, c2: float = 0.9,
                   keep_theta_history: bool = False) -> OptTrace:
    """Minimize fun_grad: theta -> (cost, gradient).

    Terminates on max(|grad|) < grad_tol, the iteration cap, or a failed
    line search; a DeadBranchError from the objective aborts the run with
    the offending iterate retained in the trace.
    """
    if max_iters < 1:
        raise ContractError("max_iters must be >= 1")
    theta = np.asarray(theta0, dtype=float).copy()
    history: list[float] = []
    thetas = [theta.copy()] if keep_theta_history else None

    try:
        f, g = fun_grad(theta)
    except DeadBranchError as exc:
        return OptTrace([], theta, float("nan"), False, aborted=True,
                        message=f"dead branch at theta0: {exc}",
                        theta_history=thetas)
    history.append(f)

    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    rho_list: list[float] = []

    converged = False
    message = "iteration cap reached"
    it = 0
    while it < max_iters:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm < grad_tol:
            converged = True
            message = "gradient tolerance reached"
            break
        d = _two_loop(g, s_list, y_list, rho_list)
        d0 = float(d @ g)
        if d0 >= 0:
            s_list, y_list, rho_list = [], [], []
            d = -g.copy()
            d0 = float(d @ g)

        def phi(alpha):
            fa, ga = fun_grad(theta + alpha * d)
            return fa, ga, float(ga @ d)

        try:
            result = _wolfe_search(phi, f, d0, c1, c2)
        except DeadBranchError as exc:
            return OptTrace(history, theta, history[-1], False, aborted=True,
                            message=f"dead branch during line search: {exc}",
                            n_iters=it, theta_history=thetas,
                            grad_norm=float(np.max(np.abs(g))))
        if result is None:
            message = "line search failed"
            break
        alpha, f_new, g_new = result
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        theta = theta + s
        f, g = f_new, g_new
        history.append(f)
        if thetas is not None:
            thetas.append(theta.copy())
        it += 1

    return OptTrace(history, theta, history[-1], converged, message=message,
                    n_iters=it, theta_history=thetas,
                    grad_norm=float(np.max(np.abs(g))))
