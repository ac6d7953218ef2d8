import numpy as np
import pytest

from monivqa.errors import DeadBranchError
from monivqa.lbfgs import lbfgs_minimize


def quadratic(n, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n))
    q = a @ a.T + n * np.eye(n)
    b = rng.normal(size=n)
    star = np.linalg.solve(q, b)

    def fg(t):
        return float(0.5 * t @ q @ t - b @ t), q @ t - b

    return fg, star


def rosenbrock(t):
    x, y = t
    f = (1 - x) ** 2 + 100 * (y - x * x) ** 2
    g = np.array([-2 * (1 - x) - 400 * x * (y - x * x),
                  200 * (y - x * x)])
    return f, g


class TestLbfgs:
    def test_quadratic_10d(self):
        fg, star = quadratic(10)
        trace = lbfgs_minimize(fg, np.zeros(10))
        assert trace.converged
        assert trace.n_iters <= 30
        assert np.linalg.norm(trace.theta_final - star) < 1e-6

    def test_rosenbrock(self):
        trace = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]))
        assert trace.final_cost < 1e-8
        assert np.allclose(trace.theta_final, [1.0, 1.0], atol=1e-4)

    def test_monotone_history(self):
        fg, _ = quadratic(6, seed=3)
        trace = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]))
        hist = np.array(trace.cost_history)
        assert np.all(np.diff(hist) <= 1e-9)
        trace2 = lbfgs_minimize(fg, np.ones(6))
        assert np.all(np.diff(trace2.cost_history) <= 1e-9)

    def test_theta_history(self):
        fg, _ = quadratic(4, seed=5)
        trace = lbfgs_minimize(fg, np.ones(4), keep_theta_history=True)
        assert len(trace.theta_history) == len(trace.cost_history)

    def test_dead_branch_abort(self):
        def fg(t):
            if t[0] < -0.5:
                raise DeadBranchError("cliff", site=(0, 0))
            # minimum far to the left, so the optimizer walks into the cliff
            return float((t[0] + 4.0) ** 2), np.array([2 * (t[0] + 4.0)])

        trace = lbfgs_minimize(fg, np.array([1.0]))
        assert trace.aborted and not trace.converged
        assert "dead branch" in trace.message
        assert len(trace.cost_history) >= 1

    def test_already_converged(self):
        fg, star = quadratic(3, seed=7)
        trace = lbfgs_minimize(fg, star)
        assert trace.converged and trace.n_iters == 0
