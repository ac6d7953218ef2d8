"""Hermitian cost operators with matrix-free action on statevectors.

Two observables are supported: the two-qubit parity Z0*Z1 and the periodic
XXZ chain H = sum_i X_i X_{i+1} + Y_i Y_{i+1} + delta * Z_i Z_{i+1}. The
XXZ action is applied term-by-term; dense matrices are only built by the
small-n oracle helper.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import ContractError, ConvergenceError, SizeError
from .statevec import State

GROUND_ENERGY_MAX_QUBITS = 14
DENSE_ORACLE_MAX_QUBITS = 10


def _two_axis_index(n, qi, vi, qj, vj):
    idx = [slice(None)] * n
    idx[qi] = vi
    idx[qj] = vj
    return tuple(idx)


class Observable:
    """Cost operator with expectation / linear-action / projector interface."""

    def __init__(self, kind: str, n_qubits: int, delta: float = 1.0):
        kind = kind.lower()
        if kind not in ("zz01", "xxz"):
            raise ContractError(f"unknown observable kind {kind!r}")
        if n_qubits < 2:
            raise ContractError("observables need at least 2 qubits")
        self.kind = kind
        self.n_qubits = n_qubits
        self.delta = float(delta)
        self._ground = None

    def __repr__(self):
        if self.kind == "xxz":
            return f"Observable(xxz, n={self.n_qubits}, delta={self.delta})"
        return f"Observable(zz01, n={self.n_qubits})"

    def apply(self, arr: np.ndarray) -> np.ndarray:
        """O|psi> on a (2,)*n tensor."""
        n = self.n_qubits
        if arr.ndim != n:
            raise ContractError(f"state has {arr.ndim} qubits, observable {n}")
        if self.kind == "zz01":
            out = arr.copy()
            out[_two_axis_index(n, 0, 0, 1, 1)] *= -1
            out[_two_axis_index(n, 0, 1, 1, 0)] *= -1
            return out
        out = np.zeros_like(arr)
        sgn = np.array([1.0, -1.0])
        for i in range(n):
            j = (i + 1) % n
            i01 = _two_axis_index(n, i, 0, j, 1)
            i10 = _two_axis_index(n, i, 1, j, 0)
            out[i10] += 2.0 * arr[i01]
            out[i01] += 2.0 * arr[i10]
            shape_i = [1] * n
            shape_i[i] = 2
            shape_j = [1] * n
            shape_j[j] = 2
            out += self.delta * arr * sgn.reshape(shape_i) * sgn.reshape(shape_j)
        return out

    def two_outcome_probs(self, arr: np.ndarray) -> tuple[float, float]:
        """(p(+1), p(-1)) for the eigen-projectors; zz01 only."""
        if self.kind != "zz01":
            raise ContractError(
                "only zz01 has a two-outcome projector decomposition")
        n = self.n_qubits
        p_plus = 0.0
        for b in (0, 1):
            v = arr[_two_axis_index(n, 0, b, 1, b)]
            p_plus += float(np.vdot(v, v).real)
        nsq = float(np.vdot(arr, arr).real)
        return p_plus, nsq - p_plus

    def dense(self) -> np.ndarray:
        """Dense matrix, for small-n oracle use only."""
        n = self.n_qubits
        if n > DENSE_ORACLE_MAX_QUBITS:
            raise SizeError("dense oracle capped at 10 qubits")
        dim = 2**n
        mat = np.zeros((dim, dim), dtype=complex)
        for k in range(dim):
            e = np.zeros(dim, dtype=complex)
            e[k] = 1.0
            mat[:, k] = self.apply(e.reshape((2,) * n)).reshape(-1)
        return mat


def expectation(state: State, obs: Observable) -> float:
    if state.n_qubits != obs.n_qubits:
        raise ContractError(
            f"state has {state.n_qubits} qubits, observable {obs.n_qubits}")
    arr = state.tensor()
    val = complex(np.vdot(arr, obs.apply(arr)))
    if abs(val.imag) > 1e-10:
        raise ContractError(f"expectation has imaginary residue {val.imag:.3e}")
    return val.real


def exact_ground_energy(obs: Observable) -> float:
    """Minimal eigenvalue via ARPACK on the matrix-free action (n <= 14)."""
    if obs._ground is not None:
        return obs._ground
    n = obs.n_qubits
    if n > GROUND_ENERGY_MAX_QUBITS:
        raise SizeError("exact ground energy capped at 14 qubits")
    dim = 2**n

    def matvec(v):
        return obs.apply(np.asarray(v, dtype=complex).reshape((2,) * n)).reshape(-1)

    op = LinearOperator((dim, dim), matvec=matvec, dtype=complex)
    v0 = np.full(dim, 1.0 / np.sqrt(dim))
    try:
        vals = eigsh(op, k=1, which="SA", v0=v0, tol=1e-10, maxiter=10_000,
                     return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(f"ground-state solver did not converge: {exc}")
    obs._ground = float(vals[0])
    return obs._ground


def make_observable(kind: str, n_qubits: int, delta: float = 1.0) -> Observable:
    return Observable(kind, n_qubits, delta)
