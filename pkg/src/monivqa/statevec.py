"""Dense statevector engine.

Amplitude convention: qubit 0 is the most-significant bit of the amplitude
index, so reshaping the flat vector to shape (2,)*n gives one tensor axis
per qubit, axis k = qubit k. All modules and CSV outputs use this ordering.

Rotation gates realize U(theta) = exp(-i*theta/2 * A) for a Pauli-string
generator A; no gate uses exp(-i*theta*A).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, SizeError, StateCorruptionError

MAX_QUBITS = 24

_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass
class State:
    """Pure state of n qubits as a dense complex amplitude vector.

    ``norm_tracked`` carries the squared norm (1.0 when normalized); the
    unnormalized output of :func:`project` keeps the branch probability here.
    """

    n_qubits: int
    amplitudes: np.ndarray
    norm_tracked: float = 1.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.shape[0] != 2**self.n_qubits:
            raise ContractError(
                f"amplitude vector length {self.amplitudes.shape[0]} "
                f"!= 2^{self.n_qubits}"
            )

    def copy(self) -> "State":
        return State(self.n_qubits, self.amplitudes.copy(), self.norm_tracked)

    def tensor(self) -> np.ndarray:
        """View of the amplitudes with one axis per qubit."""
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalize(self) -> "State":
        nsq = self.norm_sq()
        if nsq <= 0.0:
            raise StateCorruptionError("cannot normalize a zero state")
        return State(self.n_qubits, self.amplitudes / np.sqrt(nsq), 1.0)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class GateSpec:
    """One circuit gate.

    kind:
      - "rotation": exp(-i*phi/2 * P) with P the Pauli string given by
        ``axes`` on ``targets`` (1 or 2 qubits). ``axes=None`` marks an
        axis left to be pinned by a circuit realization (HEA1).
        The applied angle is phi = coeff * theta[parameter_slot].
      - "cnot": targets = (control, target).
      - "fixed_2q": constant 4x4 unitary (row-major nested tuple) on targets.
    """

    kind: str
    targets: tuple[int, ...]
    axes: tuple[str, ...] | None = None
    parameter_slot: int | None = None
    coeff: float = 1.0
    matrix: tuple | None = None

    def matrix_array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=complex).reshape(4, 4)


@dataclass(frozen=True)
class EntropyResult:
    subsystem: tuple[int, ...]
    entropy_bits: float


def new_zero_state(n: int) -> State:
    """All-qubits-|0> computational basis state."""
    if not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"qubit count {n} outside [1, {MAX_QUBITS}]")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = 1.0
    return State(n, amps)


# ---------------------------------------------------------------------------
# array-level kernels (shared with the circuit execution engine)
# ---------------------------------------------------------------------------

def _axis_index(n: int, qubit: int, value) -> tuple:
    idx = [slice(None)] * n
    idx[qubit] = value
    return tuple(idx)


def _q01(n: int, q: int) -> tuple[tuple, tuple]:
    head = (slice(None),) * q
    return head + (0,), head + (1,)


def _qq(n: int, q1: int, q2: int, v1: int, v2: int) -> tuple:
    idx = [slice(None)] * n
    idx[q1] = v1
    idx[q2] = v2
    return tuple(idx)


def pauli_string_apply(arr: np.ndarray, targets: tuple[int, ...],
                       axes: tuple[str, ...]) -> np.ndarray:
    """Return P|psi> for the Pauli string P = prod axes[i] on targets[i].

    ``arr`` has one axis per qubit. Single-Pauli and equal-axis two-qubit
    strings take direct slice kernels; anything else goes the generic way.
    """
    n = arr.ndim
    out = np.empty_like(arr)
    if len(targets) == 1:
        q, ax = targets[0], axes[0]
        i0, i1 = _q01(n, q)
        if ax == "X":
            out[i0] = arr[i1]
            out[i1] = arr[i0]
        elif ax == "Y":
            out[i0] = -1j * arr[i1]
            out[i1] = 1j * arr[i0]
        else:
            out[i0] = arr[i0]
            out[i1] = -arr[i1]
        return out
    if len(targets) == 2 and axes[0] == axes[1]:
        q1, q2 = targets
        i00, i01 = _qq(n, q1, q2, 0, 0), _qq(n, q1, q2, 0, 1)
        i10, i11 = _qq(n, q1, q2, 1, 0), _qq(n, q1, q2, 1, 1)
        ax = axes[0]
        if ax == "X":
            out[i00] = arr[i11]
            out[i11] = arr[i00]
            out[i01] = arr[i10]
            out[i10] = arr[i01]
        elif ax == "Y":
            out[i00] = -arr[i11]
            out[i11] = -arr[i00]
            out[i01] = arr[i10]
            out[i10] = arr[i01]
        else:
            out[i00] = arr[i00]
            out[i11] = arr[i11]
            out[i01] = -arr[i01]
            out[i10] = -arr[i10]
        return out
    # generic string: axis reversals for X/Y, then phases
    sel = [slice(None)] * n
    for q, ax in zip(targets, axes):
        if ax in ("X", "Y"):
            sel[q] = slice(None, None, -1)
    out = arr[tuple(sel)].copy()
    for q, ax in zip(targets, axes):
        if ax == "Y":
            out[_axis_index(n, q, 0)] *= -1j
            out[_axis_index(n, q, 1)] *= 1j
        elif ax == "Z":
            out[_axis_index(n, q, 1)] *= -1
    return out


def rotation_apply(arr: np.ndarray, targets: tuple[int, ...],
                   axes: tuple[str, ...], phi: float) -> np.ndarray:
    """exp(-i*phi/2 * P)|psi> = cos(phi/2)|psi> - i sin(phi/2) P|psi>."""
    c = np.cos(phi / 2.0)
    s = np.sin(phi / 2.0)
    if s == 0.0 and c == 1.0:
        return arr.copy()
    n = arr.ndim
    out = np.empty_like(arr)
    if len(targets) == 1:
        q, ax = targets[0], axes[0]
        i0, i1 = _q01(n, q)
        a, b = arr[i0], arr[i1]
        if ax == "X":
            js = -1j * s
            out[i0] = c * a + js * b
            out[i1] = js * a + c * b
        elif ax == "Y":
            out[i0] = c * a - s * b
            out[i1] = s * a + c * b
        else:
            out[i0] = np.exp(-0.5j * phi) * a
            out[i1] = np.exp(0.5j * phi) * b
        return out
    if len(targets) == 2 and axes[0] == axes[1]:
        q1, q2 = targets
        i00, i01 = _qq(n, q1, q2, 0, 0), _qq(n, q1, q2, 0, 1)
        i10, i11 = _qq(n, q1, q2, 1, 0), _qq(n, q1, q2, 1, 1)
        v00, v01, v10, v11 = arr[i00], arr[i01], arr[i10], arr[i11]
        ax = axes[0]
        js = -1j * s
        if ax == "X":
            out[i00] = c * v00 + js * v11
            out[i11] = c * v11 + js * v00
            out[i01] = c * v01 + js * v10
            out[i10] = c * v10 + js * v01
        elif ax == "Y":
            out[i00] = c * v00 - js * v11
            out[i11] = c * v11 - js * v00
            out[i01] = c * v01 + js * v10
            out[i10] = c * v10 + js * v01
        else:
            em, ep = np.exp(-0.5j * phi), np.exp(0.5j * phi)
            out[i00] = em * v00
            out[i11] = em * v11
            out[i01] = ep * v01
            out[i10] = ep * v10
        return out
    return c * arr - 1j * s * pauli_string_apply(arr, targets, axes)


def cnot_apply(arr: np.ndarray, control: int, target: int) -> np.ndarray:
    n = arr.ndim
    out = arr.copy()
    c1 = _axis_index(n, control, 1)
    sub = out[c1]
    t = target if target < control else target - 1
    out[c1] = np.flip(sub, axis=t)
    return out


def fixed2_apply(arr: np.ndarray, q1: int, q2: int, u4: np.ndarray) -> np.ndarray:
    moved = np.moveaxis(arr, (q1, q2), (0, 1))
    shape = moved.shape
    flat = moved.reshape(4, -1)
    res = (u4 @ flat).reshape(shape)
    return np.moveaxis(res, (0, 1), (q1, q2))


def project_arr(arr: np.ndarray, qubit: int, outcome: int) -> tuple[np.ndarray, float]:
    """Apply P_outcome without renormalizing; return (new array, probability)."""
    n = arr.ndim
    keep = arr[_axis_index(n, qubit, outcome)]
    prob = float(np.vdot(keep, keep).real)
    out = arr.copy()
    out[_axis_index(n, qubit, 1 - outcome)] = 0.0
    return out, prob


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def apply_gate(state: State, gate: GateSpec, theta: float | None = None) -> State:
    """Apply one gate; ``theta`` is the rotation angle (rotations only)."""
    n = state.n_qubits
    if any(not 0 <= q < n for q in gate.targets):
        raise ContractError(f"gate targets {gate.targets} out of range for n={n}")
    arr = state.tensor()
    if gate.kind == "rotation":
        if theta is None:
            raise ContractError("rotation gate requires theta")
        if gate.axes is None:
            raise ContractError("rotation axis not pinned (HEA1 template gate)")
        out = rotation_apply(arr, gate.targets, gate.axes, gate.coeff * theta)
    elif gate.kind == "cnot":
        if theta is not None:
            raise ContractError("cnot takes no theta")
        out = cnot_apply(arr, gate.targets[0], gate.targets[1])
    elif gate.kind == "fixed_2q":
        if theta is not None:
            raise ContractError("fixed_2q takes no theta")
        out = fixed2_apply(arr, gate.targets[0], gate.targets[1], gate.matrix_array())
    else:
        raise ContractError(f"unknown gate kind {gate.kind!r}")
    return State(n, out.reshape(-1), state.norm_tracked)


def project(state: State, qubit: int, outcome: int) -> tuple[State, float]:
    """P_outcome|psi> and its probability <psi|P|psi>.

    The returned state is NOT renormalized; callers divide by sqrt(p).
    Probability 0 is a legal return (zero vector), not an error.
    """
    if outcome not in (0, 1):
        raise ContractError("outcome must be 0 or 1")
    if not 0 <= qubit < state.n_qubits:
        raise ContractError(f"qubit {qubit} out of range")
    out, prob = project_arr(state.tensor(), qubit, outcome)
    return State(state.n_qubits, out.reshape(-1), prob), prob


def measure_qubit(state: State, qubit: int, rng: np.random.Generator
                  ) -> tuple[int, State, float]:
    """Born-rule measurement: outcome 0 with probability p0, else 1.

    Returns (outcome, normalized post-measurement state, branch probability).
    """
    arr = state.tensor()
    n = state.n_qubits
    v0 = arr[_axis_index(n, qubit, 0)]
    p0 = float(np.vdot(v0, v0).real)
    p1 = state.norm_sq() - p0
    if p0 < 1e-15 and p1 < 1e-15:
        raise StateCorruptionError("both measurement branches have ~zero probability")
    outcome = 0 if rng.random() < p0 else 1
    prob = p0 if outcome == 0 else p1
    out, _ = project_arr(arr, qubit, outcome)
    out = out / np.sqrt(prob)
    return outcome, State(n, out.reshape(-1), 1.0), prob


def reduced_density(state: State, subsystem) -> np.ndarray:
    """rho_A = Tr_complement |psi><psi| over the given qubit set."""
    sub = tuple(sorted(set(subsystem)))
    n = state.n_qubits
    if len(sub) == 0 or len(sub) >= n:
        raise ContractError("subsystem must be a nonempty proper subset")
    if any(not 0 <= q < n for q in sub):
        raise ContractError(f"subsystem {sub} out of range")
    mat = _bipartition_matrix(state, sub)
    return mat @ mat.conj().T


def _bipartition_matrix(state: State, sub: tuple[int, ...]) -> np.ndarray:
    """Amplitudes reshaped to 2^|A| x 2^|complement| with A's axes first."""
    n = state.n_qubits
    rest = tuple(q for q in range(n) if q not in sub)
    arr = state.tensor().transpose(sub + rest)
    return arr.reshape(2 ** len(sub), 2 ** len(rest))


def von_neumann_entropy(rho: np.ndarray) -> float:
    """S = -Tr[rho log2 rho] in bits; eigenvalues below 1e-12 contribute 0."""
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > 1e-8:
        raise ContractError(f"density matrix trace {tr} deviates from 1")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-8:
        raise ContractError("density matrix is not Hermitian")
    evals = np.linalg.eigvalsh(rho)
    return _spectrum_entropy_bits(evals)


def _spectrum_entropy_bits(evals: np.ndarray) -> float:
    lam = evals[evals > 1e-12]
    if lam.size == 0:
        return 0.0
    return float(max(0.0, -np.sum(lam * np.log2(lam))))


def subsystem_entropy(state: State, subsystem) -> EntropyResult:
    """Half of the Schmidt route: S(A) for a pure state from the singular
    values of the 2^|A| x 2^|complement| amplitude reshape.

    Avoids materializing rho_A, so it stays O(2^n) in memory.
    """
    sub = tuple(sorted(set(subsystem)))
    n = state.n_qubits
    if len(sub) == 0 or len(sub) >= n:
        raise ContractError("subsystem must be a nonempty proper subset")
    mat = _bipartition_matrix(state, sub)
    sv = np.linalg.svd(mat, compute_uv=False)
    return EntropyResult(sub, _spectrum_entropy_bits(sv**2))
