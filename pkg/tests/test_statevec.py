import numpy as np
import pytest

from monivqa.errors import ContractError, SizeError, StateCorruptionError
from monivqa import statevec as sv
from monivqa.statevec import (
    GateSpec,
    State,
    apply_gate,
    measure_qubit,
    new_zero_state,
    project,
    reduced_density,
    subsystem_entropy,
    von_neumann_entropy,
)


def bell_state():
    s = new_zero_state(2)
    h = 1 / np.sqrt(2)
    # |00> + |11>
    return State(2, np.array([h, 0, 0, h], dtype=complex))


def ghz3():
    h = 1 / np.sqrt(2)
    amps = np.zeros(8, dtype=complex)
    amps[0] = h
    amps[7] = h
    return State(3, amps)


class TestZeroState:
    def test_n1(self):
        assert np.allclose(new_zero_state(1).amplitudes, [1, 0])

    def test_n2(self):
        assert np.allclose(new_zero_state(2).amplitudes, [1, 0, 0, 0])

    def test_out_of_range(self):
        with pytest.raises(SizeError):
            new_zero_state(25)
        with pytest.raises(SizeError):
            new_zero_state(0)


class TestApplyGate:
    def test_rx_pi_gives_minus_i_x(self):
        g = GateSpec("rotation", (0,), axes=("X",))
        out = apply_gate(new_zero_state(1), g, np.pi)
        assert np.allclose(out.amplitudes, [0, -1j])

    def test_rz_phase_only(self):
        g = GateSpec("rotation", (0,), axes=("Z",))
        out = apply_gate(new_zero_state(1), g, 0.7)
        assert np.allclose(out.amplitudes, [np.exp(-0.35j), 0])
        assert np.allclose(out.probabilities(), [1, 0])

    def test_cnot_builds_bell(self):
        h = 1 / np.sqrt(2)
        plus0 = State(2, np.array([h, 0, h, 0], dtype=complex))
        out = apply_gate(plus0, GateSpec("cnot", (0, 1)))
        assert np.allclose(out.amplitudes, bell_state().amplitudes)

    def test_theta_contract(self):
        with pytest.raises(ContractError):
            apply_gate(new_zero_state(1), GateSpec("rotation", (0,), axes=("X",)))
        with pytest.raises(ContractError):
            apply_gate(new_zero_state(2), GateSpec("cnot", (0, 1)), 0.3)

    def test_two_qubit_rotation_matches_kron(self):
        rng = np.random.default_rng(5)
        for axes in [("X", "X"), ("Y", "Y"), ("Z", "Z"), ("X", "Z")]:
            phi = rng.uniform(-np.pi, np.pi)
            amps = rng.normal(size=4) + 1j * rng.normal(size=4)
            amps /= np.linalg.norm(amps)
            got = apply_gate(State(2, amps.copy()), GateSpec("rotation", (0, 1), axes), phi)
            p = np.kron(sv._PAULI[axes[0]], sv._PAULI[axes[1]])
            u = np.cos(phi / 2) * np.eye(4) - 1j * np.sin(phi / 2) * p
            assert np.allclose(got.amplitudes, u @ amps, atol=1e-12)

    def test_unitarity_random_circuits(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(2, 5))
            s = new_zero_state(n)
            for _ in range(20):
                kind = rng.choice(["rotation", "cnot"])
                if kind == "rotation":
                    q = int(rng.integers(n))
                    ax = str(rng.choice(["X", "Y", "Z"]))
                    s = apply_gate(s, GateSpec("rotation", (q,), (ax,)),
                                   float(rng.uniform(-np.pi, np.pi)))
                else:
                    c, t = rng.choice(n, size=2, replace=False)
                    s = apply_gate(s, GateSpec("cnot", (int(c), int(t))))
            assert abs(s.norm_sq() - 1.0) <= 1e-10


class TestProject:
    def test_plus_state(self):
        h = 1 / np.sqrt(2)
        plus = State(1, np.array([h, h], dtype=complex))
        _, p = project(plus, 0, 0)
        assert abs(p - 0.5) < 1e-12

    def test_orthogonal_outcome(self):
        one = State(1, np.array([0, 1], dtype=complex))
        out, p = project(one, 0, 0)
        assert p == 0.0
        assert np.allclose(out.amplitudes, 0)

    def test_bell_branch(self):
        out, p = project(bell_state(), 0, 1)
        assert abs(p - 0.5) < 1e-12
        expect = np.zeros(4, dtype=complex)
        expect[3] = 1 / np.sqrt(2)
        assert np.allclose(out.amplitudes, expect)

    def test_branch_completeness_random(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(1, 5))
            amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
            amps /= np.linalg.norm(amps)
            s = State(n, amps)
            q = int(rng.integers(n))
            _, p0 = project(s, q, 0)
            _, p1 = project(s, q, 1)
            assert abs(p0 + p1 - 1.0) <= 1e-12

    def test_matches_matrix_construction(self):
        # project-then-normalize == P_M U|0> / sqrt(p) built densely, n <= 4
        rng = np.random.default_rng(11)
        n = 4
        gates = []
        for _ in range(12):
            if rng.random() < 0.5:
                gates.append((GateSpec("rotation", (int(rng.integers(n)),),
                                       (str(rng.choice(["X", "Y", "Z"])),)),
                              float(rng.uniform(-np.pi, np.pi))))
            else:
                c, t = rng.choice(n, size=2, replace=False)
                gates.append((GateSpec("cnot", (int(c), int(t))), None))
        s = new_zero_state(n)
        u = np.eye(2**n, dtype=complex)
        for g, th in gates:
            s = apply_gate(s, g, th)
            cols = [apply_gate(State(n, u[:, k].copy()), g, th).amplitudes
                    for k in range(2**n)]
            u = np.stack(cols, axis=1)
        q, outcome = 2, 1
        proj = np.zeros((2**n, 2**n))
        for i in range(2**n):
            bit = (i >> (n - 1 - q)) & 1
            if bit == outcome:
                proj[i, i] = 1.0
        branch, p = project(s, q, outcome)
        direct = proj @ (u @ new_zero_state(n).amplitudes)
        assert abs(p - np.vdot(direct, direct).real) < 1e-12
        assert np.allclose(branch.normalize().amplitudes, direct / np.sqrt(p), atol=1e-12)


class TestMeasure:
    def test_eigenstate_certain(self):
        rng = np.random.default_rng(0)
        out, s, p = measure_qubit(new_zero_state(3), 1, rng)
        assert out == 0 and abs(p - 1.0) < 1e-12
        assert np.allclose(s.amplitudes, new_zero_state(3).amplitudes)

    def test_born_frequency(self):
        rng = np.random.default_rng(42)
        h = 1 / np.sqrt(2)
        hits = 0
        for _ in range(10_000):
            plus = State(1, np.array([h, h], dtype=complex))
            out, _, _ = measure_qubit(plus, 0, rng)
            hits += out == 0
        assert abs(hits / 10_000 - 0.5) < 0.02

    def test_bell_correlation(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            o1, s, _ = measure_qubit(bell_state(), 0, rng)
            o2, _, _ = measure_qubit(s, 1, rng)
            assert o1 == o2

    def test_corrupted_state(self):
        z = State(1, np.zeros(2, dtype=complex))
        with pytest.raises(StateCorruptionError):
            measure_qubit(z, 0, np.random.default_rng(0))


class TestReducedDensity:
    def test_product_state_rank1(self):
        s = new_zero_state(3)
        s = apply_gate(s, GateSpec("rotation", (0,), ("Y",)), 0.9)
        rho = reduced_density(s, [0])
        evals = np.linalg.eigvalsh(rho)
        assert abs(evals[-1] - 1.0) < 1e-10

    def test_bell_maximally_mixed(self):
        rho = reduced_density(bell_state(), [0])
        assert np.allclose(rho, np.eye(2) / 2, atol=1e-12)

    def test_ghz_two_qubits(self):
        rho = reduced_density(ghz3(), [0, 1])
        assert np.allclose(rho, np.diag([0.5, 0, 0, 0.5]), atol=1e-12)

    def test_contract(self):
        with pytest.raises(ContractError):
            reduced_density(bell_state(), [])
        with pytest.raises(ContractError):
            reduced_density(bell_state(), [0, 1])

    def test_properties(self):
        rng = np.random.default_rng(1)
        amps = rng.normal(size=16) + 1j * rng.normal(size=16)
        amps /= np.linalg.norm(amps)
        rho = reduced_density(State(4, amps), [1, 3])
        assert abs(np.trace(rho).real - 1.0) < 1e-10
        assert np.allclose(rho, rho.conj().T, atol=1e-10)
        assert np.linalg.eigvalsh(rho).min() > -1e-10


class TestEntropy:
    def test_maximally_mixed_1q(self):
        assert abs(von_neumann_entropy(np.eye(2) / 2) - 1.0) < 1e-12

    def test_pure_projector(self):
        v = np.array([0.6, 0.8j])
        rho = np.outer(v, v.conj())
        assert von_neumann_entropy(rho) == 0.0

    def test_uniform_4(self):
        assert abs(von_neumann_entropy(np.eye(4) / 4) - 2.0) < 1e-12

    def test_trace_contract(self):
        with pytest.raises(ContractError):
            von_neumann_entropy(np.eye(2))

    def test_symmetry_random_bipartitions(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
            amps /= np.linalg.norm(amps)
            s = State(n, amps)
            k = int(rng.integers(1, n))
            sub = tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))
            comp = tuple(q for q in range(n) if q not in sub)
            sa = subsystem_entropy(s, sub).entropy_bits
            sb = subsystem_entropy(s, comp).entropy_bits
            assert abs(sa - sb) <= 1e-8

    def test_schmidt_matches_density_route(self):
        rng = np.random.default_rng(2)
        amps = rng.normal(size=32) + 1j * rng.normal(size=32)
        amps /= np.linalg.norm(amps)
        s = State(5, amps)
        for sub in [(0,), (1, 3), (0, 2, 4)]:
            via_rho = von_neumann_entropy(reduced_density(s, sub))
            via_svd = subsystem_entropy(s, sub).entropy_bits
            assert abs(via_rho - via_svd) < 1e-9
            assert 0.0 <= via_svd <= len(sub)
