import numpy as np
import pytest

from monivqa.errors import ContractError
from monivqa.observables import Observable, exact_ground_energy, expectation
from monivqa.statevec import _PAULI, State, new_zero_state


def pauli_string_dense(n, ops):
    """Independent dense construction: ops = {qubit: 'X'|'Y'|'Z'}."""
    mat = np.array([[1.0]])
    for q in range(n):
        mat = np.kron(mat, _PAULI.get(ops.get(q), np.eye(2)))
    return mat


def xxz_dense(n, delta):
    h = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        j = (i + 1) % n
        for ax in ("X", "Y"):
            h += pauli_string_dense(n, {i: ax, j: ax})
        h += delta * pauli_string_dense(n, {i: "Z", j: "Z"})
    return h


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return State(n, amps / np.linalg.norm(amps))


class TestZZ01:
    def test_all_zeros(self):
        obs = Observable("zz01", 3)
        assert expectation(new_zero_state(3), obs) == 1.0

    def test_antialigned(self):
        obs = Observable("zz01", 3)
        amps = np.zeros(8, dtype=complex)
        amps[0b010] = 1.0  # qubit 0 = 0, qubit 1 = 1
        assert expectation(State(3, amps), obs) == -1.0

    def test_matches_dense(self):
        obs = Observable("zz01", 4)
        ref = pauli_string_dense(4, {0: "Z", 1: "Z"})
        assert np.allclose(obs.dense(), ref)

    def test_spectrum(self):
        evals = np.linalg.eigvalsh(Observable("zz01", 3).dense())
        assert set(np.round(evals).astype(int)) == {-1, 1}

    def test_two_outcome_probs(self):
        obs = Observable("zz01", 2)
        arr = new_zero_state(2).tensor()
        assert obs.two_outcome_probs(arr) == (1.0, 0.0)
        h = 1 / np.sqrt(2)
        odd = State(2, np.array([0, h, h, 0], dtype=complex)).tensor()
        pp, pm = obs.two_outcome_probs(odd)
        assert abs(pp) < 1e-12 and abs(pm - 1.0) < 1e-12
        with pytest.raises(ContractError):
            Observable("xxz", 4).two_outcome_probs(arr)


class TestXXZ:
    def test_neel_expectation(self):
        obs = Observable("xxz", 4, delta=0.5)
        amps = np.zeros(16, dtype=complex)
        amps[0b0101] = 1.0
        assert abs(expectation(State(4, amps), obs) - (-2.0)) < 1e-12

    def test_matches_dense(self):
        for n, delta in [(3, 1.0), (4, 0.5), (5, 0.37)]:
            obs = Observable("xxz", n, delta)
            assert np.allclose(obs.dense(), xxz_dense(n, delta), atol=1e-12)

    def test_hermitian_on_random_vectors(self):
        obs = Observable("xxz", 5, delta=0.8)
        for seed in range(5):
            a = random_state(5, seed).tensor()
            b = random_state(5, seed + 100).tensor()
            lhs = np.vdot(a, obs.apply(b))
            rhs = np.conj(np.vdot(b, obs.apply(a)))
            assert abs(lhs - rhs) < 1e-10


class TestGroundEnergy:
    def test_zz01(self):
        for n in (2, 5, 8):
            assert abs(exact_ground_energy(Observable("zz01", n)) + 1.0) < 1e-8

    def test_xxz_heisenberg_n4(self):
        obs = Observable("xxz", 4, delta=1.0)
        e = exact_ground_energy(obs)
        assert abs(e - (-8.0)) < 1e-8
        dense_min = np.linalg.eigvalsh(obs.dense()).min()
        assert abs(e - dense_min) < 1e-8

    def test_xxz_matches_dense_oracle_n8(self):
        obs = Observable("xxz", 8, delta=0.5)
        e = exact_ground_energy(obs)
        dense_min = np.linalg.eigvalsh(xxz_dense(8, 0.5)).min()
        assert abs(e - dense_min) < 1e-8

    def test_cached(self):
        obs = Observable("xxz", 4, delta=0.5)
        assert exact_ground_energy(obs) == exact_ground_energy(obs)


class TestContracts:
    def test_dimension_mismatch(self):
        with pytest.raises(ContractError):
            expectation(new_zero_state(3), Observable("zz01", 4))

    def test_unknown_kind(self):
        with pytest.raises(ContractError):
            Observable("ising", 4)
