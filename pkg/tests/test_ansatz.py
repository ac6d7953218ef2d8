import itertools

import numpy as np
import pytest
from scipy.linalg import expm

from monivqa.errors import ContractError, DeadBranchError
from monivqa import ansatz as az
from monivqa.ansatz import (
    OutcomeRecord,
    build_hea1,
    build_hea2,
    build_xxz_hva,
    realize,
    realization_from_json,
    realization_to_json,
    run,
)
from monivqa.statevec import _PAULI


def rng_for(seed):
    return np.random.default_rng(seed)


def enumerate_records(real, theta):
    """Forced-run every outcome string; dead branches count as p_M = 0."""
    k = len(real.meas_sites)
    out = []
    for bits in itertools.product((0, 1), repeat=k):
        try:
            state, rec = run(real, theta, record=OutcomeRecord(bits, 0.0))
        except DeadBranchError:
            continue
        out.append((bits, rec.joint_probability, state))
    return out


class TestBuilders:
    def test_hea1_structure(self):
        tpl = build_hea1(4, 1)
        rots = [g for g in tpl.layers[0] if g.kind == "rotation"]
        cnots = [g for g in tpl.layers[0] if g.kind == "cnot"]
        assert len(rots) == 8 and all(g.parameter_slot is not None for g in rots)
        assert [g.targets for g in cnots] == [(0, 1), (2, 3), (1, 2), (3, 0)]
        assert tpl.parameter_count == 8

    def test_hea1_param_count(self):
        assert build_hea1(4, 3).parameter_count == 24

    def test_even_qubits_required(self):
        for builder in (build_hea1, build_hea2, build_xxz_hva):
            with pytest.raises(ContractError):
                builder(5, 2)

    def test_hea2_counts(self):
        assert build_hea2(8, 16).parameter_count == 33
        tpl = build_hea2(4, 1)
        assert tpl.parameter_count == 3
        rots = [g for g in tpl.all_gates() if g.kind == "rotation"]
        assert len(rots) == 12
        assert set(tpl.sharing_map()) == {0, 1, 2}

    def test_hea2_zero_theta_gives_basis_state(self):
        tpl = build_hea2(6, 3)
        real = realize(tpl, 0.0, rng_for(1))
        state, _ = run(real, np.zeros(tpl.parameter_count))
        probs = state.probabilities()
        assert abs(probs.max() - 1.0) < 1e-12

    def test_xxz_counts(self):
        assert build_xxz_hva(8, 16).parameter_count == 32

    def test_xxz_zero_theta_keeps_singlets(self):
        tpl = build_xxz_hva(4, 2, delta=0.7)
        real = realize(tpl, 0.0, rng_for(2))
        state, _ = run(real, np.zeros(tpl.parameter_count))
        h = 1 / np.sqrt(2)
        singlet = np.array([0, h, -h, 0])
        assert np.allclose(state.amplitudes, np.kron(singlet, singlet), atol=1e-12)

    def test_xxz_bond_gate_matches_exponential(self):
        # three commuting Pauli rotations == expm of the full bond generator
        delta = 0.37
        gen = (np.kron(_PAULI["X"], _PAULI["X"])
               + np.kron(_PAULI["Y"], _PAULI["Y"])
               + delta * np.kron(_PAULI["Z"], _PAULI["Z"]))
        rng = rng_for(3)
        for _ in range(100):
            th = rng.uniform(-np.pi, np.pi)
            u = np.eye(4, dtype=complex)
            for p, c in (("X", 1.0), ("Y", 1.0), ("Z", delta)):
                pp = np.kron(_PAULI[p], _PAULI[p])
                u = (np.cos(c * th / 2) * np.eye(4)
                     - 1j * np.sin(c * th / 2) * pp) @ u
            ref = expm(-0.5j * th * gen)
            assert np.allclose(u, ref, atol=1e-12)
            assert np.allclose(u @ u.conj().T, np.eye(4), atol=1e-12)

    def test_default_grad_slot(self):
        assert build_hea1(4, 2).default_grad_slot() == 0
        assert build_hea2(4, 2).default_grad_slot() == 1
        assert build_xxz_hva(4, 2).default_grad_slot() == 0


class TestRealize:
    def test_p0_empty(self):
        real = realize(build_hea2(4, 3), 0.0, rng_for(0))
        assert real.meas_sites == ()

    def test_p1_all_sites(self):
        real = realize(build_hea1(8, 16), 1.0, rng_for(0))
        # opportunities after every repeated layer (see decisions ledger)
        assert len(real.meas_sites) == 8 * 16

    def test_site_count_mean(self):
        tpl = build_hea1(8, 16)
        counts = [len(realize(tpl, 0.2, rng_for(s)).meas_sites)
                  for s in range(1000)]
        mean = np.mean(counts)
        assert abs(mean - 0.2 * 8 * 16) < 1.0
        assert 22 <= mean <= 26  # spec window around the binomial mean

    def test_theta_range(self):
        real = realize(build_hea1(6, 4), 0.3, rng_for(5))
        th = real.theta_array()
        assert th.shape == (48,)
        assert np.all(th >= -np.pi) and np.all(th <= np.pi)
        assert len(real.pauli_axes) == 48
        assert set(real.pauli_axes) <= {"X", "Y", "Z"}

    def test_determinism(self):
        tpl = build_hea1(6, 4)
        a = realize(tpl, 0.4, rng_for(123), seed=123)
        b = realize(tpl, 0.4, rng_for(123), seed=123)
        assert a == b


class TestRun:
    def test_p0_trivial_record(self):
        real = realize(build_hea2(4, 2), 0.0, rng_for(7))
        _, rec = run(real)
        assert rec.outcomes == () and rec.joint_probability == 1.0

    def test_forced_all_zeros_at_p1(self):
        tpl = build_hea2(4, 3)
        real = realize(tpl, 1.0, rng_for(8))
        zeros = OutcomeRecord((0,) * len(real.meas_sites), 0.0)
        for s in range(3):
            theta = rng_for(100 + s).uniform(-np.pi, np.pi, tpl.parameter_count)
            state, _ = run(real, theta, record=zeros)
            assert abs(state.amplitudes[0] - 1.0) < 1e-12
            assert np.allclose(state.amplitudes[1:], 0.0, atol=1e-12)

    def test_forced_reproduces_sampled(self):
        tpl = build_hea1(4, 3)
        real = realize(tpl, 0.5, rng_for(11))
        theta = real.theta_array()
        s1, rec = run(real, theta, rng=rng_for(99))
        s2, rec2 = run(real, theta, record=rec)
        assert np.allclose(s1.amplitudes, s2.amplitudes, atol=1e-12)
        assert abs(rec.joint_probability - rec2.joint_probability) < 1e-12

    def test_probability_completeness(self):
        for seed in (1, 2, 3):
            tpl = build_hea1(4, 2)
            real = realize(tpl, 0.6, rng_for(seed))
            if len(real.meas_sites) > 6:
                continue
            branches = enumerate_records(real, real.theta_array())
            total = sum(p for _, p, _ in branches)
            assert abs(total - 1.0) <= 1e-10

    def test_sampled_frequencies_match_joint(self):
        tpl = build_hea2(4, 2)
        real = realize(tpl, 0.45, rng_for(17))
        theta = real.theta_array()
        branches = enumerate_records(real, theta)
        probs = {bits: p for bits, p, _ in branches}
        rng = rng_for(0)
        counts = {}
        n = 10_000
        for _ in range(n):
            _, rec = run(real, theta, rng=rng)
            counts[rec.outcomes] = counts.get(rec.outcomes, 0) + 1
        for bits, p in probs.items():
            if p < 1e-4:
                continue
            f = counts.get(bits, 0) / n
            sigma = np.sqrt(p * (1 - p) / n)
            assert abs(f - p) <= 3.5 * sigma + 1e-12

    def test_sample_trajectory_determinism(self):
        tpl = build_xxz_hva(4, 3)
        real = realize(tpl, 0.5, rng_for(23))
        s1, r1 = run(real, rng=rng_for(5))
        s2, r2 = run(real, rng=rng_for(5))
        assert r1 == r2
        assert np.array_equal(s1.amplitudes, s2.amplitudes)

    def test_dead_branch(self):
        tpl = build_hea2(4, 2)
        real = realize(tpl, 1.0, rng_for(31))
        bad = OutcomeRecord((1,) + (0,) * (len(real.meas_sites) - 1), 0.0)
        with pytest.raises(DeadBranchError) as e:
            run(real, np.zeros(tpl.parameter_count), record=bad)
        assert e.value.site is not None

    def test_theta_length_contract(self):
        real = realize(build_hea2(4, 2), 0.0, rng_for(0))
        with pytest.raises(ContractError):
            run(real, np.zeros(2))


class TestSharing:
    def test_hea2_sharing_map(self):
        tpl = build_hea2(6, 2)
        sm = tpl.sharing_map()
        assert all(len(occs) == 6 for occs in sm.values())
        assert sum(len(v) for v in sm.values()) == len(tpl.occurrences())

    def test_perturbing_shared_slot_moves_state(self):
        tpl = build_hea2(4, 2)
        real = realize(tpl, 0.0, rng_for(3))
        theta = real.theta_array()
        base, _ = run(real, theta)
        for slot in range(tpl.parameter_count):
            bumped = theta.copy()
            bumped[slot] += 0.3
            moved, _ = run(real, bumped)
            assert not np.allclose(moved.amplitudes, base.amplitudes, atol=1e-8)


class TestSerialization:
    def test_round_trip(self):
        for kind, tpl in [("hea1", build_hea1(4, 3)),
                          ("hea2", build_hea2(4, 2)),
                          ("xxz", build_xxz_hva(4, 2, delta=0.25))]:
            real = realize(tpl, 0.35, rng_for(41), seed=41)
            clone = realization_from_json(realization_to_json(real))
            assert clone == real

    def test_replay_bit_exact(self):
        real = realize(build_hea1(6, 4), 0.3, rng_for(55), seed=55)
        doc = realization_to_json(real)
        clone = realization_from_json(doc)
        s1, r1 = run(real, rng=rng_for(real.seed))
        s2, r2 = run(clone, rng=rng_for(clone.seed))
        assert r1 == r2
        assert np.array_equal(s1.amplitudes, s2.amplitudes)
