"""Sample-average mutual-information estimators for the classical-quantum
channel theta -> rho_theta probed by a two-outcome (or basis) measurement.

Three regimes: no mid-circuit measurements (noiseless), mid-circuit
measurements with outcomes known to the receiver (aware), and unknown /
marginalized (unaware). All estimates are in bits; the continuous theta
never enters through a bin count, so the estimators are exact in the
infinite-discretization limit by construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import runtime
from .ansatz import build_template, compile_program, execute, realize
from .costgrad import SITE_CAP, _branches
from .errors import CapacityError, ContractError, DeadBranchError
from .observables import Observable

MUTUALINFO_HEADER = ["ansatz", "n", "depth", "p", "estimator", "bits",
                     "stderr", "N_a", "N_b", "N_c", "seed"]

PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class MIEstimate:
    bits: float
    stderr: float
    n_a: int
    n_b: int
    n_c: int | None = None
    clamped: int = 0        # probabilities floored at PROB_FLOOR


class _Clamp:
    def __init__(self):
        self.count = 0

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        low = p < PROB_FLOOR
        self.count += int(np.count_nonzero(low))
        return np.where(low, PROB_FLOOR, p)


class ChannelSampler:
    """Interface: theta sampling plus conditional outcome distributions."""

    theta_dim: int
    n_outcomes: int
    has_measurements: bool = False

    def draw_theta(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def outcome_probs(self, theta) -> np.ndarray:
        """p(i|theta); marginal over records when the channel measures."""
        raise NotImplementedError

    # measurement interface -------------------------------------------------
    def sample_record(self, theta, rng) -> tuple[int, ...]:
        raise ContractError("channel has no mid-circuit measurements")

    def record_prob(self, theta, record) -> float:
        raise ContractError("channel has no mid-circuit measurements")

    def outcome_probs_given(self, theta, record) -> np.ndarray:
        raise ContractError("channel has no mid-circuit measurements")

    def enumerate_records(self, theta):
        raise ContractError("channel has no mid-circuit measurements")


class CircuitChannel(ChannelSampler):
    """theta -> final circuit state, measured by the observable's
    eigen-projectors (zz01 parity) or the full computational basis."""

    def __init__(self, template, obs: Observable, meas_prob: float,
                 seed: int = 0, outcome_mode: str = "parity"):
        if outcome_mode not in ("parity", "basis"):
            raise ContractError(f"unknown outcome mode {outcome_mode!r}")
        if outcome_mode == "parity" and obs.kind != "zz01":
            raise ContractError(
                "parity outcomes need an observable with a two-outcome "
                "projector decomposition (zz01)")
        if obs.n_qubits != template.n_qubits:
            raise ContractError("observable and template disagree on n")
        rng = runtime.derive_rng(seed, runtime.STREAM_MUTUALINFO, 0)
        self.realization = realize(template, meas_prob, rng, seed=seed)
        self.program = compile_program(self.realization)
        self.obs = obs
        self.outcome_mode = outcome_mode
        self.theta_dim = template.parameter_count
        self.n_outcomes = 2 if outcome_mode == "parity" else 2**template.n_qubits
        self.has_measurements = len(self.realization.meas_sites) > 0

    def draw_theta(self, rng):
        return rng.uniform(-np.pi, np.pi, size=self.theta_dim)

    def _probs_of(self, arr):
        if self.outcome_mode == "parity":
            pp, pm = self.obs.two_outcome_probs(arr)
            return np.array([pp, pm])
        return np.abs(arr.reshape(-1)) ** 2

    def outcome_probs(self, theta):
        if not self.has_measurements:
            arr, _, _ = execute(self.program, np.asarray(theta, float),
                                outcomes=())
            return self._probs_of(arr)
        if len(self.program.sites) > SITE_CAP:
            raise CapacityError(
                "marginal channel distribution needs record enumeration; "
                "too many measurement sites")
        total = np.zeros(self.n_outcomes)
        for p_m, arr, _, _ in _branches(self.program, np.asarray(theta, float)):
            total += p_m * self._probs_of(arr)
        return total

    def sample_record(self, theta, rng):
        _, outcomes, _ = execute(self.program, np.asarray(theta, float),
                                 rng=rng)
        return tuple(outcomes)

    def record_prob(self, theta, record):
        try:
            _, _, probs = execute(self.program, np.asarray(theta, float),
                                  outcomes=record)
        except DeadBranchError:
            return 0.0
        return float(np.prod(probs)) if probs else 1.0

    def outcome_probs_given(self, theta, record):
        arr, _, _ = execute(self.program, np.asarray(theta, float),
                            outcomes=record)
        return self._probs_of(arr)

    def enumerate_records(self, theta):
        if len(self.program.sites) > SITE_CAP:
            raise CapacityError("too many measurement sites to enumerate")
        out = []
        for p_m, arr, outcomes, _ in _branches(self.program,
                                               np.asarray(theta, float)):
            out.append((outcomes, p_m, self._probs_of(arr)))
        return out


def channel_from_circuit(template, obs: Observable, meas_prob: float,
                         seed: int = 0, outcome_mode: str = "parity",
                         ) -> CircuitChannel:
    return CircuitChannel(template, obs, meas_prob, seed, outcome_mode)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------
# The bootstrap resamples the outer a-blocks AND recomputes the p_B
# estimate from each resample, so the stderr sees the shared p_B noise
# (a plain block bootstrap would miss it entirely).

N_RESAMPLES = 200


def _blocked_mi(cond, counts, n_inner, rng, clamp):
    """Point estimate and bootstrap stderr for estimators of the shape
    I = mean_a (1/n_inner) sum_draws [log2 p(i|a) - log2 p_B(i)]
    with p_B the column mean of ``cond`` over the a-blocks."""
    n_a = cond.shape[0]
    log_cond = np.log2(clamp(cond))
    fixed = (counts * log_cond).sum(axis=1) / n_inner

    def total(sel):
        p_b = cond[sel].mean(axis=0)
        log_pb = np.log2(clamp(p_b))
        return float((fixed[sel] - counts[sel] @ log_pb / n_inner).mean())

    point = total(np.arange(n_a))
    reps = [total(rng.integers(0, n_a, size=n_a)) for _ in range(N_RESAMPLES)]
    return point, float(np.std(reps, ddof=1))


def mi_noiseless(ch: ChannelSampler, n_a: int, n_b: int,
                 rng: np.random.Generator) -> MIEstimate:
    """I(A,B) for a channel without mid-circuit measurements.

    p_B is the sample average of p(.|theta_a) over the same N_a draws;
    the inner i-samples are drawn from each conditional.
    """
    if ch.has_measurements:
        raise ContractError("mi_noiseless requires a measurement-free channel")
    clamp = _Clamp()
    cond = np.empty((n_a, ch.n_outcomes))
    counts = np.zeros((n_a, ch.n_outcomes))
    for a in range(n_a):
        theta = ch.draw_theta(rng)
        cond[a] = ch.outcome_probs(theta)
        idx = rng.choice(ch.n_outcomes, size=n_b, p=cond[a] / cond[a].sum())
        counts[a] = np.bincount(idx, minlength=ch.n_outcomes)
    bits, stderr = _blocked_mi(cond, counts, n_b, rng, clamp)
    return MIEstimate(bits, stderr, n_a, n_b, None, clamp.count)


def mi_unaware(ch: ChannelSampler, n_a: int, n_b: int, n_c: int,
               rng: np.random.Generator) -> MIEstimate:
    """I(A,B) with the record marginalized out on both sides.

    Every conditional p(i|theta) is replaced by its inner N_c-sample
    marginalization (1/N_c) sum_c p(i | m_c, theta) with m_c ~ p(m|theta);
    outcome draws go through the physical (m then i) route, so they sample
    the true marginal. A channel without measurements reduces exactly to
    mi_noiseless.
    """
    if not ch.has_measurements:
        return mi_noiseless(ch, n_a, n_b, rng)
    clamp = _Clamp()
    cond = np.empty((n_a, ch.n_outcomes))
    counts = np.zeros((n_a, ch.n_outcomes))
    for a in range(n_a):
        theta = ch.draw_theta(rng)
        acc = np.zeros(ch.n_outcomes)
        for _ in range(n_c):
            m = ch.sample_record(theta, rng)
            acc += ch.outcome_probs_given(theta, m)
        cond[a] = acc / n_c
        for _ in range(n_b):
            m = ch.sample_record(theta, rng)
            probs_i = ch.outcome_probs_given(theta, m)
            i = int(rng.choice(ch.n_outcomes, p=probs_i / probs_i.sum()))
            counts[a, i] += 1
    bits, stderr = _blocked_mi(cond, counts, n_b, rng, clamp)
    return MIEstimate(bits, stderr, n_a, n_b, n_c, clamp.count)


def mi_aware(ch: ChannelSampler, n_a: int, n_b: int, n_c: int,
             rng: np.random.Generator) -> MIEstimate:
    """I(A,B) when the receiver knows the record: joint outcome (i, m).

    p_B(i, m) is the nested sample average over the N_a theta draws; the
    per-(theta, record) joint conditionals are cached since records repeat.
    """
    if not ch.has_measurements:
        raise ContractError("mi_aware needs a channel with measurements")
    clamp = _Clamp()
    thetas = [ch.draw_theta(rng) for _ in range(n_a)]
    records: dict[tuple, int] = {}
    joint_tables: list[np.ndarray] = []   # per record: (n_a, K) p(i,m|theta_a')

    def record_index(m):
        if m not in records:
            table = np.empty((n_a, ch.n_outcomes))
            for ap in range(n_a):
                pm = ch.record_prob(thetas[ap], m)
                table[ap] = (pm * ch.outcome_probs_given(thetas[ap], m)
                             if pm > 0.0 else 0.0)
            records[m] = len(joint_tables)
            joint_tables.append(table)
        return records[m]

    # draws[a] = list of (record idx, outcome counts over the n_c draws)
    draws: list[list[tuple[int, np.ndarray]]] = []
    fixed = np.zeros(n_a)
    for a in range(n_a):
        per_a = []
        for _ in range(n_b):
            m = ch.sample_record(thetas[a], rng)
            ri = record_index(m)
            cond_i = ch.outcome_probs_given(thetas[a], m)
            idx = rng.choice(ch.n_outcomes, size=n_c, p=cond_i / cond_i.sum())
            cnt = np.bincount(idx, minlength=ch.n_outcomes).astype(float)
            per_a.append((ri, cnt))
            fixed[a] += float(cnt @ np.log2(clamp(joint_tables[ri][a])))
        draws.append(per_a)
    fixed /= n_b * n_c

    def total(sel):
        means = {ri: tab[sel].mean(axis=0)
                 for ri, tab in enumerate(joint_tables)}
        acc = 0.0
        for a in sel:
            pen = 0.0
            for ri, cnt in draws[a]:
                pen += float(cnt @ np.log2(clamp(means[ri])))
            acc += fixed[a] - pen / (n_b * n_c)
        return acc / len(sel)

    point = total(np.arange(n_a))
    reps = [total(rng.integers(0, n_a, size=n_a)) for _ in range(N_RESAMPLES)]
    return MIEstimate(point, float(np.std(reps, ddof=1)), n_a, n_b, n_c,
                      clamp.count)


# ---------------------------------------------------------------------------
# depth sweep (Fig. 6 style)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MISweepConfig:
    ansatz: str = "hea2"
    n_list: tuple[int, ...] = (6, 8, 10, 12)
    depth_list: tuple[int, ...] | None = None   # None: 1,2,4,... up to 4N
    n_a: int = 2000
    n_b: int = 2000
    obs_kind: str = "zz01"
    delta: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class MIRow:
    ansatz: str
    n: int
    depth: int
    p: float
    estimator: str
    bits: float
    stderr: float
    n_a: int
    n_b: int
    n_c: int | None
    seed: int


def default_depths(n: int) -> tuple[int, ...]:
    depths = []
    d = 1
    while d < 4 * n:
        depths.append(d)
        d *= 2
    depths.append(4 * n)
    return tuple(depths)


def mi_depth_sweep(cfg: MISweepConfig) -> list[MIRow]:
    """I(A,B) vs circuit depth per system size, no mid-circuit measurements."""
    rows = []
    for ni, n in enumerate(cfg.n_list):
        depths = cfg.depth_list if cfg.depth_list else default_depths(n)
        obs = Observable(cfg.obs_kind, n, cfg.delta)
        for di, depth in enumerate(depths):
            tpl = build_template(cfg.ansatz, n, depth, cfg.delta)
            ch = channel_from_circuit(tpl, obs, 0.0, seed=cfg.seed)
            rng = runtime.derive_rng(cfg.seed, runtime.STREAM_MUTUALINFO,
                                     1 + ni, di)
            est = mi_noiseless(ch, cfg.n_a, cfg.n_b, rng)
            rows.append(MIRow(cfg.ansatz, n, depth, 0.0, "noiseless",
                              est.bits, est.stderr, cfg.n_a, cfg.n_b, None,
                              cfg.seed))
    return rows


def write_mutualinfo_csv(rows, path):
    runtime.write_csv(
        path, MUTUALINFO_HEADER,
        [(r.ansatz, r.n, r.depth, r.p, r.estimator, r.bits, r.stderr,
          r.n_a, r.n_b, "" if r.n_c is None else r.n_c, r.seed)
         for r in rows])
