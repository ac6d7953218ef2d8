"""Projective and mixed cost functions and their gradients.

Three independent gradient routes are provided for both cost families:
an analytic forward/backward sweep, the per-occurrence parameter-shift
rule, and central finite differences (the test oracle).

Numerical convention: the engine renormalizes the state after every
projection and renormalizes the backward states by the same branch
probabilities, so no quantity ever carries the raw joint probability
p_M (which underflows for deep, heavily measured circuits). In this
scaling the analytic projective gradient is

    dC_M/dtheta_k = sum_occ -coeff * Im[<a|A b> - <O>_M <a|A c>]

with |a> the forward state after the occurrence, |b> the backward image
of O|psi_M>, |c> the backward image of |psi_M>, and A the occurrence's
Pauli-string generator. The mixed gradient keeps only the first term,
weighted by the branch probability and summed over outcome branches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ansatz import (
    BRANCH_EPS,
    CircuitRealization,
    OutcomeRecord,
    Program,
    apply_gate_record,
    compile_program,
    execute,
)
from .errors import CapacityError, ContractError, DeadBranchError
from .observables import Observable
from .stats import bootstrap_stderr
from .statevec import pauli_string_apply, project_arr

SITE_CAP = 16          # exact enumeration bound: 2^SITE_CAP branches
PRUNE_EPS = 1e-30      # branches below this probability contribute ~0


@dataclass(frozen=True)
class CostValue:
    value: float
    variant: str                      # "projective" | "mixed"
    record: OutcomeRecord | None = None
    stderr: float | None = None


def _theta_vec(realization, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape[0] != realization.template.parameter_count:
        raise ContractError("theta length does not match parameter_count")
    return theta


def projective_cost(realization: CircuitRealization, theta, record: OutcomeRecord,
                    obs: Observable) -> CostValue:
    """<O> in the state post-selected on ``record``, p_M recomputed at theta."""
    theta = _theta_vec(realization, theta)
    program = compile_program(realization)
    arr, _, probs = execute(program, theta, outcomes=record.outcomes)
    val = float(np.vdot(arr, obs.apply(arr)).real)
    joint = float(np.prod(probs)) if probs else 1.0
    return CostValue(val, "projective", OutcomeRecord(record.outcomes, joint))


def mixed_cost_exact(realization: CircuitRealization, theta, obs: Observable,
                     site_cap: int = SITE_CAP) -> CostValue:
    """C(theta) = sum_M p_M <O>_M by exact branch enumeration."""
    theta = _theta_vec(realization, theta)
    program = compile_program(realization)
    _check_capacity(program, site_cap)
    total = 0.0
    for p_m, arr, _, _ in _branches(program, theta):
        total += p_m * float(np.vdot(arr, obs.apply(arr)).real)
    return CostValue(total, "mixed")


def mixed_cost_sampled(realization: CircuitRealization, theta, obs: Observable,
                       n_samples: int, rng: np.random.Generator) -> CostValue:
    """Trajectory average of <O>_M over Born-sampled outcome records.

    N_s = 1 returns a single-trajectory C_M with undefined stderr.
    """
    if n_samples < 1:
        raise ContractError("need at least 1 sample")
    theta = _theta_vec(realization, theta)
    program = compile_program(realization)
    vals = np.empty(n_samples)
    for s in range(n_samples):
        arr, _, _ = execute(program, theta, rng=rng)
        vals[s] = float(np.vdot(arr, obs.apply(arr)).real)
    stderr = (bootstrap_stderr(vals, "mean", rng=rng) if n_samples >= 2
              else None)
    return CostValue(float(vals.mean()), "mixed", stderr=stderr)


# ---------------------------------------------------------------------------
# analytic gradients
# ---------------------------------------------------------------------------

def _backward_sweep(program: Program, theta, outcomes, probs, final_arr,
                    obs: Observable, n_params: int, shifts=None,
                    include_norm_term=True, seg_starts=None,
                    forward_lists=None, slots=None) -> tuple[float, np.ndarray]:
    """One forced branch's gradient; see module docstring for the formula.

    Forward states come either from ``forward_lists`` (per-segment lists
    of the state before/after every gate, as collected by the forward
    pass) or are rebuilt per segment from ``seg_starts`` checkpoints.
    ``slots`` restricts which parameter slots accumulate (others stay 0).
    """
    b = obs.apply(final_arr)
    exp_val = float(np.vdot(final_arr, b).real)
    c = final_arr.copy() if include_norm_term else None
    grads = np.zeros(n_params)
    pos = len(outcomes)
    for seg_idx in range(len(program.segments) - 1, -1, -1):
        gates, measured = program.segments[seg_idx]
        for q in reversed(measured):
            pos -= 1
            o, p = outcomes[pos], probs[pos]
            rt = math.sqrt(p)
            b, _ = project_arr(b, q, o)
            b /= rt
            if c is not None:
                c, _ = project_arr(c, q, o)
                c /= rt
        if forward_lists is not None:
            forward = forward_lists[seg_idx]
        else:
            forward = [seg_starts[seg_idx]]
            for g in gates:
                forward.append(apply_gate_record(forward[-1], g, theta, shifts))
        for t in range(len(gates) - 1, -1, -1):
            g = gates[t]
            if g[0] == "rot" and (slots is None or g[3] in slots):
                a = forward[t + 1]
                term = np.vdot(a, pauli_string_apply(b, g[1], g[2]))
                if c is not None:
                    term -= exp_val * np.vdot(a, pauli_string_apply(c, g[1], g[2]))
                grads[g[3]] += -g[4] * term.imag
            b = apply_gate_record(b, g, theta, shifts, adjoint=True)
            if c is not None:
                c = apply_gate_record(c, g, theta, shifts, adjoint=True)
    return exp_val, grads


def projective_cost_and_grad(realization: CircuitRealization, theta,
                             record: OutcomeRecord, obs: Observable,
                             ) -> tuple[float, np.ndarray]:
    """Post-selected cost and its analytic gradient from one sweep."""
    theta = _theta_vec(realization, theta)
    program = compile_program(realization)
    ckpts: list = []
    arr, _, probs = execute(program, theta, outcomes=record.outcomes,
                            checkpoints=ckpts)
    return _backward_sweep(program, theta, record.outcomes, probs, arr, obs,
                           theta.shape[0], seg_starts=ckpts)


def projective_grad_analytic(realization: CircuitRealization, theta,
                             record: OutcomeRecord, obs: Observable) -> np.ndarray:
    """Gradient of the post-selected cost; shared slots accumulate over
    all bound gate occurrences."""
    return projective_cost_and_grad(realization, theta, record, obs)[1]


def mixed_grad(realization: CircuitRealization, theta, obs: Observable,
               mode: str = "exact", site_cap: int = SITE_CAP,
               slots=None) -> np.ndarray:
    """Outcome-averaged gradient; ``slots`` restricts the parameter-shift
    mode to a subset of parameter slots (entries elsewhere stay 0)."""
    theta = _theta_vec(realization, theta)
    program = compile_program(realization)
    _check_capacity(program, site_cap)
    n_params = theta.shape[0]
    if mode == "exact":
        grads = np.zeros(n_params)
        wanted = None if slots is None else set(int(s) for s in slots)
        for p_m, arr, outcomes, state_trace in _branches(program, theta,
                                                         keep_checkpoints=True):
            flists, probs = state_trace
            _, g = _backward_sweep(program, theta, outcomes, probs, arr, obs,
                                   n_params, include_norm_term=False,
                                   forward_lists=flists, slots=wanted)
            grads += p_m * g
        return grads
    if mode == "paramshift":
        grads = np.zeros(n_params)
        wanted = None if slots is None else set(int(s) for s in slots)
        for occ, (slot, coeff) in enumerate(program.occ_slots):
            if wanted is not None and slot not in wanted:
                continue
            plus = _mixed_cost_program(program, theta, obs, {occ: +np.pi / 2})
            minus = _mixed_cost_program(program, theta, obs, {occ: -np.pi / 2})
            grads[slot] += coeff * 0.5 * (plus - minus)
        return grads
    raise ContractError(f"unknown mixed gradient mode {mode!r}")


def mixed_grad_sampled(realization: CircuitRealization, theta, obs: Observable,
                       n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo mixed gradient: Born-sampled branches, first-term sweep."""
    theta = _theta_vec(realization, theta)
    program = compile_program(realization)
    n_params = theta.shape[0]
    acc = np.zeros(n_params)
    for _ in range(n_samples):
        ckpts: list = []
        arr, outcomes, probs = execute(program, theta, rng=rng,
                                       checkpoints=ckpts)
        _, g = _backward_sweep(program, theta, outcomes, probs, arr, obs,
                               n_params, include_norm_term=False,
                               seg_starts=ckpts)
        acc += g
    return acc / n_samples


# ---------------------------------------------------------------------------
# parameter-shift gradients
# ---------------------------------------------------------------------------

_RESUME_BYTES_CAP = 64 * 2**20


def _replay_forced(program: Program, theta, outcomes, shifts, ops, start,
                   arr, meas_pos):
    """Run ``ops[start:]`` forward from a checkpoint state."""
    logp = 0.0
    for op in ops[start:]:
        if op[0] == "g":
            arr = apply_gate_record(arr, op[1], theta, shifts)
        else:
            o = outcomes[meas_pos]
            arr, p = project_arr(arr, op[1], o)
            if p < BRANCH_EPS:
                diag = program.sites[meas_pos]
                raise DeadBranchError(
                    f"forced outcome {o} at site {diag} has probability "
                    f"{p:.3e}", site=diag)
            arr = arr / math.sqrt(p)
            logp += math.log(p)
            meas_pos += 1
    return arr, logp


def projective_grad_paramshift(realization: CircuitRealization, theta,
                               record: OutcomeRecord, obs: Observable,
                               slots=None) -> np.ndarray:
    """Per-occurrence +-pi/2 shifts; occurrences of a shared slot are
    shifted one at a time and summed (their generators need not commute).
    ``slots`` restricts evaluation to a subset of parameter slots.

    A shifted occurrence only changes the circuit suffix, so each shifted
    evaluation resumes from a checkpoint taken just before that gate in
    the baseline pass (when the checkpoints fit in memory). Probability
    ratios p_M(shifted)/p_M(theta) are formed in log space so deep records
    cannot underflow.
    """
    theta = _theta_vec(realization, theta)
    program = compile_program(realization)
    ops = program.flat_ops()
    n_occ = len(program.occ_slots)
    keep_ckpts = n_occ * 2**program.n * 16 <= _RESUME_BYTES_CAP

    # baseline pass, checkpointing the state before each parameterized gate
    from .statevec import new_zero_state
    arr = new_zero_state(program.n).tensor().copy()
    ckpt: list[tuple[int, np.ndarray, int, float]] = []
    meas_pos = 0
    logp = 0.0
    for t, op in enumerate(ops):
        if op[0] == "g":
            g = op[1]
            if g[0] == "rot" and keep_ckpts:
                ckpt.append((t, arr, meas_pos, logp))
            arr = apply_gate_record(arr, g, theta)
        else:
            o = record.outcomes[meas_pos]
            arr, p = project_arr(arr, op[1], o)
            if p < BRANCH_EPS:
                raise DeadBranchError(
                    f"forced outcome {o} at site {program.sites[meas_pos]} "
                    f"has probability {p:.3e}", site=program.sites[meas_pos])
            arr = arr / math.sqrt(p)
            logp += math.log(p)
            meas_pos += 1
    exp0 = float(np.vdot(arr, obs.apply(arr)).real)
    total_logp = logp

    grads = np.zeros(theta.shape[0])
    wanted = None if slots is None else set(int(s) for s in slots)
    for occ, (slot, coeff) in enumerate(program.occ_slots):
        if wanted is not None and slot not in wanted:
            continue
        vals = {}
        for sign in (+1, -1):
            shifts = {occ: sign * np.pi / 2}
            try:
                if keep_ckpts:
                    t, start_arr, pos, logp_prefix = ckpt[occ]
                    sarr, logp_suffix = _replay_forced(
                        program, theta, record.outcomes, shifts, ops, t,
                        start_arr, pos)
                    logp_shift = logp_prefix + logp_suffix
                else:
                    sarr, _, sprobs = execute(program, theta,
                                              outcomes=record.outcomes,
                                              shifts=shifts)
                    logp_shift = (float(np.sum(np.log(sprobs)))
                                  if sprobs else 0.0)
            except DeadBranchError as exc:
                raise DeadBranchError(
                    f"dead branch under shift {sign:+d}*pi/2 of occurrence "
                    f"{occ} (slot {slot}): {exc}", site=exc.site,
                    shift=(occ, slot, sign * np.pi / 2))
            ratio = math.exp(logp_shift - total_logp)
            vals[sign] = (float(np.vdot(sarr, obs.apply(sarr)).real), ratio)
        (ep, rp), (em, rm) = vals[+1], vals[-1]
        grads[slot] += coeff * (0.5 * (ep * rp - em * rm)
                                - 0.5 * exp0 * (rp - rm))
    return grads


def finite_difference_grad(cost_fn, theta, h: float = 1e-5) -> np.ndarray:
    """Central differences (C(theta + h e_k) - C(theta - h e_k)) / 2h."""
    if not 1e-7 <= h <= 1e-3:
        raise ContractError(f"step {h} outside [1e-7, 1e-3]")
    theta = np.asarray(theta, dtype=float)
    grads = np.empty_like(theta)
    for k in range(theta.shape[0]):
        up = theta.copy()
        up[k] += h
        dn = theta.copy()
        dn[k] -= h
        grads[k] = (cost_fn(up) - cost_fn(dn)) / (2.0 * h)
    return grads


# ---------------------------------------------------------------------------
# branch enumeration
# ---------------------------------------------------------------------------

def _check_capacity(program: Program, site_cap: int):
    if len(program.sites) > site_cap:
        raise CapacityError(
            f"{len(program.sites)} measurement sites exceed the exact "
            f"enumeration cap {site_cap}; use mixed_cost_sampled")


def _branches(program: Program, theta, shifts=None, keep_checkpoints=False):
    """DFS over all outcome strings with shared prefixes.

    Yields (p_M, final tensor, outcomes tuple, trace) where trace is
    (per-segment forward state lists, probs) when ``keep_checkpoints`` is
    set (the lists feed the gradient sweep directly). Branches with
    probability below PRUNE_EPS are dropped; they contribute nothing to
    outcome-averaged quantities.
    """
    from .statevec import new_zero_state

    def walk(seg_idx, arr, flists, outcomes, probs):
        if seg_idx == len(program.segments):
            p_m = float(np.prod(probs)) if probs else 1.0
            trace = (list(flists), list(probs)) if keep_checkpoints else None
            yield p_m, arr, tuple(outcomes), trace
            return
        gates, measured = program.segments[seg_idx]
        if keep_checkpoints:
            forward = [arr]
            for g in gates:
                forward.append(apply_gate_record(forward[-1], g, theta, shifts))
            arr = forward[-1]
            flists_here = flists + [forward]
        else:
            for g in gates:
                arr = apply_gate_record(arr, g, theta, shifts)
            flists_here = flists

        def branch(i, sub, outs, prs):
            if i == len(measured):
                yield from walk(seg_idx + 1, sub, flists_here, outs, prs)
                return
            q = measured[i]
            for o in (0, 1):
                nxt, p = project_arr(sub, q, o)
                if p < PRUNE_EPS:
                    continue
                yield from branch(i + 1, nxt / math.sqrt(p), outs + [o], prs + [p])

        yield from branch(0, arr, outcomes, probs)

    root = new_zero_state(program.n).tensor().copy()
    yield from walk(0, root, [], [], [])


def _mixed_cost_program(program: Program, theta, obs: Observable, shifts) -> float:
    total = 0.0
    for p_m, arr, _, _ in _branches(program, theta, shifts=shifts):
        total += p_m * float(np.vdot(arr, obs.apply(arr)).real)
    return total
