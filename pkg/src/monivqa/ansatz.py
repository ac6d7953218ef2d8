"""Circuit templates, stochastic realizations, and the execution engine.

A template fixes the gate structure of one ansatz family; a realization
pins everything stochastic about one monitored circuit: measurement-gate
locations, HEA1 rotation axes, and the initial parameter vector.

Layer layout: the optional initial block is applied once, then the L
repeated layers. Each repeated layer (including the last) is followed by
a measurement opportunity on every qubit, taken with probability p when
the circuit is realized. Sites are labelled (layer, qubit) with layer in
[0, L).
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DeadBranchError
from .statevec import (
    GateSpec,
    State,
    cnot_apply,
    fixed2_apply,
    new_zero_state,
    project_arr,
    rotation_apply,
)

BRANCH_EPS = 1e-12

_SQ2 = 1.0 / math.sqrt(2.0)
# U|00> = (|01> - |10>)/sqrt(2), completed to a real orthogonal matrix
_SINGLET_PREP = (
    (0.0, 1.0, 0.0, 0.0),
    (_SQ2, 0.0, _SQ2, 0.0),
    (-_SQ2, 0.0, _SQ2, 0.0),
    (0.0, 0.0, 0.0, 1.0),
)


def even_pairs(n: int) -> list[tuple[int, int]]:
    return [(q, q + 1) for q in range(0, n - 1, 2)]


def odd_pairs(n: int) -> list[tuple[int, int]]:
    """Periodic pairing: on n=4 the odd pairs are (1,2) and (3,0)."""
    return [(q, (q + 1) % n) for q in range(1, n, 2)]


@dataclass(frozen=True)
class CircuitTemplate:
    ansatz_kind: str
    n_qubits: int
    n_layers: int
    initial: tuple[GateSpec, ...]
    layers: tuple[tuple[GateSpec, ...], ...]
    parameter_count: int
    delta: float | None = None

    def all_gates(self):
        yield from self.initial
        for layer in self.layers:
            yield from layer

    def occurrences(self) -> list[tuple[int, float]]:
        """(parameter_slot, coeff) of every parameterized gate in order."""
        return [(g.parameter_slot, g.coeff) for g in self.all_gates()
                if g.parameter_slot is not None]

    def sharing_map(self) -> dict[int, tuple[int, ...]]:
        """parameter_slot -> indices into occurrences()."""
        out: dict[int, list[int]] = {}
        for occ, (slot, _) in enumerate(self.occurrences()):
            out.setdefault(slot, []).append(occ)
        return {k: tuple(v) for k, v in out.items()}

    def n_axis_slots(self) -> int:
        return sum(1 for g in self.all_gates()
                   if g.kind == "rotation" and g.axes is None)

    def default_grad_slot(self) -> int:
        """First parameter slot of the first repeated layer."""
        for g in self.layers[0]:
            if g.parameter_slot is not None:
                return g.parameter_slot
        raise ContractError("template has no parameterized gate in layer 0")


def _check_even(n: int):
    if n < 2 or n % 2:
        raise ContractError(f"qubit count must be even and >= 2, got {n}")


def build_hea1(n: int, layers: int, rng=None) -> CircuitTemplate:
    """Hardware-efficient ansatz with per-qubit random-axis rotations.

    Axes are pinned per realization, not here (``rng`` is accepted for
    signature symmetry but unused); every rotation has its own parameter.
    """
    _check_even(n)
    if layers < 1:
        raise ContractError("need at least one layer")
    layer_list = []
    slot = 0
    for _ in range(layers):
        gates: list[GateSpec] = []
        for q in range(n):
            gates.append(GateSpec("rotation", (q,), None, parameter_slot=slot))
            slot += 1
        gates += [GateSpec("cnot", p) for p in even_pairs(n)]
        for q in range(n):
            gates.append(GateSpec("rotation", (q,), None, parameter_slot=slot))
            slot += 1
        gates += [GateSpec("cnot", p) for p in odd_pairs(n)]
        layer_list.append(tuple(gates))
    return CircuitTemplate("hea1", n, layers, (), tuple(layer_list), slot)


def build_hea2(n: int, layers: int) -> CircuitTemplate:
    """Y-rotation walls with one shared parameter per wall; 2L+1 parameters."""
    _check_even(n)
    if layers < 1:
        raise ContractError("need at least one layer")
    initial = tuple(GateSpec("rotation", (q,), ("Y",), parameter_slot=0)
                    for q in range(n))
    layer_list = []
    for l in range(layers):
        gates = [GateSpec("rotation", (q,), ("Y",), parameter_slot=2 * l + 1)
                 for q in range(n)]
        gates += [GateSpec("cnot", p) for p in even_pairs(n)]
        gates += [GateSpec("rotation", (q,), ("Y",), parameter_slot=2 * l + 2)
                  for q in range(n)]
        gates += [GateSpec("cnot", p) for p in odd_pairs(n)]
        layer_list.append(tuple(gates))
    return CircuitTemplate("hea2", n, layers, initial, tuple(layer_list),
                           2 * layers + 1)


def build_xxz_hva(n: int, layers: int, delta: float = 0.5) -> CircuitTemplate:
    """Hamiltonian variational ansatz for the periodic XXZ chain.

    Starts from singlets on even bonds. Each layer applies the odd-bond
    then the even-bond half of exp(-i*theta/2 * sum(XX+YY+delta*ZZ)); the
    bond terms commute within a parity class, so each bond gate is the
    product of three commuting Pauli-string rotations (XX, YY, ZZ with
    angle scaled by delta), which equals the exact 4x4 bond exponential.
    Parameters are shared within each half-layer: 2L in total.
    """
    _check_even(n)
    if layers < 1:
        raise ContractError("need at least one layer")
    initial = tuple(GateSpec("fixed_2q", p, matrix=_SINGLET_PREP)
                    for p in even_pairs(n))

    def bond_gates(pairs, slot):
        gates = []
        for p in pairs:
            gates.append(GateSpec("rotation", p, ("X", "X"), slot))
            gates.append(GateSpec("rotation", p, ("Y", "Y"), slot))
            gates.append(GateSpec("rotation", p, ("Z", "Z"), slot, coeff=delta))
        return gates

    layer_list = []
    for l in range(layers):
        gates = bond_gates(odd_pairs(n), 2 * l)
        gates += bond_gates(even_pairs(n), 2 * l + 1)
        layer_list.append(tuple(gates))
    return CircuitTemplate("xxz_hva", n, layers, initial, tuple(layer_list),
                           2 * layers, delta=delta)


_BUILDERS = {"hea1": build_hea1, "hea2": build_hea2, "xxz_hva": build_xxz_hva}


def build_template(kind: str, n: int, layers: int, delta: float = 0.5,
                   ) -> CircuitTemplate:
    kind = kind.lower()
    if kind not in _BUILDERS:
        raise ContractError(f"unknown ansatz kind {kind!r}")
    if kind == "xxz_hva":
        return build_xxz_hva(n, layers, delta)
    return _BUILDERS[kind](n, layers)


@dataclass(frozen=True)
class CircuitRealization:
    """A template with all stochastic choices pinned.

    Draw order under ``realize`` (part of the determinism contract):
    measurement sites by (layer, qubit), then theta, then HEA1 axes in
    execution order.
    """

    template: CircuitTemplate
    meas_prob: float
    meas_sites: tuple[tuple[int, int], ...]
    pauli_axes: tuple[str, ...]
    theta: tuple[float, ...]
    seed: int

    def theta_array(self) -> np.ndarray:
        return np.array(self.theta, dtype=float)


@dataclass(frozen=True)
class OutcomeRecord:
    """Measurement outcomes ordered like the realization's meas_sites."""

    outcomes: tuple[int, ...]
    joint_probability: float


EMPTY_RECORD = OutcomeRecord((), 1.0)


def realize(template: CircuitTemplate, meas_prob: float,
            rng: np.random.Generator, seed: int = 0) -> CircuitRealization:
    if not 0.0 <= meas_prob <= 1.0:
        raise ContractError(f"measurement probability {meas_prob} outside [0,1]")
    # one uniform per (layer, qubit) slot, consumed in C order, so this
    # matches the documented per-site draw sequence
    hits = rng.random((template.n_layers, template.n_qubits)) < meas_prob
    sites = [(int(l), int(q)) for l, q in np.argwhere(hits)]
    theta = rng.uniform(-np.pi, np.pi, size=template.parameter_count)
    axes = tuple(str(a) for a in
                 rng.choice(["X", "Y", "Z"], size=template.n_axis_slots()))
    return CircuitRealization(template, meas_prob, tuple(sites), axes,
                              tuple(float(t) for t in theta), seed)


# ---------------------------------------------------------------------------
# compiled programs and the execution engine
# ---------------------------------------------------------------------------

@dataclass
class Program:
    """Realization lowered to flat per-segment gate lists.

    Gate records:
      ("rot", targets, axes, slot, coeff, occ)
      ("cnot", control, target)
      ("fixed2", q1, q2, matrix ndarray)
    ``segments`` holds (gates, measured_qubits); segment 0 is the initial
    block (never measured), segment l+1 is repeated layer l.
    """

    n: int
    segments: list[tuple[list[tuple], list[int]]]
    sites: list[tuple[int, int]]
    occ_slots: list[tuple[int, float]]

    def flat_ops(self) -> list[tuple]:
        """Execution order as ("g", gate) / ("m", qubit) records."""
        ops = []
        for gates, measured in self.segments:
            ops.extend(("g", g) for g in gates)
            ops.extend(("m", q) for q in measured)
        return ops


@functools.lru_cache(maxsize=32)
def compile_program(real: CircuitRealization) -> Program:
    """Lower a realization for the execution engine (cached; realizations
    are immutable and hashable, and callers never mutate the Program)."""
    tpl = real.template
    axes_iter = iter(real.pauli_axes)
    occ_slots: list[tuple[int, float]] = []

    def lower(gates):
        out = []
        for g in gates:
            if g.kind == "rotation":
                axes = g.axes if g.axes is not None else (next(axes_iter),)
                occ = len(occ_slots)
                occ_slots.append((g.parameter_slot, g.coeff))
                out.append(("rot", g.targets, axes, g.parameter_slot, g.coeff, occ))
            elif g.kind == "cnot":
                out.append(("cnot", g.targets[0], g.targets[1]))
            else:
                out.append(("fixed2", g.targets[0], g.targets[1], g.matrix_array()))
        return out

    by_layer: dict[int, list[int]] = {}
    for layer, q in sorted(real.meas_sites):
        by_layer.setdefault(layer, []).append(q)
    segments = [(lower(tpl.initial), [])]
    for l in range(tpl.n_layers):
        segments.append((lower(tpl.layers[l]), by_layer.get(l, [])))
    return Program(tpl.n_qubits, segments, sorted(real.meas_sites), occ_slots)


def _gate_angle(g, theta, shifts):
    phi = g[4] * theta[g[3]]
    if shifts and g[5] in shifts:
        phi += shifts[g[5]]
    return phi


def apply_gate_record(arr, g, theta, shifts=None, adjoint=False):
    if g[0] == "rot":
        phi = _gate_angle(g, theta, shifts)
        return rotation_apply(arr, g[1], g[2], -phi if adjoint else phi)
    if g[0] == "cnot":
        return cnot_apply(arr, g[1], g[2])
    u = g[3].conj().T if adjoint else g[3]
    return fixed2_apply(arr, g[1], g[2], u)


def execute(program: Program, theta, *, rng=None, outcomes=None, shifts=None,
            checkpoints: list | None = None):
    """Run a compiled program, renormalizing after each projection.

    Exactly one of ``rng`` (sample mode) / ``outcomes`` (forced mode) is
    given. Returns (final tensor, outcomes, branch_probs). When
    ``checkpoints`` is a list, the state entering every segment is
    appended to it (used by the gradient sweep).

    Raises DeadBranchError when a forced branch probability drops below
    BRANCH_EPS at its site.
    """
    if (rng is None) == (outcomes is None):
        raise ContractError("give exactly one of rng / outcomes")
    arr = new_zero_state(program.n).tensor().copy()
    got: list[int] = []
    probs: list[float] = []
    pos = 0
    for gates, measured in program.segments:
        if checkpoints is not None:
            checkpoints.append(arr)
        for g in gates:
            arr = apply_gate_record(arr, g, theta, shifts)
        for q in measured:
            if outcomes is not None:
                o = outcomes[pos]
                arr, p = project_arr(arr, q, o)
                if p < BRANCH_EPS:
                    raise DeadBranchError(
                        f"forced outcome {o} at site {program.sites[pos]} has "
                        f"probability {p:.3e}", site=program.sites[pos])
                arr = arr / math.sqrt(p)
            else:
                v0 = arr[(slice(None),) * q + (0,)]
                p0 = float(np.vdot(v0, v0).real)
                o = 0 if rng.random() < p0 else 1
                arr, p = project_arr(arr, q, o)
                p = p0 if o == 0 else 1.0 - p0
                arr = arr / math.sqrt(p)
            got.append(o)
            probs.append(p)
            pos += 1
    return arr, got, probs


def run(realization: CircuitRealization, theta=None, *, rng=None,
        record: OutcomeRecord | None = None) -> tuple[State, OutcomeRecord]:
    """Execute a monitored circuit in sample or forced mode.

    Sample mode draws each outcome by the Born rule from ``rng``; forced
    mode projects onto ``record`` and renormalizes. The returned record
    carries the joint probability of the outcome string either way.
    """
    theta = realization.theta_array() if theta is None else np.asarray(theta, float)
    if theta.shape[0] != realization.template.parameter_count:
        raise ContractError(
            f"theta has {theta.shape[0]} entries, template needs "
            f"{realization.template.parameter_count}")
    program = compile_program(realization)
    if record is not None:
        if len(record.outcomes) != len(program.sites):
            raise ContractError("record does not align with meas_sites")
        arr, got, probs = execute(program, theta, outcomes=record.outcomes)
    elif rng is not None:
        arr, got, probs = execute(program, theta, rng=rng)
    elif not program.sites:
        arr, got, probs = execute(program, theta, outcomes=())
    else:
        raise ContractError("a monitored circuit needs rng or a record")
    joint = float(np.prod(probs)) if probs else 1.0
    state = State(realization.template.n_qubits, arr.reshape(-1), 1.0)
    return state, OutcomeRecord(tuple(got), joint)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def realization_to_json(real: CircuitRealization) -> str:
    doc = {
        "ansatz": real.template.ansatz_kind,
        "n": real.template.n_qubits,
        "layers": real.template.n_layers,
        "delta": real.template.delta,
        "p": real.meas_prob,
        "seed": real.seed,
        "meas_sites": [list(s) for s in real.meas_sites],
        "axes": list(real.pauli_axes),
        "theta": list(real.theta),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def realization_from_json(text: str) -> CircuitRealization:
    doc = json.loads(text)
    tpl = build_template(doc["ansatz"], doc["n"], doc["layers"],
                         delta=doc["delta"] if doc["delta"] is not None else 0.5)
    return CircuitRealization(
        tpl, float(doc["p"]),
        tuple((int(l), int(q)) for l, q in doc["meas_sites"]),
        tuple(doc["axes"]), tuple(float(t) for t in doc["theta"]),
        int(doc["seed"]))
