"""Run protocol programs on the stabilizer, statevector, or density engines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import statevector as sv
from .errors import CapExceededError, NonCliffordGateError, ProtocolError
from .photonics import emission_survival, scattering_survival
from .protocol import GateOp, LatticeGeometry, ProtocolProgram, build_cluster_program
from .stabilizer import StabilizerTableau

ENGINES = ("stabilizer", "statevector", "density")

_PREP = {"0": [], "1": ["X"], "+": ["H"], "-": ["X", "H"]}


@dataclass
class EngineState:
    engine: str
    state: object  # StabilizerTableau | PureState | MixedState
    program: ProtocolProgram
    seed: int
    measurements: list = field(default_factory=list)

    @property
    def n_qubits(self) -> int:
        return self.state.n


class _Backend:
    def __init__(self, engine, n, caps):
        self.engine = engine
        if engine == "stabilizer":
            self.state = StabilizerTableau(n)
        elif engine == "statevector":
            self.state = sv.PureState.zeros(n, cap=caps.get("pure"))
        elif engine == "density":
            self.state = sv.MixedState.zeros(n, cap=caps.get("mixed"))
        else:
            raise ProtocolError(f"unknown engine {engine!r}; choose from {ENGINES}")

    def apply(self, g: GateOp, rng, step=None):
        if g.kind == "MeasureX":
            return self.measure_x(g.targets[0], rng)
        if self.engine == "stabilizer":
            if not g.is_clifford or g.matrix is not None:
                raise NonCliffordGateError(g.kind, step)
            self.state.apply(g.kind, *g.targets)
        elif self.engine == "statevector":
            self.state = sv.apply_unitary(self.state, g)
        else:
            self.state = sv.apply_unitary_mixed(self.state, g)
        return None

    def measure_x(self, q, rng):
        if self.engine == "stabilizer":
            outcome, _ = self.state.measure_x(q, rng)
        elif self.engine == "statevector":
            self.state, outcome = sv.measure_x(self.state, q, rng)
        else:
            self.state, outcome = sv.measure_x_mixed(self.state, q, rng)
        return outcome


def _prepare(backend, qubit, label):
    for kind in _PREP[label]:
        backend.apply(GateOp(kind, (qubit,)), None)


def run(program: ProtocolProgram, engine: str = "statevector", seed: int = 0, *,
        caps: dict | None = None,
        after_gate: Callable | None = None) -> EngineState:
    """Execute ``program`` step by step and return the joint tape + emitter state.

    ``after_gate(backend_state, gate, role_targets, step)`` may return a
    replacement state; it is how noise channels are inserted.  ``seed`` only
    feeds measurements.
    """
    caps = caps or {}
    if engine == "stabilizer" and not program.is_clifford:
        for k in range(1, program.K + 1):
            for g in program.step_gates(k):
                if not g.is_clifford:
                    raise NonCliffordGateError(g.kind, k)
        raise NonCliffordGateError("final", None)
    try:
        backend = _Backend(engine, program.n_qubits, caps)
    except CapExceededError as exc:
        raise CapExceededError(f"{exc} (program has {program.K} steps of "
                               f"{program.p} photon(s) plus the emitter)",
                               required=exc.required, cap=exc.cap, step=program.K) from None
    rng = np.random.default_rng(seed)
    record = []
    _prepare(backend, program.emitter_qubit, program.emitter_init)
    for k in range(1, program.K + 1):
        for slot, label in enumerate(program.fresh_init):
            _prepare(backend, program.fresh_tape_index(k, slot) - 1, label)
        for g in program.step_gates(k):
            qubits = [program.resolve(t, k) for t in g.targets]
            if any(q is None for q in qubits):
                continue
            resolved = g.with_targets(qubits)
            outcome = backend.apply(resolved, rng, step=k)
            if outcome is not None:
                record.append({"step": k, "qubit": qubits[0], "outcome": outcome})
            if after_gate is not None:
                replaced = after_gate(backend.state, g, qubits, k)
                if replaced is not None:
                    backend.state = replaced
    for g in program.resolved_final():
        outcome = backend.apply(g, rng, step=program.K)
        if outcome is not None:
            record.append({"step": "final", "qubit": g.targets[0], "outcome": outcome})
    return EngineState(engine, backend.state, program, seed, record)


@dataclass
class Byproduct:
    outcome: int
    corrected_qubits: list


def disentangle_emitter(result: EngineState, seed: int | None = None):
    """Remove the emitter from a cluster-program output.

    The emitter is a leaf of the output graph, attached to tape vertex ``K``.
    It is measured in the basis that deletes the vertex (X before the closing
    Hadamard, i.e. Z on the output), ``Z`` is applied to its graph neighbour
    on outcome -1, and the emitter is reset to ``|0>``.  The tape is then the
    graph state of the emitter-free lattice whatever the outcome.
    """
    program = result.program
    if program.name != "cluster":
        raise ProtocolError("disentangle_emitter expects a cluster program output")
    rng = np.random.default_rng(result.seed if seed is None else seed)
    q = program.emitter_qubit
    backend = _Backend.__new__(_Backend)
    backend.engine = result.engine
    backend.state = result.state.copy()
    h = GateOp("H", (q,))
    backend.apply(h, None)
    outcome = backend.measure_x(q, rng)
    backend.apply(h, None)
    corrected = []
    if outcome == -1:
        geometry = LatticeGeometry.cluster(program.N, program.K)
        for v in geometry.neighbors("Q"):
            backend.apply(GateOp("Z", (geometry.qubit_of(v),)), None)
            corrected.append(geometry.qubit_of(v))
        backend.apply(GateOp("X", (q,)), None)
    out = EngineState(result.engine, backend.state, program, result.seed,
                      result.measurements + [{"step": "disentangle", "qubit": q, "outcome": outcome}])
    return out, Byproduct(outcome, corrected)


# -- photon loss -------------------------------------------------------------------


def run_lossy_cluster(N: int, K: int, eta_l: float, eta_r: float, *, caps: dict | None = None):
    """Density-matrix run of the cluster program with photon loss.

    Each photon is damped with ``emission_survival(eta_l)`` right after the
    CX that creates it, and with ``scattering_survival(eta_r)`` right after
    the CZ of its second pass.  Returns ``(MixedState, fidelity)`` against
    the loss-free cluster state.
    """
    p_emit = emission_survival(eta_l)
    p_scat = scattering_survival(eta_r)
    program = build_cluster_program(N, K)

    def loss(state, g, qubits, k):
        if g.kind == "CX" and p_emit < 1.0:
            return sv.apply_amplitude_damping(state, qubits[1], p_emit)
        if g.kind == "CZ" and p_scat < 1.0:
            return sv.apply_amplitude_damping(state, qubits[1], p_scat)
        return None

    noisy = run(program, "density", caps=caps, after_gate=loss)
    ideal = run(program, "statevector")
    return noisy.state, sv.fidelity_to_pure(noisy.state, ideal.state)
