"""Protocol programs for sequential emission with a delay-line queue.

At step ``k`` the emitter interacts with the ``p`` fresh tape qubits of that
step and with one *returning* qubit that was written ``N`` steps earlier and
has travelled through the queue.  Tape qubits are numbered from 1; fresh slot
``j`` of step ``k`` is tape qubit ``p*(k-1) + j + 1``.  The returning qubit of
step ``k`` is the queue slot of step ``k-N``; for ``k <= N`` it does not exist
yet and every gate addressing it is skipped (it would act on ``|0>``).

Engines place tape qubit ``t`` on qubit index ``t-1`` and the emitter on the
last index ``p*K``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ProtocolError

SQRT1_2 = 1.0 / math.sqrt(2.0)

GATE_MATRICES = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    # basis index = 2*control + target
    "CX": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
}

ONE_QUBIT = {"H", "X", "Z", "S", "MeasureX", "Unitary1"}
TWO_QUBIT = {"CZ", "CX", "Unitary2"}
GATE_KINDS = ONE_QUBIT | TWO_QUBIT
CLIFFORD_KINDS = {"H", "X", "Z", "S", "CZ", "CX", "MeasureX"}

INIT_STATES = ("0", "1", "+", "-")

UNITARY_TOL = 1e-12
FORMAT_VERSION = 1


@dataclass(frozen=True, order=True)
class QubitRef:
    """Symbolic gate target inside a program.

    ``kind`` is one of ``emitter``, ``tape`` (``index`` is the 1-based tape
    position), ``returning`` or ``fresh`` (``index`` is the slot within the
    step).
    """

    kind: str
    index: int = 0

    def __post_init__(self):
        if self.kind not in ("emitter", "tape", "returning", "fresh"):
            raise ProtocolError(f"unknown qubit reference kind {self.kind!r}")
        if self.kind == "tape" and self.index < 1:
            raise ProtocolError(f"tape indices are 1-based, got {self.index}")
        if self.kind == "fresh" and self.index < 0:
            raise ProtocolError(f"fresh slot must be non-negative, got {self.index}")

    @classmethod
    def parse(cls, token) -> "QubitRef":
        if isinstance(token, QubitRef):
            return token
        if isinstance(token, bool):
            raise ProtocolError(f"bad qubit reference {token!r}")
        if isinstance(token, int):
            return cls("tape", token)
        if isinstance(token, str):
            t = token.strip()
            if t in ("Q", "emitter"):
                return cls("emitter")
            if t == "returning":
                return cls("returning")
            if t == "fresh":
                return cls("fresh", 0)
            if t.startswith("fresh:"):
                return cls("fresh", int(t.split(":", 1)[1]))
        raise ProtocolError(f"bad qubit reference {token!r}")

    def to_json(self):
        if self.kind == "emitter":
            return "Q"
        if self.kind == "tape":
            return self.index
        if self.kind == "returning":
            return "returning"
        return "fresh" if self.index == 0 else f"fresh:{self.index}"

    def __str__(self):
        return str(self.to_json())


EMITTER = QubitRef("emitter")
RETURNING = QubitRef("returning")


def fresh(slot: int = 0) -> QubitRef:
    return QubitRef("fresh", slot)


def _freeze_matrix(matrix):
    if matrix is None:
        return None
    arr = np.asarray(matrix, dtype=complex)
    return tuple(tuple(complex(v) for v in row) for row in arr)


@dataclass(frozen=True)
class GateOp:
    """A gate and its targets.

    Targets are :class:`QubitRef` inside programs.  Engine-level calls may use
    plain ints, which are 0-based qubit indices.  Two-qubit matrices act on
    the basis ``|t0 t1>`` with ``t0`` the more significant bit, so
    ``CX(control, target)``.
    """

    kind: str
    targets: tuple
    matrix: tuple | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ProtocolError(f"unknown gate kind {self.kind!r}")
        targets = tuple(t if isinstance(t, (int, np.integer)) and not isinstance(t, bool)
                        else QubitRef.parse(t) for t in self.targets)
        targets = tuple(int(t) if isinstance(t, (int, np.integer)) else t for t in targets)
        object.__setattr__(self, "targets", targets)
        arity = 1 if self.kind in ONE_QUBIT else 2
        if len(targets) != arity:
            raise ProtocolError(f"{self.kind} takes {arity} target(s), got {len(targets)}")
        if arity == 2 and targets[0] == targets[1]:
            raise ProtocolError(f"{self.kind} targets must differ, got {targets}")
        if self.kind.startswith("Unitary"):
            if self.matrix is None:
                raise ProtocolError(f"{self.kind} needs a matrix")
            mat = _freeze_matrix(self.matrix)
            object.__setattr__(self, "matrix", mat)
            arr = np.array(mat, dtype=complex)
            dim = 2 ** arity
            if arr.shape != (dim, dim):
                raise ProtocolError(f"{self.kind} matrix must be {dim}x{dim}, got {arr.shape}")
            dev = np.max(np.abs(arr.conj().T @ arr - np.eye(dim)))
            if dev > UNITARY_TOL:
                raise ProtocolError(f"{self.kind} matrix is not unitary (deviation {dev:.3e})")
        elif self.matrix is not None:
            raise ProtocolError(f"{self.kind} does not take a matrix")

    @property
    def is_clifford(self) -> bool:
        return self.kind in CLIFFORD_KINDS

    @property
    def is_unitary(self) -> bool:
        return self.kind != "MeasureX"

    def unitary(self) -> np.ndarray:
        if self.kind == "MeasureX":
            raise ProtocolError("MeasureX has no unitary matrix")
        if self.matrix is not None:
            return np.array(self.matrix, dtype=complex)
        return GATE_MATRICES[self.kind]

    def with_targets(self, targets) -> "GateOp":
        return GateOp(self.kind, tuple(targets), self.matrix)

    def to_json(self) -> dict:
        out = {"kind": self.kind,
               "targets": [t.to_json() if isinstance(t, QubitRef) else t for t in self.targets]}
        if self.matrix is not None:
            out["matrix"] = [[[v.real, v.imag] for v in row] for row in self.matrix]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GateOp":
        matrix = obj.get("matrix")
        if matrix is not None:
            matrix = [[complex(re, im) for re, im in row] for row in matrix]
        try:
            kind = obj["kind"]
            targets = obj["targets"]
        except KeyError as exc:
            raise ProtocolError(f"gate entry missing field {exc}") from None
        # integers in files are 1-based tape positions, not engine indices
        return cls(kind, tuple(QubitRef.parse(t) for t in targets), matrix)

    def __str__(self):
        return f"{self.kind}({', '.join(str(t) for t in self.targets)})"


def gate(kind: str, *targets, matrix=None) -> GateOp:
    return GateOp(kind, tuple(targets), matrix)


@dataclass(frozen=True)
class ProtocolProgram:
    """Executable description of a sequential-emission protocol.

    Either ``template`` (applied at every step) or ``steps`` (one gate list
    per step) is given.  ``final`` holds emitter-only gates applied once after
    the last step.  ``fresh_init`` gives the preparation of each fresh slot,
    ``queue_slot`` the fresh slot that enters the delay line, and
    ``physical_legs`` the order of the physical legs of extracted step tensors.
    """

    N: int
    K: int
    physical_per_step: int = 1
    template: tuple | None = None
    steps: tuple | None = None
    emitter_init: str = "0"
    fresh_init: tuple | None = None
    queue_slot: int = 0
    physical_legs: tuple | None = None
    final: tuple = ()
    emitter_dim: int = 2
    name: str = ""

    def __post_init__(self):
        p = self.physical_per_step
        if self.N < 1:
            raise ProtocolError(f"queue length N must be >= 1, got {self.N}")
        if self.K < 0:
            raise ProtocolError(f"step count K must be >= 0, got {self.K}")
        if p < 1:
            raise ProtocolError(f"physical_per_step must be >= 1, got {p}")
        if self.emitter_dim != 2:
            raise ProtocolError("only qubit emitters (emitter_dim=2) are supported")
        if (self.template is None) == (self.steps is None):
            raise ProtocolError("give exactly one of template or steps")
        if self.template is not None:
            object.__setattr__(self, "template", tuple(self.template))
        else:
            steps = tuple(tuple(s) for s in self.steps)
            if len(steps) != self.K:
                raise ProtocolError(f"steps lists {len(steps)} entries for K={self.K}")
            object.__setattr__(self, "steps", steps)
        if self.emitter_init not in INIT_STATES:
            raise ProtocolError(f"emitter_init must be one of {INIT_STATES}")
        fi = tuple(self.fresh_init) if self.fresh_init is not None else ("0",) * p
        if len(fi) != p or any(s not in INIT_STATES for s in fi):
            raise ProtocolError(f"fresh_init must list {p} states from {INIT_STATES}")
        object.__setattr__(self, "fresh_init", fi)
        if not 0 <= self.queue_slot < p:
            raise ProtocolError(f"queue_slot {self.queue_slot} outside 0..{p - 1}")
        if self.physical_legs is None:
            legs = (RETURNING,) + tuple(fresh(j) for j in range(p) if j != self.queue_slot)
        else:
            legs = tuple(QubitRef.parse(t) for t in self.physical_legs)
        expected = {RETURNING} | {fresh(j) for j in range(p) if j != self.queue_slot}
        if len(legs) != p or set(legs) != expected:
            raise ProtocolError("physical_legs must order the returning qubit and the "
                                "non-queue fresh slots")
        object.__setattr__(self, "physical_legs", legs)
        final = tuple(self.final)
        for g in final:
            if any(t != EMITTER for t in g.targets):
                raise ProtocolError(f"final gate {g} may only act on the emitter")
        object.__setattr__(self, "final", final)
        for k in range(1, self.K + 1) if self.steps is not None else ():
            for g in self.steps[k - 1]:
                self._check_local(g, k)
        for g in self.template or ():
            for t in g.targets:
                if not isinstance(t, QubitRef) or t.kind == "tape":
                    raise ProtocolError(f"template gate {g} must use Q/returning/fresh targets")
                self._check_slot(t, g)

    # -- geometry of the tape -------------------------------------------------

    @property
    def p(self) -> int:
        return self.physical_per_step

    @property
    def n_tape(self) -> int:
        return self.p * self.K

    @property
    def n_qubits(self) -> int:
        return self.n_tape + 1

    @property
    def emitter_qubit(self) -> int:
        return self.n_tape

    def fresh_tape_index(self, k: int, slot: int = 0) -> int:
        return self.p * (k - 1) + slot + 1

    def returning_tape_index(self, k: int) -> int | None:
        """Tape index of the qubit returning at step ``k``; None while the queue fills."""
        if k <= self.N:
            return None
        return self.fresh_tape_index(k - self.N, self.queue_slot)

    def resolve(self, ref, k: int) -> int | None:
        """Engine qubit index for ``ref`` at step ``k``, or None if the gate is skipped."""
        if isinstance(ref, int):
            return ref
        if ref.kind == "emitter":
            return self.emitter_qubit
        if ref.kind == "fresh":
            return self.fresh_tape_index(k, ref.index) - 1
        if ref.kind == "returning":
            t = self.returning_tape_index(k)
            return None if t is None else t - 1
        return ref.index - 1

    def step_gates(self, k: int) -> tuple:
        if not 1 <= k <= self.K:
            raise ProtocolError(f"step {k} outside 1..{self.K}")
        return self.template if self.template is not None else self.steps[k - 1]

    def resolved_step(self, k: int) -> list:
        """Gates of step ``k`` with engine qubit indices; skipped gates omitted."""
        out = []
        for g in self.step_gates(k):
            qubits = [self.resolve(t, k) for t in g.targets]
            if any(q is None for q in qubits):
                continue
            out.append(g.with_targets(qubits))
        return out

    def resolved_final(self) -> list:
        return [g.with_targets([self.emitter_qubit] * len(g.targets)) for g in self.final]

    def window_role(self, ref, k: int) -> QubitRef:
        """Map a target of step ``k`` to its symbolic role (emitter/returning/fresh)."""
        if ref.kind != "tape":
            return ref
        t = ref.index
        if self.returning_tape_index(k) == t:
            return RETURNING
        first = self.fresh_tape_index(k, 0)
        if first <= t < first + self.p:
            return fresh(t - first)
        raise ProtocolError(f"step {k} touches tape qubit {t}, outside its window "
                            f"(emitter, returning {self.returning_tape_index(k)}, "
                            f"fresh {first}..{first + self.p - 1})")

    def _check_slot(self, ref, g):
        if ref.kind == "fresh" and ref.index >= self.p:
            raise ProtocolError(f"gate {g} addresses fresh slot {ref.index} but p={self.p}")

    def _check_local(self, g, k):
        for t in g.targets:
            if not isinstance(t, QubitRef):
                raise ProtocolError(f"step {k}: program gates need symbolic targets, got {g}")
            self._check_slot(t, g)
            self.window_role(t, k)

    @property
    def is_clifford(self) -> bool:
        gates = list(self.final)
        gates += list(self.template) if self.template is not None else [g for s in self.steps for g in s]
        return all(g.is_clifford for g in gates)

    # -- serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        out = {
            "version": FORMAT_VERSION,
            "N": self.N,
            "K": self.K,
            "physical_per_step": self.p,
            "emitter_init": self.emitter_init,
            "fresh_init": list(self.fresh_init),
            "queue_slot": self.queue_slot,
            "physical_legs": [t.to_json() for t in self.physical_legs],
        }
        if self.name:
            out["name"] = self.name
        if self.template is not None:
            out["template"] = {"gates": [g.to_json() for g in self.template]}
        else:
            out["steps"] = [{"gates": [g.to_json() for g in s]} for s in self.steps]
        if self.final:
            out["final"] = {"gates": [g.to_json() for g in self.final]}
        return out

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, obj: dict) -> "ProtocolProgram":
        version = obj.get("version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ProtocolError(f"unsupported program version {version}")
        for key in ("N", "K"):
            if key not in obj:
                raise ProtocolError(f"program file missing field {key!r}")

        def gates(block):
            return tuple(GateOp.from_json(g) for g in block.get("gates", []))

        template = gates(obj["template"]) if "template" in obj else None
        steps = tuple(gates(s) for s in obj["steps"]) if "steps" in obj else None
        final = gates(obj["final"]) if "final" in obj else ()
        return cls(
            N=int(obj["N"]), K=int(obj["K"]),
            physical_per_step=int(obj.get("physical_per_step", 1)),
            template=template, steps=steps,
            emitter_init=obj.get("emitter_init", "0"),
            fresh_init=tuple(obj["fresh_init"]) if "fresh_init" in obj else None,
            queue_slot=int(obj.get("queue_slot", 0)),
            physical_legs=tuple(obj["physical_legs"]) if "physical_legs" in obj else None,
            final=final,
            name=obj.get("name", ""),
        )

    @classmethod
    def from_json(cls, text: str) -> "ProtocolProgram":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def build_cluster_program(N: int, K: int) -> ProtocolProgram:
    """Program whose output is the 2D cluster state with shifted periodic boundaries.

    Each step applies ``H(Q)``, then ``CZ(Q, returning)`` (skipped while the
    queue fills), then ``CX(Q, fresh)``, starting from ``|0>_Q``; one ``H(Q)``
    closes the protocol.  This is the same state as grouping the step as
    ``CZ, CX, H`` with the emitter initialised in ``|+>``, so with ``K = 0``
    the output is ``|+>_Q``.
    """
    if N < 1 or K < 0:
        raise ProtocolError(f"need N >= 1 and K >= 0, got N={N}, K={K}")
    template = (gate("H", EMITTER), gate("CZ", EMITTER, RETURNING), gate("CX", EMITTER, fresh(0)))
    return ProtocolProgram(N=N, K=K, template=template, emitter_init="0",
                           final=(gate("H", EMITTER),), name="cluster")


TORIC_FRESH_INIT = ("+", "0", "0", "+")


def check_photonic_gate(g: GateOp, position=None) -> None:
    """Reject gates the emitter-photon hardware cannot apply."""
    where = f"gate {position} " if position is not None else "gate "
    targets = [QubitRef.parse(t) if not isinstance(t, QubitRef) else t for t in g.targets]
    if g.kind in ("H", "X", "Z", "S", "Unitary1"):
        if targets[0] != EMITTER:
            raise ProtocolError(f"{where}{g}: single-qubit gates are only available on the emitter")
        return
    if g.kind == "CX":
        if targets[0] != EMITTER or targets[1] == EMITTER:
            raise ProtocolError(f"{where}{g}: CX must be controlled by the emitter onto a photon")
        return
    if g.kind == "CZ":
        if EMITTER not in targets:
            raise ProtocolError(f"{where}{g}: CZ must involve the emitter")
        return
    raise ProtocolError(f"{where}{g}: {g.kind} is not an emitter-photon gate")


def build_toric_program(N: int, cells: int, gate_list: Sequence[GateOp], *,
                        queue_slot: int = 0, physical_legs=None) -> ProtocolProgram:
    """Four-photon-per-step program for comparing a candidate circuit with the toric tensor.

    Fresh slots 0 and 3 start in ``|+>``, slots 1 and 2 in ``|0>``, and the
    emitter in ``|+>``.
    """
    gates = tuple(gate_list)
    for i, g in enumerate(gates):
        check_photonic_gate(g, i)
    return ProtocolProgram(N=N, K=cells, physical_per_step=4, template=gates,
                           emitter_init="+", fresh_init=TORIC_FRESH_INIT,
                           queue_slot=queue_slot, physical_legs=physical_legs, name="toric")


def load_program(path) -> ProtocolProgram:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"{path}: not valid JSON ({exc})") from None
    return ProtocolProgram.from_dict(obj)


# -- lattice geometry ------------------------------------------------------------


def _edge(u, v):
    if u == v:
        raise ProtocolError(f"self-loop at {u}")
    a, b = sorted((u, v), key=lambda w: (isinstance(w, str), w))
    return (a, b)


@dataclass(frozen=True)
class LatticeGeometry:
    """Graph on tape vertices ``1..K`` plus, optionally, the emitter ``"Q"``."""

    N: int
    K: int
    edges: frozenset
    include_emitter: bool = True
    vertices: tuple = field(init=False)

    def __post_init__(self):
        verts = tuple(range(1, self.K + 1)) + (("Q",) if self.include_emitter else ())
        object.__setattr__(self, "vertices", verts)
        edges = frozenset(_edge(u, v) for u, v in self.edges)
        vs = set(verts)
        for u, v in edges:
            if u not in vs or v not in vs:
                raise ProtocolError(f"edge {(u, v)} leaves the vertex set")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def cluster(cls, N: int, K: int, include_emitter: bool = True) -> "LatticeGeometry":
        """Chain ``1..K-Q`` plus chords ``(k, k+N)``.

        Duplicate edges cancel (two CZs are the identity), which only happens
        for ``N = 1``.
        """
        edges = set()

        def toggle(e):
            edges.symmetric_difference_update({_edge(*e)})

        for k in range(1, K):
            toggle((k, k + 1))
        if K >= 1 and include_emitter:
            toggle((K, "Q"))
        for k in range(1, K - N + 1):
            toggle((k, k + N))
        return cls(N, K, frozenset(edges), include_emitter)

    def without_emitter(self) -> "LatticeGeometry":
        return LatticeGeometry(self.N, self.K, frozenset(e for e in self.edges if "Q" not in e), False)

    def neighbors(self, v) -> list:
        out = [b if a == v else a for a, b in self.edges if v in (a, b)]
        return sorted(out, key=lambda w: (isinstance(w, str), w))

    def qubit_of(self, v) -> int:
        """Engine qubit index of a vertex (tape ``k`` -> ``k-1``, emitter -> ``K``)."""
        return self.K if v == "Q" else v - 1

    def coordinate(self, k: int) -> tuple:
        """(row, column) of tape vertex ``k`` on the cylinder of circumference N."""
        if not 1 <= k <= self.K:
            raise ProtocolError(f"vertex {k} outside 1..{self.K}")
        return (-(-k // self.N), (k - 1) % self.N + 1)

    def to_dict(self) -> dict:
        return {"N": self.N, "K": self.K, "include_emitter": self.include_emitter,
                "edges": sorted([list(e) for e in self.edges], key=lambda e: (str(e[0]), str(e[1])))}


# -- timing feasibility ----------------------------------------------------------


@dataclass(frozen=True)
class FeasibilityParams:
    """Timing and bandwidth parameters.  ``tau`` may instead come from ``L`` and ``c``."""

    T: float
    B: float
    gamma_r: float
    tau: float | None = None
    gamma_l: float | None = None
    L: float | None = None
    c: float | None = None
    margin: float = 10.0

    def __post_init__(self):
        if self.tau is None and (self.L is None or self.c is None):
            raise ProtocolError("need tau, or both L and c")
        for name in ("T", "B", "gamma_r", "tau", "gamma_l", "L", "c", "margin"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ProtocolError(f"{name} must be positive, got {value}")
        if self.L is not None and self.c is not None:
            tau = 2.0 * self.L / self.c
            if self.tau is not None and not math.isclose(self.tau, tau, rel_tol=1e-9):
                raise ProtocolError(f"tau={self.tau} disagrees with 2L/c={tau}")
            object.__setattr__(self, "tau", tau)


@dataclass(frozen=True)
class Inequality:
    lhs: float
    rhs: float

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "pass": self.passed}


@dataclass(frozen=True)
class FeasibilityReport:
    N_inferred: float
    integral: bool
    ineq1: Inequality
    ineq2: Inequality

    @property
    def verdict(self) -> bool:
        return self.ineq1.passed and self.ineq2.passed

    def to_dict(self) -> dict:
        n = int(round(self.N_inferred)) if self.integral else self.N_inferred
        return {"N_inferred": n, "integral": self.integral, "ineq1": self.ineq1.to_dict(),
                "ineq2": self.ineq2.to_dict(), "verdict": self.verdict}


def check_feasibility(params: FeasibilityParams) -> FeasibilityReport:
    """Check ``N ~ tau/T << tau*B << gamma_R*tau`` with ``<<`` read as a factor ``margin``.

    N is inferred from ``tau = (N - 1/2) T``.
    """
    n = params.tau / params.T + 0.5
    integral = abs(n - round(n)) <= 1e-9 * max(1.0, abs(n))
    tau_b = params.tau * params.B
    ineq1 = Inequality(n * params.margin, tau_b)
    ineq2 = Inequality(tau_b * params.margin, params.gamma_r * params.tau)
    return FeasibilityReport(n, integral, ineq1, ineq2)

