"""Step tensors, the isometry test, exact network contraction, and the toric tensor.

A step tensor has legs ``(i_1 .. i_p, a, b, c, d)``: the physical outputs,
the vertical (queue) output ``a``, the emitter output ``b``, the vertical
input ``c`` and the emitter input ``d``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import statevector as sv
from .errors import CapExceededError, ProtocolError
from .protocol import EMITTER, INIT_STATES, RETURNING, GateOp, ProtocolProgram
from .stabilizer import PauliString

_INIT_VECTORS = {
    "0": np.array([1.0, 0.0], dtype=complex),
    "1": np.array([0.0, 1.0], dtype=complex),
    "+": np.array([1.0, 1.0], dtype=complex) / np.sqrt(2),
    "-": np.array([1.0, -1.0], dtype=complex) / np.sqrt(2),
}
assert set(_INIT_VECTORS) == set(INIT_STATES)

TENSOR_LAYOUT = "row-major (i...,a,b,c,d)"
_TENSOR_MAGIC = b"PQTN1\n"


@dataclass
class StepTensor:
    p: int
    D_v: int
    d_Q: int
    data: np.ndarray
    physical_labels: tuple = ()

    def __post_init__(self):
        shape = (2,) * self.p + (self.D_v, self.d_Q, self.D_v, self.d_Q)
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != shape:
            raise ProtocolError(f"tensor shape {self.data.shape} does not match {shape}")
        if not self.physical_labels:
            self.physical_labels = tuple(f"i{j + 1}" for j in range(self.p))

    def gram(self) -> np.ndarray:
        """``G[(c,d),(c',d')] = sum_{i,a,b} U conj(U')``."""
        m = self.data.reshape(-1, self.D_v * self.d_Q)
        return m.T @ m.conj()

    def scaled(self, factor: float) -> "StepTensor":
        return StepTensor(self.p, self.D_v, self.d_Q, self.data * factor, self.physical_labels)

    def header(self) -> dict:
        return {"p": self.p, "D_v": self.D_v, "d_Q": self.d_Q, "layout": TENSOR_LAYOUT,
                "physical_legs": list(self.physical_labels)}


@dataclass
class IsometryReport:
    deviation: float
    tol: float
    gram_scale: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tol

    def to_dict(self) -> dict:
        return {"deviation": self.deviation, "tol": self.tol,
                "gram_scale": self.gram_scale, "pass": self.passed}


def check_isometry(t: StepTensor, tol: float = 1e-12) -> IsometryReport:
    """Deviation of the Gram matrix over output legs from the identity."""
    g = t.gram()
    dev = float(np.max(np.abs(g - np.eye(g.shape[0]))))
    scale = float(np.real(np.trace(g)) / g.shape[0])
    return IsometryReport(dev, tol, scale)


# -- extraction -------------------------------------------------------------------------


def _window_index(program: ProtocolProgram, ref, k: int) -> int:
    """Local window qubit: fresh slot j -> j, returning -> p, emitter -> p+1."""
    role = program.window_role(ref, k) if not isinstance(ref, int) else None
    if role is None:
        raise ProtocolError("step tensors need symbolic gate targets")
    if role.kind == "emitter":
        return program.p + 1
    if role.kind == "returning":
        return program.p
    return role.index


def step_window_gates(program: ProtocolProgram, k: int) -> list:
    """Gates of step ``k`` addressed to local window qubits, with skipped gates dropped."""
    out = []
    for g in program.step_gates(k):
        if k <= program.N and any(program.window_role(t, k) == RETURNING for t in g.targets):
            continue
        out.append(g.with_targets([_window_index(program, t, k) for t in g.targets]))
    return out


def step_unitary(program: ProtocolProgram, k: int) -> np.ndarray:
    """Dense unitary of step ``k`` on its ``p + 2`` window qubits (little-endian)."""
    n = program.p + 2
    dim = 2 ** n
    u = np.eye(dim, dtype=complex)
    gates = step_window_gates(program, k)
    for col in range(dim):
        state = sv.PureState(n, u[:, col].copy())
        for g in gates:
            state = sv.apply_unitary(state, g)
        u[:, col] = state.amplitudes
    return u


def extract_step_tensor(program: ProtocolProgram, k: int) -> StepTensor:
    """Matrix elements ``<i, a, b| U[k] |c, fresh init, d>`` of step ``k``.

    For ``k <= N`` the returning qubit does not exist yet; its gates are
    skipped, so that tensor wires ``c`` straight to the returning physical leg.
    """
    p = program.p
    n = p + 2
    u = step_unitary(program, k)
    # input legs: returning = c, emitter = d, fresh slots in their init states
    fresh_in = np.ones(1, dtype=complex)
    for label in reversed(program.fresh_init):
        fresh_in = np.kron(fresh_in, _INIT_VECTORS[label])
    # amplitude index = d * 2^(p+1) + c * 2^p + fresh
    u_t = u.reshape(2 ** n, 2, 2, 2 ** p)  # (out, d, c, fresh)
    cols = np.tensordot(u_t, fresh_in, axes=([3], [0]))  # (out, d, c)
    out = cols.reshape((2,) * n + (2, 2))  # axes: qubit n-1 .. 0, d, c

    def axis_of(local):
        return n - 1 - local

    phys_axes = []
    labels = []
    for ref in program.physical_legs:
        local = p if ref == RETURNING else ref.index
        phys_axes.append(axis_of(local))
        labels.append(str(ref))
    order = phys_axes + [axis_of(program.queue_slot), axis_of(p + 1), n + 1, n]
    data = np.transpose(out, order)
    return StepTensor(p, 2, 2, np.ascontiguousarray(data), tuple(labels))


def cluster_step_closed_form() -> np.ndarray:
    """``delta_{i,c} delta_{a,b} (-1)^{b(c+d)} / sqrt 2`` as a (2,2,2,2,2) array."""
    t = np.zeros((2,) * 5)
    for i, a, b, c, d in np.ndindex(*t.shape):
        if i == c and a == b:
            t[i, a, b, c, d] = (-1) ** (b * (c + d)) / np.sqrt(2)
    return t


# -- toric tensor ------------------------------------------------------------------------------


def toric_tensor(normalization: float = 0.5) -> StepTensor:
    """``norm * d(a+b,i1) d(d+a,i2) d(c+d,i3) d(b+c,i4)`` with sums mod 2.

    The default 1/2 makes the tensor an exact isometry; 1/4 gives a Gram
    matrix of ``I/4``.
    """
    t = np.zeros((2,) * 8, dtype=complex)
    for a, b, c, d in np.ndindex(2, 2, 2, 2):
        t[a ^ b, d ^ a, c ^ d, b ^ c, a, b, c, d] = normalization
    return StepTensor(4, 2, 2, t)


# -- protocol network contraction ------------------------------------------------------


@dataclass
class TensorNetwork:
    """Step tensors in protocol order with the queue wiring of ``program``.

    The horizontal bond chains consecutive tensors; the vertical output of
    tensor ``k`` feeds the vertical input of tensor ``k + N``.  The first
    emitter input carries the initial emitter state, the first ``N``
    vertical inputs carry ``|0>``.
    """

    program: ProtocolProgram
    tensors: list = field(default_factory=list)

    @classmethod
    def from_program(cls, program: ProtocolProgram) -> "TensorNetwork":
        cache = {}
        tensors = []
        for k in range(1, program.K + 1):
            key = (k <= program.N, None if program.template is not None else k)
            if key not in cache:
                cache[key] = extract_step_tensor(program, k)
            tensors.append(cache[key])
        return cls(program, tensors)

    def wiring(self) -> list:
        """Bond list ``(kind, from_step, to_step)``; ``0`` and ``K+1`` denote the boundary."""
        N, K = self.program.N, self.program.K
        bonds = [("horizontal", k, k + 1) for k in range(0, K + 1)]
        bonds += [("vertical", k - N if k > N else 0, k) for k in range(1, K + 1)]
        bonds += [("vertical", k, K + 1) for k in range(max(1, K - N + 1), K + 1)]
        return bonds


def _max_contract_qubits() -> int:
    return int(os.environ.get("PHOTONIC_QUEUE_MAX_PURE_QUBITS", sv.DEFAULT_MAX_PURE))


def _final_emitter_matrix(program: ProtocolProgram) -> np.ndarray:
    m = np.eye(2, dtype=complex)
    for g in program.final:
        m = g.unitary() @ m
    return m


def contract_protocol_network(net: TensorNetwork, outcome=None, *, cap: int | None = None):
    """Contract the network tensor by tensor, carrying the queue as the boundary.

    With ``outcome`` (one bit per engine qubit, qubit 0 first) the physical
    legs are projected as soon as they appear and the amplitude is returned;
    without it the full state is returned as a :class:`PureState` in engine
    qubit order.
    """
    program = net.program
    N, K, p = program.N, program.K, program.p
    cap = _max_contract_qubits() if cap is None else cap
    n = program.n_qubits
    amplitude_mode = outcome is not None
    if amplitude_mode:
        outcome = [int(b) for b in outcome]
        if len(outcome) != n or any(b not in (0, 1) for b in outcome):
            raise ProtocolError(f"outcome must list {n} bits")
        required = N + 1 + p
    else:
        required = n
    if required > cap:
        raise CapExceededError(f"contraction needs {required} qubit-equivalent legs; cap is {cap}",
                               required=required, cap=cap)

    # psi axes are labelled; queue holds labels of open vertical legs (oldest first)
    emitter0 = _INIT_VECTORS[program.emitter_init]
    psi = emitter0.copy()
    labels = ["Q"]
    queue = []
    for j in range(N):
        psi = np.multiply.outer(psi, _INIT_VECTORS["0"])
        labels.append(("init", j))
        queue.append(("init", j))

    for k, t in enumerate(net.tensors, start=1):
        c_ax = labels.index(queue[0])
        d_ax = labels.index("Q")
        psi = np.tensordot(psi, t.data, axes=([c_ax, d_ax], [p + 2, p + 3]))
        rest = [lab for i, lab in enumerate(labels) if i not in (c_ax, d_ax)]
        new = []
        for ref in program.physical_legs:
            if ref == RETURNING:
                new.append(("tape", program.returning_tape_index(k) - 1) if k > N else ("phantom", k))
            else:
                new.append(("tape", program.fresh_tape_index(k, ref.index) - 1))
        a_label = ("tape", program.fresh_tape_index(k, program.queue_slot) - 1)
        labels = rest + new + [a_label, "Q"]
        queue = queue[1:] + [a_label]
        # close legs that are final physical outputs
        for lab in new:
            if lab[0] == "phantom" or amplitude_mode:
                bit = 0 if lab[0] == "phantom" else outcome[lab[1]]
                ax = labels.index(lab)
                psi = np.take(psi, bit, axis=ax)
                labels.pop(ax)

    ax = labels.index("Q")
    psi = np.moveaxis(np.tensordot(_final_emitter_matrix(program), psi, axes=([1], [ax])), 0, ax)
    if any(lab[0] == "init" for lab in labels if lab != "Q"):
        # K < N: unused initial queue legs are still |0>
        for lab in [lab for lab in labels if lab != "Q" and lab[0] == "init"]:
            ax = labels.index(lab)
            psi = np.take(psi, 0, axis=ax)
            labels.pop(ax)
    if amplitude_mode:
        for lab in list(labels):
            q = n - 1 if lab == "Q" else lab[1]
            ax = labels.index(lab)
            psi = np.take(psi, outcome[q], axis=ax)
            labels.pop(ax)
        return complex(psi)
    qubit_of = [n - 1 if lab == "Q" else lab[1] for lab in labels]
    order = sorted(range(len(labels)), key=lambda i: -qubit_of[i])
    vec = np.transpose(psi, order).reshape(-1)
    return sv.PureState(n, np.ascontiguousarray(vec))


# -- torus ---------------------------------------------------------------------------------


def contract_torus(t: StepTensor, Tx: int, Ty: int, *, cap: int = 20) -> sv.PureState:
    """Periodic ``Tx x Ty`` grid of copies of ``t``; returns the normalised physical state.

    Bonds: ``b(x,y) = d(x+1,y)`` and ``a(x,y) = c(x,y+1)``.  Physical slot
    ``s`` of cell ``(x,y)`` is qubit ``p*(y*Tx + x) + s``.
    """
    if Tx < 1 or Ty < 1:
        raise ProtocolError("torus dimensions must be positive")
    n = t.p * Tx * Ty
    if n > cap:
        raise CapExceededError(f"torus of {Tx}x{Ty} cells has {n} qubits; cap is {cap}",
                               required=n, cap=cap)
    cells = [(x, y) for y in range(Ty) for x in range(Tx)]
    phys = {}
    nxt = 0
    for cell in cells:
        for s in range(t.p):
            phys[cell, s] = nxt
            nxt += 1
    h = {cell: nxt + i for i, cell in enumerate(cells)}
    v = {cell: nxt + len(cells) + i for i, cell in enumerate(cells)}
    args = []
    for (x, y) in cells:
        legs = [phys[(x, y), s] for s in range(t.p)]
        legs += [v[x, y], h[x, y], v[x, (y - 1) % Ty], h[(x - 1) % Tx, y]]
        args += [t.data, legs]
    out_legs = [phys[cells[q // t.p], q % t.p] for q in reversed(range(n))]
    psi = np.einsum(*args, out_legs, optimize=True).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ProtocolError("torus contraction vanishes")
    return sv.PureState(n, psi / norm)


TORIC_CONVENTIONS = ("bond-vertex", "face-vertex")


def _cell_qubit(Tx, Ty, x, y, slot):
    return 4 * ((y % Ty) * Tx + (x % Tx)) + slot


def toric_operators(Tx: int, Ty: int) -> dict:
    """Qubit supports of the star (per bond) and face operators of the torus.

    Stars sit on horizontal bonds ``b(x,y)`` and vertical bonds ``a(x,y)``;
    faces are the four qubits of each cell and the four around each cell
    corner.
    """
    q = lambda x, y, s: _cell_qubit(Tx, Ty, x, y, s)  # noqa: E731
    stars, faces = [], []
    for y in range(Ty):
        for x in range(Tx):
            stars.append((f"star-h({x},{y})", [q(x, y, 0), q(x, y, 3), q(x + 1, y, 1), q(x + 1, y, 2)]))
            stars.append((f"star-v({x},{y})", [q(x, y, 0), q(x, y, 1), q(x, y + 1, 2), q(x, y + 1, 3)]))
            faces.append((f"face-cell({x},{y})", [q(x, y, s) for s in range(4)]))
            faces.append((f"face-corner({x},{y})", [q(x, y, 0), q(x + 1, y, 1),
                                                     q(x + 1, y + 1, 2), q(x, y + 1, 3)]))
    return {"stars": stars, "faces": faces}


def _toric_paulis(Tx, Ty, convention):
    if convention not in TORIC_CONVENTIONS:
        raise ProtocolError(f"convention must be one of {TORIC_CONVENTIONS}")
    n = 4 * Tx * Ty
    ops = toric_operators(Tx, Ty)
    star_x = convention == "bond-vertex"
    out = []
    for name, qs in ops["stars"]:
        out.append((name, "vertex" if star_x else "plaquette",
                    PauliString.from_ops(n, xs=qs if star_x else (), zs=() if star_x else qs)))
    for name, qs in ops["faces"]:
        out.append((name, "plaquette" if star_x else "vertex",
                    PauliString.from_ops(n, xs=() if star_x else qs, zs=qs if star_x else ())))
    return out


@dataclass
class ToricReport:
    convention: str
    expectations: list
    tol: float

    @property
    def passed(self) -> bool:
        return all(abs(e["expectation"] - 1.0) <= self.tol for e in self.expectations)

    def to_dict(self) -> dict:
        return {"convention": self.convention, "pass": self.passed, "tol": self.tol,
                "operators": self.expectations}


def verify_toric_stabilizers(state: sv.PureState, Tx: int, Ty: int,
                             convention: str = "bond-vertex", tol: float = 1e-8) -> ToricReport:
    """Expectation of each vertex (X-type) and plaquette (Z-type) operator.

    ``convention`` chooses which operator family sits on the bonds:
    ``bond-vertex`` puts the X-type vertex operators on the bonds,
    ``face-vertex`` puts them on the faces.
    """
    if state.n != 4 * Tx * Ty:
        raise ProtocolError(f"state has {state.n} qubits, torus needs {4 * Tx * Ty}")
    rows = []
    for name, kind, pauli in _toric_paulis(Tx, Ty, convention):
        rows.append({"operator": name, "type": kind, "pauli": str(pauli),
                     "expectation": sv.expectation(state, pauli)})
    return ToricReport(convention, rows, tol)


def toric_ground_state(Tx: int, Ty: int, convention: str = "bond-vertex") -> sv.PureState:
    """Independent oracle: project ``|0...0>`` with ``prod (1 + A)/2`` over the X-type operators."""
    n = 4 * Tx * Ty
    state = sv.PureState.zeros(n)
    idx = np.arange(2 ** n)
    for _, kind, pauli in _toric_paulis(Tx, Ty, convention):
        if kind != "vertex":
            continue
        xmask = sum(b << q for q, b in enumerate(pauli.x))
        amp = (state.amplitudes + state.amplitudes[idx ^ xmask]) / 2
        state = sv.PureState(n, amp / np.linalg.norm(amp))
    return state


# -- local-unitary comparison ---------------------------------------------------------------


def _su2(params):
    a, b, c, phase = params
    # exp(-i (a X + b Y + c Z)) * e^{i phase}
    theta = np.sqrt(a * a + b * b + c * c)
    if theta < 1e-15:
        m = np.eye(2, dtype=complex)
    else:
        nx, ny, nz = a / theta, b / theta, c / theta
        m = np.cos(theta) * np.eye(2) - 1j * np.sin(theta) * np.array(
            [[nz, nx - 1j * ny], [nx + 1j * ny, -nz]])
    return np.exp(1j * phase) * m


def _apply_leg_unitaries(data, mats):
    out = data
    for ax, m in enumerate(mats):
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [ax])), 0, ax)
    return out


@dataclass
class LocalUnitaryFit:
    distance: float
    initial_distance: float
    unitaries: list
    restarts: int

    def to_dict(self) -> dict:
        return {"distance": self.distance, "initial_distance": self.initial_distance,
                "restarts": self.restarts}


def local_unitary_distance(t: StepTensor, target: StepTensor, *, restarts: int = 4,
                           seed: int = 0) -> LocalUnitaryFit:
    """Minimum Frobenius distance over one unitary per leg, applied to ``t``.

    The first start is the identity; further starts are seeded random.
    """
    from scipy.optimize import minimize

    if t.data.shape != target.data.shape:
        raise ProtocolError("tensor shapes differ")
    legs = t.data.ndim
    rng = np.random.default_rng(seed)

    def rotate(x):
        mats = [_su2(x[4 * j:4 * j + 4]) for j in range(legs)]
        return _apply_leg_unitaries(t.data, mats), mats

    def cost(x):
        rotated, _ = rotate(x)
        return float(np.sum(np.abs(rotated - target.data) ** 2))

    initial = float(np.sqrt(cost(np.zeros(4 * legs))))
    best = None
    for r in range(restarts):
        x0 = np.zeros(4 * legs) if r == 0 else rng.normal(scale=1.0, size=4 * legs)
        res = minimize(cost, x0, method="BFGS", options={"gtol": 1e-12, "maxiter": 2000})
        if best is None or res.fun < best.fun:
            best = res
        if best.fun < 1e-20:
            break
    _, mats = rotate(best.x)
    return LocalUnitaryFit(float(np.sqrt(max(best.fun, 0.0))), initial, mats, r + 1)


# -- binary tensor files ------------------------------------------------------------------------


def write_tensor_binary(t: StepTensor, fh, extra: dict | None = None) -> None:
    header = t.header()
    if extra:
        header.update(extra)
    fh.write(_TENSOR_MAGIC)
    fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
    flat = np.empty(2 * t.data.size, dtype="<f8")
    flat[0::2] = t.data.real.ravel()
    flat[1::2] = t.data.imag.ravel()
    fh.write(flat.tobytes())


def read_tensor_binary(fh):
    if fh.readline() != _TENSOR_MAGIC:
        raise ProtocolError("not a tensor file")
    header = json.loads(fh.readline())
    flat = np.frombuffer(fh.read(), dtype="<f8")
    p, dv, dq = header["p"], header["D_v"], header["d_Q"]
    shape = (2,) * p + (dv, dq, dv, dq)
    if flat.size != 2 * int(np.prod(shape)):
        raise ProtocolError("tensor payload has the wrong size")
    data = (flat[0::2] + 1j * flat[1::2]).reshape(shape)
    return StepTensor(p, dv, dq, data, tuple(header.get("physical_legs", ()))), header
