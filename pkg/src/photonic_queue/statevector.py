"""Dense pure-state and density-matrix simulation.

Qubit 0 is the least significant bit of the amplitude index ("little"
ordering).  Two-qubit matrices act on ``|q0 q1>`` with ``q0`` the more
significant bit of the 4x4 basis index.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import CapExceededError, ProtocolError
from .protocol import GATE_MATRICES, GateOp

NORM_TOL = 1e-12
DEFAULT_MAX_PURE = 22
DEFAULT_MAX_MIXED = 12


def max_pure_qubits() -> int:
    return int(os.environ.get("PHOTONIC_QUEUE_MAX_PURE_QUBITS", DEFAULT_MAX_PURE))


def max_mixed_qubits() -> int:
    return int(os.environ.get("PHOTONIC_QUEUE_MAX_MIXED_QUBITS", DEFAULT_MAX_MIXED))


def _check_cap(n, cap, what, step=None):
    if n > cap:
        where = f" at step {step}" if step is not None else ""
        raise CapExceededError(f"{what} needs {n} qubits{where}; cap is {cap}",
                               required=n, cap=cap, step=step)


@dataclass
class PureState:
    n: int
    amplitudes: np.ndarray

    @classmethod
    def zeros(cls, n: int, cap: int | None = None) -> "PureState":
        _check_cap(n, max_pure_qubits() if cap is None else cap, "statevector")
        amp = np.zeros(2 ** n, dtype=complex)
        amp[0] = 1.0
        return cls(n, amp)

    @classmethod
    def from_vector(cls, vec) -> "PureState":
        vec = np.asarray(vec, dtype=complex).ravel()
        n = int(round(math.log2(vec.size)))
        if 2 ** n != vec.size:
            raise ProtocolError(f"vector length {vec.size} is not a power of two")
        norm = np.linalg.norm(vec)
        if abs(norm - 1.0) > NORM_TOL:
            raise ProtocolError(f"state norm {norm!r} differs from 1")
        return cls(n, vec.copy())

    def copy(self) -> "PureState":
        return PureState(self.n, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def density(self) -> "MixedState":
        return MixedState(self.n, np.outer(self.amplitudes, self.amplitudes.conj()))

    def to_dict(self) -> dict:
        flat = np.empty(2 * self.amplitudes.size)
        flat[0::2] = self.amplitudes.real
        flat[1::2] = self.amplitudes.imag
        return {"n": self.n, "ordering": "little", "amplitudes": flat.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "PureState":
        if obj.get("ordering", "little") != "little":
            raise ProtocolError("only little-endian state files are supported")
        flat = np.asarray(obj["amplitudes"], dtype=float)
        state = cls.from_vector(flat[0::2] + 1j * flat[1::2])
        if state.n != obj["n"]:
            raise ProtocolError("n does not match the amplitude count")
        return state


@dataclass
class MixedState:
    n: int
    rho: np.ndarray

    @classmethod
    def zeros(cls, n: int, cap: int | None = None) -> "MixedState":
        _check_cap(n, max_mixed_qubits() if cap is None else cap, "density matrix")
        rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
        rho[0, 0] = 1.0
        return cls(n, rho)

    def copy(self) -> "MixedState":
        return MixedState(self.n, self.rho.copy())

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def check(self, tol=NORM_TOL) -> dict:
        herm = float(np.max(np.abs(self.rho - self.rho.conj().T)))
        tr = abs(self.trace() - 1.0)
        min_eig = float(np.min(np.linalg.eigvalsh((self.rho + self.rho.conj().T) / 2)))
        return {"hermiticity": herm, "trace_error": tr, "min_eigenvalue": min_eig,
                "valid": herm <= tol and tr <= tol and min_eig >= -1e-10}


# -- kernels ------------------------------------------------------------------


def _apply_matrix(tensor: np.ndarray, n_axes: int, matrix: np.ndarray, axes: list) -> np.ndarray:
    """Contract ``matrix`` (2^k x 2^k) into the given tensor axes."""
    k = len(axes)
    op = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _axis(n: int, q: int) -> int:
    return n - 1 - q


def _resolve(gate: GateOp, n: int):
    qubits = list(gate.targets)
    for q in qubits:
        if not isinstance(q, int):
            raise ProtocolError(f"gate {gate} has unresolved targets")
        if not 0 <= q < n:
            raise ProtocolError(f"qubit {q} outside 0..{n - 1}")
    return qubits


def apply_matrix(state: PureState, matrix, qubits) -> PureState:
    matrix = np.asarray(matrix, dtype=complex)
    psi = state.amplitudes.reshape((2,) * state.n)
    psi = _apply_matrix(psi, state.n, matrix, [_axis(state.n, q) for q in qubits])
    return PureState(state.n, np.ascontiguousarray(psi).reshape(-1))


def apply_unitary(state: PureState, gate: GateOp) -> PureState:
    """Apply a unitary gate whose targets are engine qubit indices."""
    qubits = _resolve(gate, state.n)
    return apply_matrix(state, gate.unitary(), qubits)


def measure_x(state: PureState, qubit: int, rng: np.random.Generator):
    """Projective X measurement; returns ``(state, outcome in {+1,-1})``."""
    h = GATE_MATRICES["H"]
    rotated = apply_matrix(state, h, [qubit])
    psi = rotated.amplitudes.reshape((2,) * state.n)
    ax = _axis(state.n, qubit)
    p0 = float(np.sum(np.abs(np.take(psi, 0, axis=ax)) ** 2))
    bit = 0 if rng.random() < p0 else 1
    prob = p0 if bit == 0 else 1.0 - p0
    keep = np.zeros(2)
    keep[bit] = 1.0
    psi = psi * keep.reshape([2 if i == ax else 1 for i in range(state.n)]) / math.sqrt(prob)
    out = apply_matrix(PureState(state.n, psi.reshape(-1)), h, [qubit])
    return out, 1 - 2 * bit


def expectation(state: PureState, pauli) -> float:
    """``<psi|P|psi>`` for a :class:`PauliString` (Y = iXZ convention)."""
    n = state.n
    if pauli.n != n:
        raise ProtocolError(f"Pauli on {pauli.n} qubits, state has {n}")
    xmask = sum(b << q for q, b in enumerate(pauli.x))
    zmask = sum(b << q for q, b in enumerate(pauli.z))
    ys = sum(a & b for a, b in zip(pauli.x, pauli.z))
    idx = np.arange(2 ** n, dtype=np.int64)
    parity = np.bitwise_count(idx & zmask).astype(np.int64) & 1
    psi = state.amplitudes
    # P|b> = i^ys (-1)^{b.z} |b ^ x>
    val = np.sum(np.conj(psi[idx ^ xmask]) * psi * (1 - 2 * parity))
    val *= 1j ** ys
    return float(val.real) * pauli.sign


def fidelity_pure(a: PureState, b: PureState) -> float:
    """|<a|b>|."""
    if a.n != b.n:
        raise ProtocolError("dimension mismatch")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)))


def align_global_phase(vec: np.ndarray, ref: np.ndarray) -> np.ndarray:
    overlap = np.vdot(vec, ref)
    if abs(overlap) == 0:
        return vec
    return vec * (overlap / abs(overlap))


# -- density matrices -----------------------------------------------------------


def _apply_index(m: np.ndarray, n: int, matrix: np.ndarray, qubits: list, side: str) -> np.ndarray:
    """``U m`` (``side="rows"``) or ``m U^T`` (``side="cols"``) by slice arithmetic.

    Cheaper than a tensordot on large density matrices: zero entries of
    ``U`` (most of them for Clifford gates) are skipped.
    """
    k = len(qubits)
    order = sorted(range(k), key=lambda j: -qubits[j])  # big-endian axis order
    shape, prev = [], n
    for j in order:
        q = qubits[j]
        shape += [2 ** (prev - 1 - q), 2]
        prev = q
    shape.append(2 ** prev)
    offset = 0
    if side == "rows":
        shape = shape + [m.shape[1]]
    else:
        shape = [m.shape[0]] + shape
        offset = 1
    src = m.reshape(shape)
    out = np.empty_like(src)

    def index(bits):
        idx = [slice(None)] * len(shape)
        for pos, j in enumerate(order):
            idx[offset + 2 * pos + 1] = (bits >> (k - 1 - j)) & 1
        return tuple(idx)

    for r in range(2 ** k):
        dst = out[index(r)]
        first = True
        for c in range(2 ** k):
            u = matrix[r, c]
            if u == 0:
                continue
            if first:
                np.multiply(src[index(c)], u, out=dst)
                first = False
            else:
                dst += u * src[index(c)]
        if first:
            dst[...] = 0
    return out.reshape(m.shape)


def apply_matrix_mixed(state: MixedState, matrix, qubits) -> MixedState:
    n = state.n
    matrix = np.asarray(matrix, dtype=complex)
    left = _apply_index(state.rho, n, matrix, list(qubits), "rows")
    return MixedState(n, _apply_index(left, n, matrix.conj(), list(qubits), "cols"))


def apply_unitary_mixed(state: MixedState, gate: GateOp) -> MixedState:
    return apply_matrix_mixed(state, gate.unitary(), _resolve(gate, state.n))


def apply_kraus(state: MixedState, kraus, qubits) -> MixedState:
    out = None
    for k in kraus:
        term = apply_matrix_mixed(state, k, qubits).rho
        out = term if out is None else out + term
    return MixedState(state.n, out)


def amplitude_damping_kraus(p_survive: float):
    if not 0.0 <= p_survive <= 1.0:
        raise ProtocolError(f"survival probability must lie in [0, 1], got {p_survive}")
    k0 = np.array([[1.0, 0.0], [0.0, math.sqrt(p_survive)]], dtype=complex)
    k1 = np.array([[0.0, math.sqrt(1.0 - p_survive)], [0.0, 0.0]], dtype=complex)
    return k0, k1


def apply_amplitude_damping(state: MixedState, qubit: int, p_survive: float) -> MixedState:
    """Photon loss on a number-encoded qubit: ``|1> -> |0>`` with probability ``1 - p``."""
    if not 0 <= qubit < state.n:
        raise ProtocolError(f"qubit {qubit} outside 0..{state.n - 1}")
    amplitude_damping_kraus(p_survive)  # validates p
    n = state.n
    # rows (a, q, b) and columns (c, q', e) in big-endian blocks around the qubit
    hi, lo = 2 ** (n - 1 - qubit), 2 ** qubit
    t = state.rho.reshape(hi, 2, lo, hi, 2, lo).copy()
    s = math.sqrt(p_survive)
    t[:, 0, :, :, 0, :] += (1.0 - p_survive) * t[:, 1, :, :, 1, :]
    t[:, 1, :, :, 1, :] *= p_survive
    t[:, 0, :, :, 1, :] *= s
    t[:, 1, :, :, 0, :] *= s
    return MixedState(n, t.reshape(2 ** n, 2 ** n))


def measure_x_mixed(state: MixedState, qubit: int, rng: np.random.Generator):
    n = state.n
    h = GATE_MATRICES["H"]
    rot = apply_matrix_mixed(state, h, [qubit])
    proj = np.zeros((2, 2), dtype=complex)
    p0 = float(np.real(apply_matrix_mixed(rot, np.diag([1.0, 0.0]), [qubit]).trace()))
    bit = 0 if rng.random() < p0 else 1
    proj[bit, bit] = 1.0
    prob = p0 if bit == 0 else 1.0 - p0
    out = apply_matrix_mixed(rot, proj, [qubit])
    out = MixedState(n, out.rho / prob)
    return apply_matrix_mixed(out, h, [qubit]), 1 - 2 * bit


def fidelity_to_pure(mixed: MixedState, target: PureState) -> float:
    """``sqrt(<psi|rho|psi>)``."""
    if mixed.n != target.n:
        raise ProtocolError(f"density matrix on {mixed.n} qubits, target on {target.n}")
    psi = target.amplitudes
    val = float(np.real(np.vdot(psi, mixed.rho @ psi)))
    return math.sqrt(min(1.0, max(0.0, val)))


# -- binary export -------------------------------------------------------------------

_MAGIC = b"PQDM1\n"


def write_density_binary(state: MixedState, fh, extra: dict | None = None) -> None:
    import json

    header = {"n": state.n, "layout": "row-major", "dtype": "complex128-le"}
    if extra:
        header.update(extra)
    fh.write(_MAGIC)
    fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
    fh.write(np.ascontiguousarray(state.rho, dtype="<c16").tobytes())


def read_density_binary(fh) -> tuple:
    import json

    if fh.readline() != _MAGIC:
        raise ProtocolError("not a density-matrix file")
    header = json.loads(fh.readline())
    n = header["n"]
    data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != 4 ** n:
        raise ProtocolError("density-matrix payload has the wrong size")
    return MixedState(n, data.reshape(2 ** n, 2 ** n).astype(complex)), header
