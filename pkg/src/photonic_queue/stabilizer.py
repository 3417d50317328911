"""Bit-packed stabilizer tableau (Aaronson-Gottesman) and group membership.

Rows are packed into 64-bit words along the qubit axis.  A row ``(x, z, r)``
stands for ``(-1)^r * P_0 P_1 ... P_{n-1}`` with ``P_j`` one of ``I, X, Z, Y``
for bits ``(x_j, z_j) = (0,0), (1,0), (0,1), (1,1)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import NonCliffordGateError, ProtocolError

_ONE = np.uint64(1)
_PAULI_CHARS = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_CHAR_BITS = {v: k for k, v in _PAULI_CHARS.items()}


def _words(n: int) -> int:
    return max(1, (n + 63) // 64)


def _pack(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.shape[-1]
    padded = np.zeros(bits.shape[:-1] + (_words(n) * 64,), dtype=np.uint8)
    padded[..., :n] = bits
    packed = np.packbits(padded, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64)


def _unpack(words: np.ndarray, n: int) -> np.ndarray:
    as_bytes = np.ascontiguousarray(words.astype("<u8")).view(np.uint8)
    return np.unpackbits(as_bytes, axis=-1, bitorder="little")[..., :n]


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).sum(axis=-1, dtype=np.int64)


def _product_phase(x1, z1, x2, z2) -> np.ndarray:
    """Exponent of ``i`` picked up when multiplying Paulis (x1, z1) * (x2, z2).

    Broadcasts over leading axes; returns the sum over qubits of the
    per-qubit exponent in {-1, 0, 1}.
    """
    nx2, nz2 = ~x2, ~z2
    plus = (x1 & z1 & z2 & nx2) | (x1 & ~z1 & z2 & x2) | (~x1 & z1 & x2 & nz2)
    minus = (x1 & z1 & x2 & nz2) | (x1 & ~z1 & z2 & nx2) | (~x1 & z1 & x2 & z2)
    return _popcount(plus) - _popcount(minus)


@dataclass(frozen=True)
class PauliString:
    """Hermitian Pauli operator ``sign * P_0 ... P_{n-1}``."""

    n: int
    x: tuple
    z: tuple
    sign: int = 1

    def __post_init__(self):
        if len(self.x) != self.n or len(self.z) != self.n:
            raise ProtocolError("Pauli masks must have length n")
        if self.sign not in (1, -1):
            raise ProtocolError("Pauli sign must be +1 or -1")
        object.__setattr__(self, "x", tuple(int(b) & 1 for b in self.x))
        object.__setattr__(self, "z", tuple(int(b) & 1 for b in self.z))

    @classmethod
    def from_str(cls, s: str) -> "PauliString":
        sign = 1
        if s and s[0] in "+-":
            sign = -1 if s[0] == "-" else 1
            s = s[1:]
        try:
            bits = [_CHAR_BITS[c] for c in s.upper()]
        except KeyError as exc:
            raise ProtocolError(f"bad Pauli character {exc}") from None
        return cls(len(bits), tuple(b[0] for b in bits), tuple(b[1] for b in bits), sign)

    @classmethod
    def from_ops(cls, n: int, xs=(), zs=(), sign: int = 1) -> "PauliString":
        """Operator ``sign * prod X_q (q in xs) * prod Z_q (q in zs)`` written Hermitian.

        A qubit in both lists becomes ``X Z = -i Y``; the factors of ``-i`` must
        combine to a real sign, which is folded into ``sign``.
        """
        x = np.zeros(n, dtype=np.uint8)
        z = np.zeros(n, dtype=np.uint8)
        for q in xs:
            x[q] ^= 1
        for q in zs:
            z[q] ^= 1
        ys = int(np.sum(x & z))
        if ys % 2:
            raise ProtocolError("odd number of XZ overlaps gives a non-Hermitian operator")
        sign *= (-1) ** (ys // 2)
        return cls(n, tuple(x), tuple(z), sign)

    def __str__(self):
        return ("+" if self.sign > 0 else "-") + "".join(_PAULI_CHARS[b] for b in zip(self.x, self.z))


class StabilizerTableau:
    """Stabilizer state on ``n`` qubits with destabilizer rows.

    Rows ``0..n-1`` are destabilizers and rows ``n..2n-1`` stabilizers.  A
    tableau loaded from generator strings has no destabilizers and cannot be
    measured.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ProtocolError(f"need at least one qubit, got {n}")
        self.n = n
        w = _words(n)
        self.x = np.zeros((2 * n, w), dtype=np.uint64)
        self.z = np.zeros((2 * n, w), dtype=np.uint64)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        eye = _pack(np.eye(n, dtype=np.uint8))
        self.x[:n] = eye
        self.z[n:] = eye
        self.has_destabilizers = True

    def copy(self) -> "StabilizerTableau":
        out = StabilizerTableau.__new__(StabilizerTableau)
        out.n = self.n
        out.x, out.z, out.r = self.x.copy(), self.z.copy(), self.r.copy()
        out.has_destabilizers = self.has_destabilizers
        return out

    # -- column helpers -----------------------------------------------------------

    def _rows(self):
        return slice(None) if self.has_destabilizers else slice(self.n, 2 * self.n)

    def _col(self, arr, q):
        w, s = divmod(q, 64)
        return ((arr[self._rows(), w] >> np.uint64(s)) & _ONE).astype(bool)

    def _flip(self, arr, q, cond):
        w, s = divmod(q, 64)
        view = arr[self._rows(), w]
        view ^= np.where(cond, _ONE << np.uint64(s), np.uint64(0))
        arr[self._rows(), w] = view

    def _check(self, *qs):
        for q in qs:
            if not 0 <= q < self.n:
                raise ProtocolError(f"qubit {q} outside 0..{self.n - 1}")

    # -- gates ----------------------------------------------------------------------

    def h(self, q):
        self._check(q)
        xq, zq = self._col(self.x, q), self._col(self.z, q)
        self.r[self._rows()] ^= (xq & zq).astype(np.uint8)
        diff = xq ^ zq
        self._flip(self.x, q, diff)
        self._flip(self.z, q, diff)

    def s(self, q):
        self._check(q)
        xq, zq = self._col(self.x, q), self._col(self.z, q)
        self.r[self._rows()] ^= (xq & zq).astype(np.uint8)
        self._flip(self.z, q, xq)

    def x_gate(self, q):
        self._check(q)
        self.r[self._rows()] ^= self._col(self.z, q).astype(np.uint8)

    def z_gate(self, q):
        self._check(q)
        self.r[self._rows()] ^= self._col(self.x, q).astype(np.uint8)

    def cx(self, a, b):
        self._check(a, b)
        xa, za = self._col(self.x, a), self._col(self.z, a)
        xb, zb = self._col(self.x, b), self._col(self.z, b)
        self.r[self._rows()] ^= (xa & zb & ~(xb ^ za)).astype(np.uint8)
        self._flip(self.x, b, xa)
        self._flip(self.z, a, zb)

    def cz(self, a, b):
        self._check(a, b)
        xa, za = self._col(self.x, a), self._col(self.z, a)
        xb, zb = self._col(self.x, b), self._col(self.z, b)
        self.r[self._rows()] ^= (xa & xb & (za ^ zb)).astype(np.uint8)
        self._flip(self.z, a, xb)
        self._flip(self.z, b, xa)

    def apply(self, kind: str, *qubits):
        ops = {"H": self.h, "S": self.s, "X": self.x_gate, "Z": self.z_gate,
               "CX": self.cx, "CZ": self.cz}
        if kind not in ops:
            raise NonCliffordGateError(kind)
        ops[kind](*qubits)
        return self

    # -- row products -----------------------------------------------------------------

    def _rowsum(self, targets: np.ndarray, src: int):
        """Replace each row in ``targets`` by (row * row[src])."""
        if len(targets) == 0:
            return
        x1, z1 = self.x[targets], self.z[targets]
        x2, z2 = self.x[src], self.z[src]
        g = _product_phase(x2[None, :], z2[None, :], x1, z1)
        total = (2 * self.r[targets].astype(np.int64) + 2 * int(self.r[src]) + g) % 4
        self.r[targets] = (total // 2).astype(np.uint8)
        self.x[targets] = x1 ^ x2
        self.z[targets] = z1 ^ z2

    # -- measurement ---------------------------------------------------------------------

    def measure_z(self, q: int, rng: np.random.Generator | None = None):
        """Measure ``Z_q``; returns ``(outcome in {+1,-1}, was_deterministic)``."""
        self._check(q)
        if not self.has_destabilizers:
            raise ProtocolError("tableau has no destabilizer rows; cannot measure")
        n = self.n
        w, s = divmod(q, 64)
        bit = _ONE << np.uint64(s)
        xq = (self.x[:, w] & bit) != 0
        stab_hits = np.flatnonzero(xq[n:])
        if stab_hits.size:
            p = n + int(stab_hits[0])
            others = np.flatnonzero(xq)
            self._rowsum(others[others != p], p)
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            self.x[p] = 0
            self.z[p] = 0
            self.z[p, w] = bit
            if rng is None:
                raise ProtocolError("random measurement needs a random generator")
            outcome_bit = int(rng.integers(2))
            self.r[p] = outcome_bit
            return (1 - 2 * outcome_bit, False)
        acc_x = np.zeros_like(self.x[0])
        acc_z = np.zeros_like(self.z[0])
        exponent = 0
        for i in np.flatnonzero(xq[:n]):
            row = n + int(i)
            g = int(_product_phase(self.x[row], self.z[row], acc_x, acc_z))
            exponent = (exponent + 2 * int(self.r[row]) + g) % 4
            acc_x ^= self.x[row]
            acc_z ^= self.z[row]
        return (1 - exponent, True)

    def measure_x(self, q: int, rng: np.random.Generator | None = None):
        """Measure ``X_q``; returns ``(outcome, was_deterministic)``."""
        self.h(q)
        try:
            return self.measure_z(q, rng)
        finally:
            self.h(q)

    # -- inspection ----------------------------------------------------------------------

    def generator_bits(self):
        """Stabilizer rows as unpacked ``(x, z, signs)`` arrays."""
        n = self.n
        x = _unpack(self.x[n:], n)
        z = _unpack(self.z[n:], n)
        signs = 1 - 2 * self.r[n:].astype(int)
        return x, z, signs

    def generators(self) -> list:
        x, z, signs = self.generator_bits()
        return [PauliString(self.n, tuple(x[i]), tuple(z[i]), int(signs[i])) for i in range(self.n)]

    def check_invariants(self) -> dict:
        """Rank of the stabilizer matrix and whether all generators commute."""
        x, z, _ = self.generator_bits()
        sym = (x.astype(np.int64) @ z.T.astype(np.int64) + z.astype(np.int64) @ x.T.astype(np.int64)) % 2
        m = np.concatenate([x, z], axis=1).astype(np.uint8)
        return {"rank": gf2_rank(m), "commuting": not sym.any()}

    def to_dict(self) -> dict:
        return {"n": self.n, "generators": [str(g) for g in self.generators()]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_generators(cls, generators) -> "StabilizerTableau":
        paulis = [g if isinstance(g, PauliString) else PauliString.from_str(g) for g in generators]
        if not paulis:
            raise ProtocolError("no generators")
        n = paulis[0].n
        if len(paulis) != n or any(p.n != n for p in paulis):
            raise ProtocolError(f"need {n} generators on {n} qubits")
        t = cls.__new__(cls)
        t.n = n
        w = _words(n)
        t.x = np.zeros((2 * n, w), dtype=np.uint64)
        t.z = np.zeros((2 * n, w), dtype=np.uint64)
        t.r = np.zeros(2 * n, dtype=np.uint8)
        t.x[n:] = _pack(np.array([p.x for p in paulis]))
        t.z[n:] = _pack(np.array([p.z for p in paulis]))
        t.r[n:] = [0 if p.sign > 0 else 1 for p in paulis]
        t.has_destabilizers = False
        inv = t.check_invariants()
        if inv["rank"] != n or not inv["commuting"]:
            raise ProtocolError("generators must commute and be independent")
        return t

    @classmethod
    def from_dict(cls, obj: dict) -> "StabilizerTableau":
        t = cls.from_generators(obj["generators"])
        if t.n != obj.get("n", t.n):
            raise ProtocolError("n does not match the generator length")
        return t

    def __str__(self):
        return "\n".join(str(g) for g in self.generators())


def gf2_rank(m: np.ndarray) -> int:
    m = (np.asarray(m, dtype=np.uint8) & 1).copy()
    rank = 0
    rows, cols = m.shape
    for c in range(cols):
        hits = np.flatnonzero(m[rank:, c])
        if hits.size == 0:
            continue
        piv = rank + hits[0]
        m[[rank, piv]] = m[[piv, rank]]
        below = np.flatnonzero(m[:, c])
        below = below[below != rank]
        m[below] ^= m[rank]
        rank += 1
        if rank == rows:
            break
    return rank


class GroupSolver:
    """Row-reduced copy of a tableau's stabilizers for repeated membership queries."""

    def __init__(self, tableau: StabilizerTableau):
        n = tableau.n
        self.tableau = tableau
        self.n = n
        w = tableau.x.shape[1]
        gens = np.concatenate([tableau.x[n:], tableau.z[n:]], axis=1)
        comb = _pack(np.eye(n, dtype=np.uint8))
        pivots = []
        row = 0
        self._w = w
        for c in range(2 * n):
            word, shift = self._column_word(c)
            bit = _ONE << np.uint64(shift)
            hits = np.flatnonzero(gens[row:, word] & bit) + row
            if hits.size == 0:
                continue
            piv = int(hits[0])
            if piv != row:
                gens[[row, piv]] = gens[[piv, row]]
                comb[[row, piv]] = comb[[piv, row]]
            others = np.flatnonzero(gens[:, word] & bit)
            others = others[others != row]
            gens[others] ^= gens[row]
            comb[others] ^= comb[row]
            pivots.append((row, word, bit))
            row += 1
            if row == n:
                break
        self._reduced = gens
        self._comb = comb
        self._pivots = pivots

    def _column_word(self, c):
        if c < self.n:
            return divmod(c, 64)
        return self._w + (c - self.n) // 64, (c - self.n) % 64

    def decompose(self, pauli: PauliString):
        """Indices of generators whose product equals ``pauli`` up to sign, or None."""
        vec = np.concatenate([_pack(np.array(pauli.x)), _pack(np.array(pauli.z))])
        used = np.zeros_like(self._comb[0])
        for row, word, bit in self._pivots:
            if vec[word] & bit:
                vec ^= self._reduced[row]
                used ^= self._comb[row]
        if vec.any():
            return None
        return np.flatnonzero(_unpack(used[None, :], self.n)[0])

    def contains(self, pauli: PauliString) -> int:
        """+1 if ``pauli`` is in the group, -1 if ``-pauli`` is, 0 otherwise."""
        if pauli.n != self.n:
            raise ProtocolError(f"Pauli on {pauli.n} qubits, tableau has {self.n}")
        idx = self.decompose(pauli)
        if idx is None:
            return 0
        t = self.tableau
        acc_x = np.zeros_like(t.x[0])
        acc_z = np.zeros_like(t.z[0])
        exponent = 0
        for i in idx:
            row = self.n + int(i)
            g = int(_product_phase(acc_x, acc_z, t.x[row], t.z[row]))
            exponent = (exponent + 2 * int(t.r[row]) + g) % 4
            acc_x ^= t.x[row]
            acc_z ^= t.z[row]
        if exponent % 2:
            raise AssertionError("product of commuting Hermitian generators picked up a factor i")
        group_sign = 1 - exponent
        return group_sign * pauli.sign


def contains(tableau: StabilizerTableau, pauli: PauliString) -> int:
    """Membership of ``pauli`` in the stabilizer group: +1, -1 (for ``-pauli``) or 0."""
    return GroupSolver(tableau).contains(pauli)


@dataclass
class StabilizerCheck:
    vertex: object
    operator: str
    result: int  # +1 present, -1 present with flipped sign, 0 absent

    @property
    def passed(self) -> bool:
        return self.result == 1


@dataclass
class VerificationReport:
    checks: list

    @property
    def verdict(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failing(self) -> list:
        return [c.vertex for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"verdict": self.verdict,
                "failing_vertices": self.failing,
                "stabilizers": [{"vertex": c.vertex, "operator": c.operator,
                                 "present": c.result != 0,
                                 "sign": c.result if c.result else None} for c in self.checks]}


def graph_stabilizer(geometry, v, n: int) -> PauliString:
    """``X_v * prod_{w in N(v)} Z_w`` on ``n`` engine qubits."""
    return PauliString.from_ops(n, xs=[geometry.qubit_of(v)],
                                zs=[geometry.qubit_of(w) for w in geometry.neighbors(v)])


def verify_graph_state(tableau: StabilizerTableau, geometry) -> VerificationReport:
    """Query every graph stabilizer of ``geometry`` in the tableau's group.

    Qubits not covered by the geometry (for example a disentangled emitter)
    see identity in every query.
    """
    needed = max(geometry.qubit_of(v) for v in geometry.vertices) + 1 if geometry.vertices else 0
    if tableau.n < needed:
        raise ProtocolError(f"geometry needs {needed} qubits, tableau has {tableau.n}")
    solver = GroupSolver(tableau)
    checks = []
    for v in geometry.vertices:
        op = graph_stabilizer(geometry, v, tableau.n)
        checks.append(StabilizerCheck(v, str(op), solver.contains(op)))
    return VerificationReport(checks)
