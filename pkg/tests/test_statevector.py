import io

import numpy as np
import pytest

from photonic_queue import statevector as sv
from photonic_queue.errors import CapExceededError, ProtocolError
from photonic_queue.protocol import gate
from photonic_queue.stabilizer import PauliString

from scipy.stats import unitary_group


def test_hadamard_on_zero():
    s = sv.apply_unitary(sv.PureState.zeros(1), gate("H", 0))
    np.testing.assert_allclose(s.amplitudes, [2 ** -0.5, 2 ** -0.5], atol=1e-15)


def test_cz_on_one_one():
    s = sv.PureState(2, np.array([0, 0, 0, 1], dtype=complex))
    np.testing.assert_allclose(sv.apply_unitary(s, gate("CZ", 0, 1)).amplitudes, [0, 0, 0, -1])


def test_cx_control_target_order():
    # qubit 0 is the least significant bit: |q1 q0> = |01> is index 1
    s = sv.PureState(2, np.array([0, 1, 0, 0], dtype=complex))
    np.testing.assert_allclose(sv.apply_unitary(s, gate("CX", 0, 1)).amplitudes, [0, 0, 0, 1])
    np.testing.assert_allclose(sv.apply_unitary(s, gate("CX", 1, 0)).amplitudes, [0, 1, 0, 0])


def test_bad_targets_and_norm():
    with pytest.raises(ProtocolError):
        sv.apply_unitary(sv.PureState.zeros(2), gate("H", 2))
    with pytest.raises(ProtocolError):
        sv.PureState.from_vector([1.0, 1.0])


def test_norm_preserved_by_random_unitaries():
    rng = np.random.default_rng(0)
    s = sv.PureState.zeros(6)
    for _ in range(50):
        a, b = (int(q) for q in rng.choice(6, size=2, replace=False))
        s = sv.apply_unitary(s, gate("Unitary2", a, b, matrix=unitary_group.rvs(4, random_state=rng)))
    assert abs(s.norm() - 1) < 1e-12


def test_disjoint_gates_commute():
    rng = np.random.default_rng(1)
    vec = rng.normal(size=32) + 1j * rng.normal(size=32)
    s = sv.PureState.from_vector(vec / np.linalg.norm(vec))
    g1 = gate("Unitary2", 0, 3, matrix=unitary_group.rvs(4, random_state=rng))
    g2 = gate("Unitary2", 4, 1, matrix=unitary_group.rvs(4, random_state=rng))
    a = sv.apply_unitary(sv.apply_unitary(s, g1), g2)
    b = sv.apply_unitary(sv.apply_unitary(s, g2), g1)
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-13)


def test_pure_and_mixed_paths_agree():
    rng = np.random.default_rng(2)
    s = sv.PureState.zeros(4)
    m = sv.MixedState.zeros(4)
    for _ in range(20):
        a, b = (int(q) for q in rng.choice(4, size=2, replace=False))
        g = gate("Unitary2", a, b, matrix=unitary_group.rvs(4, random_state=rng))
        s = sv.apply_unitary(s, g)
        m = sv.apply_unitary_mixed(m, g)
    assert abs(sv.fidelity_to_pure(m, s) ** 2 - 1) < 1e-10
    assert m.check()["valid"]


def test_amplitude_damping_examples():
    plus = sv.PureState(1, np.array([1, 1], dtype=complex) / np.sqrt(2))
    rho = plus.density()
    unchanged = sv.apply_amplitude_damping(rho, 0, 1.0)
    np.testing.assert_allclose(unchanged.rho, rho.rho, atol=1e-15)
    full = sv.apply_amplitude_damping(rho, 0, 0.0)
    np.testing.assert_allclose(full.rho, [[1, 0], [0, 0]], atol=1e-15)
    with pytest.raises(ProtocolError):
        sv.apply_amplitude_damping(rho, 0, 1.5)


def test_damped_bell_pair_against_matrix_oracle():
    p = 0.9
    bell = sv.PureState(2, np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2))
    out = sv.apply_amplitude_damping(bell.density(), 1, p)
    k0 = np.kron(np.diag([1, np.sqrt(p)]), np.eye(2))
    k1 = np.kron(np.array([[0, np.sqrt(1 - p)], [0, 0]]), np.eye(2))
    rho = bell.density().rho
    oracle = k0 @ rho @ k0.conj().T + k1 @ rho @ k1.conj().T
    np.testing.assert_allclose(out.rho, oracle, atol=1e-15)
    assert abs(sv.fidelity_to_pure(out, bell) ** 2 - (1 + np.sqrt(p)) ** 2 / 4) < 1e-12
    assert abs(out.trace() - 1) < 1e-12


def test_fidelity_to_pure_examples():
    s = sv.apply_unitary(sv.PureState.zeros(3), gate("H", 1))
    assert abs(sv.fidelity_to_pure(s.density(), s) - 1) < 1e-12
    mixed = sv.MixedState(3, np.eye(8, dtype=complex) / 8)
    assert abs(sv.fidelity_to_pure(mixed, s) - 2 ** -1.5) < 1e-12
    with pytest.raises(ProtocolError):
        sv.fidelity_to_pure(mixed, sv.PureState.zeros(2))


def test_expectation_uses_y_convention():
    s = sv.apply_unitary(sv.apply_unitary(sv.PureState.zeros(1), gate("H", 0)), gate("S", 0))
    assert abs(sv.expectation(s, PauliString.from_str("Y")) - 1) < 1e-12


def test_caps(monkeypatch):
    with pytest.raises(CapExceededError) as info:
        sv.PureState.zeros(23)
    assert info.value.required == 23 and info.value.cap == 22
    monkeypatch.setenv("PHOTONIC_QUEUE_MAX_MIXED_QUBITS", "3")
    with pytest.raises(CapExceededError):
        sv.MixedState.zeros(4)


def test_state_round_trips():
    s = sv.apply_unitary(sv.PureState.zeros(2), gate("H", 0))
    d = s.to_dict()
    assert d["ordering"] == "little"
    np.testing.assert_array_equal(sv.PureState.from_dict(d).amplitudes, s.amplitudes)
    buf = io.BytesIO()
    sv.write_density_binary(s.density(), buf, extra={"seed": 0})
    buf.seek(0)
    m, header = sv.read_density_binary(buf)
    np.testing.assert_array_equal(m.rho, s.density().rho)
    assert header["layout"] == "row-major" and header["n"] == 2


def test_measure_x_mixed_and_pure_agree():
    s = sv.apply_unitary(sv.apply_unitary(sv.PureState.zeros(2), gate("H", 0)), gate("CX", 0, 1))
    ps, o1 = sv.measure_x(s, 1, np.random.default_rng(4))
    ms, o2 = sv.measure_x_mixed(s.density(), 1, np.random.default_rng(4))
    assert o1 == o2
    assert abs(sv.fidelity_to_pure(ms, ps) - 1) < 1e-12
