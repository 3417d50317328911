import io
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import unitary_group

from photonic_queue import statevector as sv
from photonic_queue.errors import CapExceededError, ProtocolError
from photonic_queue.protocol import ProtocolProgram, build_cluster_program, load_program
from photonic_queue.runner import run
from photonic_queue.tensornet import (
    TORIC_CONVENTIONS,
    StepTensor,
    TensorNetwork,
    check_isometry,
    cluster_step_closed_form,
    contract_protocol_network,
    contract_torus,
    extract_step_tensor,
    local_unitary_distance,
    read_tensor_binary,
    toric_ground_state,
    toric_tensor,
    verify_toric_stabilizers,
    write_tensor_binary,
)

from _helpers import random_clifford_program, random_unitary_step_program

CANDIDATE = Path(__file__).resolve().parents[1] / "demos" / "toric_candidate.json"


def _aligned_distance(a: sv.PureState, b: sv.PureState) -> float:
    return float(np.max(np.abs(sv.align_global_phase(a.amplitudes, b.amplitudes) - b.amplitudes)))


def test_identity_step():
    program = ProtocolProgram(N=1, K=2, template=())
    t = extract_step_tensor(program, 2).data
    expected = np.zeros((2,) * 5)
    for i, a, b, c, d in np.ndindex(*expected.shape):
        expected[i, a, b, c, d] = float(i == c and a == 0 and b == d)
    np.testing.assert_array_equal(t, expected)
    assert check_isometry(extract_step_tensor(program, 2)).deviation == 0


def test_cluster_step_closed_form():
    program = build_cluster_program(2, 4)
    t = extract_step_tensor(program, 3)
    assert np.max(np.abs(t.data - cluster_step_closed_form())) <= 1e-14
    assert check_isometry(t).deviation <= 1e-14


def test_random_unitary_steps_are_isometries():
    rng = np.random.default_rng(11)
    for _ in range(100):
        program, k = random_unitary_step_program(rng)
        assert check_isometry(extract_step_tensor(program, k)).deviation <= 1e-12


def test_extraction_rejects_non_symbolic_steps():
    with pytest.raises(ProtocolError):
        extract_step_tensor(build_cluster_program(2, 4), 5)


def test_zero_steps_amplitude():
    net = TensorNetwork.from_program(ProtocolProgram(N=2, K=0, template=()))
    assert contract_protocol_network(net, outcome=[0]) == 1


def test_single_amplitude_matches_statevector():
    program = build_cluster_program(2, 4)
    net = TensorNetwork.from_program(program)
    state = run(program, "statevector").state
    for idx in range(2 ** 5):
        bits = [(idx >> q) & 1 for q in range(5)]
        assert abs(contract_protocol_network(net, bits) - state.amplitudes[idx]) <= 1e-12


def test_full_contraction_matches_statevector():
    program = build_cluster_program(2, 6)
    full = contract_protocol_network(TensorNetwork.from_program(program))
    assert _aligned_distance(full, run(program, "statevector").state) <= 1e-10


def test_random_programs_contract_like_simulation():
    rng = np.random.default_rng(12)
    for _ in range(30):
        program = random_clifford_program(rng, max_qubits=10, max_gates=40)
        full = contract_protocol_network(TensorNetwork.from_program(program))
        assert _aligned_distance(full, run(program, "statevector").state) <= 1e-10
    for _ in range(30):
        program, _ = random_unitary_step_program(rng)
        full = contract_protocol_network(TensorNetwork.from_program(program))
        assert _aligned_distance(full, run(program, "statevector").state) <= 1e-10


def test_contraction_cap():
    with pytest.raises(CapExceededError) as info:
        contract_protocol_network(TensorNetwork.from_program(build_cluster_program(2, 12)), cap=10)
    assert info.value.required == 13


def test_wiring_is_a_matching():
    net = TensorNetwork.from_program(build_cluster_program(3, 8))
    bonds = net.wiring()
    for kind in ("horizontal", "vertical"):
        ins = [b[2] for b in bonds if b[0] == kind and b[2] <= 8]
        assert sorted(ins) == list(range(1, 9))


def test_toric_entries():
    t = toric_tensor().data
    assert t[1, 1, 0, 0, 1, 0, 0, 0] == 0.5
    for idx in np.ndindex(*t.shape):
        if sum(idx[:4]) % 2:
            assert t[idx] == 0
    assert check_isometry(toric_tensor(0.5), tol=1e-15).passed


@pytest.mark.parametrize("norm", [0.25, 0.5, 1.0, 0.3])
def test_toric_gram_scale(norm):
    g = toric_tensor(norm).gram()
    np.testing.assert_allclose(g, 4 * norm ** 2 * np.eye(4), rtol=1e-15, atol=0)


def test_printed_gram_is_exact():
    np.testing.assert_array_equal(toric_tensor(0.25).gram(), np.eye(4) / 4)


def test_printed_normalization_fails_isometry():
    rep = check_isometry(toric_tensor(0.25))
    assert rep.deviation == 0.75 and not rep.passed


def test_single_cell_torus_is_even():
    state = contract_torus(toric_tensor(), 1, 1)
    for idx, amp in enumerate(state.amplitudes):
        if abs(amp) > 0:
            assert bin(idx).count("1") % 2 == 0


def test_two_by_two_torus_single_convention():
    state = contract_torus(toric_tensor(), 2, 2)
    verdicts = {c: verify_toric_stabilizers(state, 2, 2, c).passed for c in TORIC_CONVENTIONS}
    assert verdicts == {"bond-vertex": True, "face-vertex": False}
    oracle = toric_ground_state(2, 2, "bond-vertex")
    assert abs(sv.fidelity_pure(state, oracle) - 1) < 1e-10


def test_oracle_and_product_state():
    rep = verify_toric_stabilizers(toric_ground_state(2, 1), 2, 1)
    assert rep.passed
    rep = verify_toric_stabilizers(sv.PureState.zeros(8), 2, 1)
    for row in rep.expectations:
        assert row["expectation"] == pytest.approx(1.0 if row["type"] == "plaquette" else 0.0)


def test_torus_scaling_invariance():
    a = contract_torus(toric_tensor(0.5), 2, 1)
    b = contract_torus(toric_tensor(0.5).scaled(7.3), 2, 1)
    assert _aligned_distance(a, b) < 1e-14


def _shift_cells(state, Tx, Ty, dx, dy):
    n = state.n
    perm = [4 * (((q // 4) // Tx + dy) % Ty * Tx + ((q // 4) % Tx + dx) % Tx) + q % 4 for q in range(n)]
    idx = np.arange(2 ** n)
    new = np.zeros(2 ** n, dtype=np.int64)
    for q, target in enumerate(perm):
        new |= ((idx >> q) & 1) << target
    out = np.empty_like(state.amplitudes)
    out[new] = state.amplitudes
    return sv.PureState(n, out)


@pytest.mark.parametrize("shift", [(1, 0), (0, 1)])
def test_torus_translation_invariance(shift):
    state = contract_torus(toric_tensor(), 2, 2)
    moved = _shift_cells(state, 2, 2, *shift)
    assert abs(sv.fidelity_pure(state, moved) - 1) < 1e-12


def test_torus_cap():
    with pytest.raises(CapExceededError):
        contract_torus(toric_tensor(), 3, 2)


def test_candidate_circuit_reproduces_toric_tensor():
    program = load_program(CANDIDATE)
    t = extract_step_tensor(program, program.N + 1)
    assert check_isometry(t).passed
    fit = local_unitary_distance(t, toric_tensor(0.5), restarts=1)
    assert fit.distance < 1e-8


def test_local_unitary_distance_undoes_rotations():
    rng = np.random.default_rng(2)
    target = toric_tensor()
    data = target.data
    for ax in (0, 5):
        u = unitary_group.rvs(2, random_state=rng)
        data = np.moveaxis(np.tensordot(u, data, axes=([1], [ax])), 0, ax)
    rotated = StepTensor(4, 2, 2, data)
    fit = local_unitary_distance(rotated, target, restarts=4, seed=1)
    assert fit.initial_distance > 0.1
    assert fit.distance < 1e-6


def test_tensor_file_round_trip():
    t = extract_step_tensor(build_cluster_program(2, 4), 3)
    buf = io.BytesIO()
    write_tensor_binary(t, buf, extra={"normalization": None})
    buf.seek(0)
    again, header = read_tensor_binary(buf)
    np.testing.assert_array_equal(again.data, t.data)
    assert header["layout"] == "row-major (i...,a,b,c,d)"
    with pytest.raises(ProtocolError):
        read_tensor_binary(io.BytesIO(b"junk\n"))
