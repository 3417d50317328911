"""One test per acceptance criterion, each at the stated tolerance.

Every test records a PASS/FAIL line that is printed in the terminal summary.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE
from photonic_queue import statevector as sv
from photonic_queue.cli import main
from photonic_queue.photonics import (
    WavepacketModel,
    cnot_completion_error,
    linear_fit,
    loss_coefficients,
    loss_fidelity_model,
    phase_gate_fidelity,
    scattered_overlap,
)
from photonic_queue.protocol import LatticeGeometry, build_cluster_program
from photonic_queue.runner import run, run_lossy_cluster
from photonic_queue.stabilizer import graph_stabilizer, verify_graph_state
from photonic_queue.tensornet import (
    TORIC_CONVENTIONS,
    TensorNetwork,
    check_isometry,
    cluster_step_closed_form,
    contract_protocol_network,
    contract_torus,
    extract_step_tensor,
    toric_tensor,
    verify_toric_stabilizers,
)

from _helpers import random_clifford_program, random_unitary_step_program

CANDIDATE = Path(__file__).resolve().parents[1] / "demos" / "toric_candidate.json"


def record(n, passed, detail):
    ACCEPTANCE[n] = (bool(passed), detail)
    print(f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


def test_criterion_1_cluster_state():
    start = time.perf_counter()
    worst, failures, cases = 0.0, [], 0
    for N in range(2, 5):
        for K in range(N + 1, 15):
            program = build_cluster_program(N, K)
            geo = LatticeGeometry.cluster(N, K)
            state = run(program, "statevector").state
            for v in geo.vertices:
                dev = abs(sv.expectation(state, graph_stabilizer(geo, v, state.n)) - 1.0)
                worst = max(worst, dev)
            if not verify_graph_state(run(program, "stabilizer").state, geo).verdict:
                failures.append((N, K))
            cases += 1
    for N in range(2, 9):
        for K in range(N + 1, 65):
            if not verify_graph_state(run(build_cluster_program(N, K), "stabilizer").state,
                                      LatticeGeometry.cluster(N, K)).verdict:
                failures.append((N, K))
            cases += 1
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-10 and not failures and elapsed <= 60.0,
           f"{cases} runs, max statevector deviation {worst:.1e}, stabilizer failures {failures}, "
           f"{elapsed:.1f} s")


def test_criterion_2_engine_equivalence():
    rng = np.random.default_rng(2024)
    worst, sizes = 0.0, []
    for _ in range(200):
        program = random_clifford_program(rng, max_qubits=12, max_gates=200)
        seed = int(rng.integers(2 ** 31))
        tab = run(program, "stabilizer", seed).state
        vec = run(program, "statevector", seed).state
        for g in tab.generators():
            worst = max(worst, abs(sv.expectation(vec, g) - 1.0))
        sizes.append(program.n_qubits)
    record(2, worst <= 1e-10, f"200 programs ({min(sizes)}..{max(sizes)} qubits), max deviation {worst:.1e}")


def test_criterion_3_isometry():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        program, k = random_unitary_step_program(rng)
        worst = max(worst, check_isometry(extract_step_tensor(program, k)).deviation)
    t = extract_step_tensor(build_cluster_program(2, 4), 3)
    closed = float(np.max(np.abs(t.data - cluster_step_closed_form())))
    record(3, worst <= 1e-12 and closed <= 1e-14,
           f"random isometry deviation {worst:.1e}, cluster closed-form error {closed:.1e}")


def test_criterion_4_contraction():
    worst, cases = 0.0, 0
    for N in range(1, 7):
        for K in range(0, 16):
            program = build_cluster_program(N, K)
            full = contract_protocol_network(TensorNetwork.from_program(program))
            ref = run(program, "statevector").state
            aligned = sv.align_global_phase(full.amplitudes, ref.amplitudes)
            worst = max(worst, float(np.max(np.abs(aligned - ref.amplitudes))))
            cases += 1
    record(4, worst <= 1e-10, f"{cases} cluster programs up to 16 qubits, max amplitude error {worst:.1e}")


def test_criterion_5_toric():
    iso = check_isometry(toric_tensor(0.5), tol=1e-15)
    state = contract_torus(toric_tensor(0.5), 2, 2)
    passing = [c for c in TORIC_CONVENTIONS if verify_toric_stabilizers(state, 2, 2, c, 1e-8).passed]
    gram_exact = bool(np.array_equal(toric_tensor(0.25).gram(), np.eye(4) / 4))
    record(5, iso.passed and len(passing) == 1 and gram_exact,
           f"isometry deviation {iso.deviation:.1e}, passing conventions {passing}, "
           f"1/4 Gram equals I/4 exactly: {gram_exact}")


def test_criterion_6_closed_forms():
    xs = np.geomspace(0.01, 1.0, 12)
    overlap_err = 0.0
    for x in xs:
        for w in (WavepacketModel.lorentzian(x), WavepacketModel.gaussian(x)):
            overlap_err = max(overlap_err, abs(scattered_overlap(w, 1.0) - scattered_overlap(w, 1.0, "closed")))
    cnot_err = 0.0
    for T in (0.5, 1.0, 2.0, 4.0, 8.0, 12.0):
        for shape, kw in (("lorentzian", {"gamma_l": 1.0}), ("gaussian", {"B": 1.0})):
            q = cnot_completion_error(shape, T=T, **kw)
            c = cnot_completion_error(shape, T=T, method="closed", **kw)
            cnot_err = max(cnot_err, abs(q - c))
    h = 1e-4
    slope = (phase_gate_fidelity("lorentzian", h) - 1.0) / h
    gx = np.linspace(0.01, 0.05, 9)
    coeff = float(np.polyfit(gx ** 2, [phase_gate_fidelity("gaussian", v) for v in gx], 2)[1])
    fz = phase_gate_fidelity("lorentzian", 1.0)
    eps = cnot_completion_error("lorentzian", T=10.0, gamma_l=1.0)
    ok = (overlap_err <= 1e-6 and cnot_err <= 1e-6 and abs(slope + 0.8) <= 1e-3
          and abs(coeff + 1.6) <= 0.05 and abs(fz - 0.65) <= 1e-12 and abs(eps - math.exp(-5)) <= 1e-12)
    record(6, ok, f"overlap {overlap_err:.1e}, cnot {cnot_err:.1e}, slope {slope:.5f}, "
                  f"gaussian x^2 coefficient {coeff:.4f}, F_Z(1) error {abs(fz - 0.65):.1e}, "
                  f"eps error {abs(eps - math.exp(-5)):.1e}")


@pytest.fixture(scope="module")
def loss_grid():
    rows = []
    for N in range(1, 11):
        for M in range(1, 10 // N + 1):
            for eta in (20.0, 50.0, 100.0, math.inf):
                _, F = run_lossy_cluster(N, N * M, eta, eta)
                rows.append((N, M, eta, F, loss_fidelity_model(N, M, eta, eta)))
    return rows


def test_criterion_7_loss_model(loss_grid):
    worst = max(abs(F - model) for *_, F, model in loss_grid)
    r2s = []
    for N in (1, 2, 3):
        for eta in (20.0, 50.0, 100.0):
            pts = [(N * M, math.log(F)) for n, M, e, F, _ in loss_grid if n == N and e == eta]
            r2s.append(linear_fit(*zip(*pts)).r2)
    points = []
    for el, er in ((20.0, math.inf), (50.0, math.inf), (100.0, math.inf),
                   (math.inf, 20.0), (math.inf, 50.0), (math.inf, 100.0)):
        points.append((8, el, er, run_lossy_cluster(2, 8, el, er)[1]))
    coeffs = loss_coefficients(points)
    record(7, worst <= 0.02 and min(r2s) >= 0.99,
           f"{len(loss_grid)} grid points, max |model - oracle| {worst:.1e}, min r^2 {min(r2s):.5f}, "
           f"fitted 1/eta_R : 1/eta_L ratio {coeffs['ratio']:.2f} (reported, not asserted)")


GOLDEN = [
    ["generate", "--builtin", "cluster", "--n", "3", "--k", "12", "--engine", "stabilizer"],
    ["generate", "--builtin", "cluster", "--n", "2", "--k", "6", "--engine", "statevector", "--disentangle",
     "--seed", "7"],
    ["generate", "--builtin", "cluster", "--n", "2", "--k", "4", "--engine", "density", "-o", "{tmp}/rho.bin"],
    ["generate", "--program", str(CANDIDATE), "--engine", "statevector", "-o", "{tmp}/toric_state.json"],
    ["verify", "--state", "{tmp}/toric_state.json"],
    ["extract-tensor", "--builtin", "toric", "-o", "{tmp}/toric.bin"],
    ["verify", "--tensor", "{tmp}/toric.bin"],
    ["extract-tensor", "--builtin", "cluster", "--n", "2", "--k", "4", "--step", "3"],
    ["check-isometry", "--builtin", "toric", "--normalization", "0.25"],
    ["contract", "--builtin", "cluster", "--n", "2", "--k", "6", "--compare"],
    ["contract", "--builtin", "cluster", "--n", "2", "--k", "4", "--outcome", "01100"],
    ["toric", "--candidate", str(CANDIDATE), "--restarts", "1", "--state-output", "{tmp}/torus.json"],
    ["verify", "--state", "{tmp}/torus.json", "--check", "toric"],
    ["fidelity", "gate-z", "--shape", "gaussian", "--x", "0.25"],
    ["fidelity", "gate-x", "--shape", "gaussian", "--T", "4", "--B", "1"],
    ["fidelity", "overlap", "--shape", "lorentzian", "--x", "0.1"],
    ["fidelity", "loss", "--n", "2", "--m", "2", "--eta", "50"],
    ["fidelity", "sweep", "gate-z", "--x", "0.01:1:50", "--both-shapes"],
    ["sweep", "gate-x", "--x", "0.5:12:10"],
    ["sweep", "loss", "--format", "json"],
    ["feasibility", "--tau", "3.5", "--T", "1", "--B", "20", "--gamma-r", "100"],
]


def _snapshot(tmp_path):
    return {p.name: p.read_bytes() for p in sorted(tmp_path.iterdir())}


def test_criterion_8_determinism(tmp_path, capsys):
    differing = []
    for argv in GOLDEN:
        argv = [a.replace("{tmp}", str(tmp_path)) for a in argv]
        results = []
        for _ in range(2):
            code = main(argv)
            out, _ = capsys.readouterr()
            results.append((code, out, _snapshot(tmp_path)))
        if results[0] != results[1]:
            differing.append(" ".join(argv[:2]))
        if argv[0] != "generate" or "--output" in argv or "-o" in argv:
            continue
        json.loads(results[0][1])  # stdout documents must parse
    record(8, not differing, f"{len(GOLDEN)} golden commands run twice, differing: {differing}")
