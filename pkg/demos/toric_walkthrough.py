"""A toric-code ground state from a single repeated tensor.

The toric step tensor has one physical leg per bond and four virtual legs.
Contracting it on a small torus yields a state stabilised by the star and
plaquette operators, for one of the two ways of placing qubits on the
lattice.  A four-photon circuit reproduces the tensor up to local unitaries.

Run with ``python3 demos/toric_walkthrough.py``.
"""

from pathlib import Path

import numpy as np

from photonic_queue import check_isometry, contract_torus, extract_step_tensor, load_program, toric_tensor
from photonic_queue.tensornet import TORIC_CONVENTIONS, local_unitary_distance, verify_toric_stabilizers

# %% The tensor is an isometry at normalisation 1/2 and not at 1/4.
for norm in (0.5, 0.25):
    rep = check_isometry(toric_tensor(norm), tol=1e-15)
    print(f"normalisation {norm}: Gram diagonal {toric_tensor(norm).gram()[0, 0].real:.4f}, "
          f"isometry {rep.passed}")

# %% Contract on a 2x2 torus and test both lattice conventions.
state = contract_torus(toric_tensor(0.5), 2, 2)
for convention in TORIC_CONVENTIONS:
    rep = verify_toric_stabilizers(state, 2, 2, convention, 1e-8)
    values = np.round([e["expectation"] for e in rep.expectations], 6)
    print(f"{convention:12s} pass={rep.passed} expectations={values.tolist()}")

# %% The photonic candidate circuit reproduces the tensor; the fit searches
# one unitary per leg, so a circuit that differs by local rotations also passes.
program = load_program(Path(__file__).with_name("toric_candidate.json"))
candidate = extract_step_tensor(program, program.K)
fit = local_unitary_distance(candidate, toric_tensor(0.5), restarts=1)
print(f"candidate distance before {fit.initial_distance:.3f}, after {fit.distance:.1e}")
