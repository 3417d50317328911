"""How pulse shape and photon loss limit the protocol.

A photon scattering off the emitter picks up a frequency-dependent phase.
Narrow pulses see a clean pi phase; broad ones do not.  Gaussian pulses
degrade far more gently than Lorentzian ones.  Loss then caps the lattice
size through the emission and scattering efficiencies.

Run with ``python3 demos/fidelity_walkthrough.py``.
"""

import math

import numpy as np

from photonic_queue.photonics import (
    cnot_completion_error,
    cnot_fidelity,
    linear_fit,
    loss_fidelity_model,
    phase_gate_fidelity,
)
from photonic_queue.protocol import FeasibilityParams, check_feasibility
from photonic_queue.runner import run_lossy_cluster

# %% Phase-gate fidelity against pulse width x = bandwidth / emitter linewidth.
print(" x      lorentzian  gaussian")
for x in (0.01, 0.05, 0.1, 0.25, 0.5, 1.0):
    print(f"{x:5.2f}  {phase_gate_fidelity('lorentzian', x):10.6f}  {phase_gate_fidelity('gaussian', x):8.6f}")

# %% The CNOT needs the pulse to be emitted within one period T.
for T in (2.0, 4.0, 8.0):
    eps_l = cnot_completion_error("lorentzian", T=T, gamma_l=1.0)
    eps_g = cnot_completion_error("gaussian", T=T, B=1.0)
    print(f"T={T}: lorentzian F={cnot_fidelity(eps_l):.4f}  gaussian F={cnot_fidelity(eps_g):.4f}")

# %% Loss: the density-matrix oracle against the per-photon model.
eta = 50.0
rows = []
for M in range(1, 6):
    _, F = run_lossy_cluster(2, 2 * M, eta, eta)
    rows.append((2 * M, F, loss_fidelity_model(2, M, eta, eta)))
    print(f"NM={2 * M:2d}  oracle {F:.5f}  model {rows[-1][2]:.5f}")
fit = linear_fit([r[0] for r in rows], [math.log(r[1]) for r in rows])
print(f"log F is linear in NM: slope {fit.slope:.4f}, r^2 {fit.r2:.5f}")

# %% Are the device parameters good enough?
for params in (FeasibilityParams(tau=3.5, T=1.0, B=400.0, gamma_r=40000 / 3.5),
               FeasibilityParams(tau=3.5, T=1.0, B=20.0, gamma_r=100.0)):
    report = check_feasibility(params)
    print(params, "->", "feasible" if report.verdict else "infeasible")
