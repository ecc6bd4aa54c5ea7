"""
Logical rotations on the Kramers pair
=====================================

Build the three-pulse R_X(pi) and an arbitrary-angle rotation from resonant
EDSR tones, then let Krotov find a pulse for R_X(pi/2). A flux pulse gives
R_Z and a weak link between two chains gives R_ZZ. The full Krotov run takes
about a minute.
"""

import numpy as np

from isene import effective_model, reference_circuit, static_hamiltonian
from isene.control import (
    GateObjective,
    gate_fidelity,
    gate_traces,
    krotov_guess,
    krotov_optimize,
    sequence_arbitrary_theta,
    three_pi_sequence,
)
from isene.dynamics import schedule_unitary, transition_spectrum
from isene.gates import FluxTrajectory, rz_phase, rzz_phase, rzz_phase_simulated

circ = reference_circuit()
model = effective_model(circ)
h = static_hamiltonian(model.ising.couplings)
a = model.edsr.matrix

for t in transition_spectrum(h.couplings):
    print(f"spin {t.spin + 1} others {'aligned' if t.others_aligned else 'anti-aligned'}: {t.frequency * 1e3:.4f} MHz")

seq = three_pi_sequence(h, a)
tr = gate_traces(h, seq.schedule)
fid = gate_fidelity(schedule_unitary(h, seq.schedule), GateObjective.rotation_x(np.pi))
print(f"three pi pulses: F = {fid:.6f}, W = {tr.weight[-1]:.6f}, theta(T) = {tr.theta[-1]:.5f}")

seq = sequence_arbitrary_theta(h, a, np.pi / 3)
fid = gate_fidelity(schedule_unitary(h, seq.schedule), GateObjective.rotation_x(np.pi / 3))
print(f"R_X(pi/3) from five pulses: F = {fid:.6f}")

# Krotov
obj = GateObjective.rotation_x(np.pi / 2)
res = krotov_optimize(obj, krotov_guess(h, a), h, n_iter=500)
print(f"Krotov: 1 - F = {res.infidelity:.2e} after {res.iterations} iterations")
tr = gate_traces(h, res.schedule)
print(f"theta(T) = {tr.theta[-1]:.6f}, W(T) = {tr.weight[-1]:.9f}")

# R_Z: phase is odd in the flux
traj = FluxTrajectory.from_function(lambda t: 0.1 * np.sin(np.pi * t / 10) ** 2, 10.0, 201)
print("R_Z angle", rz_phase(circ, traj).theta, "and for the negated pulse", rz_phase(circ, traj.negated()).theta)

# R_ZZ: the area formula against the 64-state model
t = np.linspace(0, 1000.0, 101)
print("R_ZZ", rzz_phase(1e-5, t), rzz_phase_simulated(h.couplings, h.couplings, 1e-5, t))
