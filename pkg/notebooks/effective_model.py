"""
From circuit to effective spin model
====================================

Solve the classical circuit for all eight spin configurations of the
reference three-junction chain, read off the Ising couplings, the EDSR
weights and the dispersive shifts, and see what breaks when a loop flux
moves away from zero.
"""

import numpy as np

from isene import effective_model, reference_circuit, solve_all
from isene.resonator import TransmissionLine, calibrate_length

np.set_printoptions(precision=5, suppress=True)

circ = reference_circuit(l_vertical=5.0, l_coupling=5.0)
for sol in solve_all(circ):
    print(sol.config, f"E_g = {sol.energy_g:.9f} GHz", f"E_L = {sol.inductive_energy:.6f} GHz")

# a 9 GHz readout at these inductances needs a line of about 60 um
e_ls = np.array([s.inductive_energy for s in solve_all(circ)])
line = TransmissionLine()
line = line.with_length(calibrate_length(e_ls, line, 9.0, bounds=(1e-5, 3.3e-3)))
print(f"line length {line.length * 1e3:.4f} mm")

model = effective_model(circ, line)
print("J (MHz):", model.ising.summary())
print("chi (MHz):", model.dispersive.summary())
print("A:\n", model.edsr.matrix)
print(model.kramers_report())

# odd couplings appear as soon as time reversal is broken
off = effective_model(circ.with_fluxes((0.1, 0.0, 0.0)), line, allow_off_kramers=True)
print("J at 0.1 rad (MHz):", off.ising.summary())
