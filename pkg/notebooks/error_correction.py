"""
One round of bit-flip correction
================================

The readout frequency sorts the eight configurations into the four
stabilizer classes. After a single flip the class tells which spin to
return, and a slow resonant pulse does it without touching the other pair.
"""

import numpy as np

from isene import effective_model, reference_circuit, solve_all, static_hamiltonian
from isene.gates import Corrector, SyndromeModel, correct_cycle, inject_error
from isene.resonator import TransmissionLine, calibrate_length, readout_table

circ = reference_circuit()
model = effective_model(circ)
h = static_hamiltonian(model.ising.couplings)

e_ls = np.array([s.inductive_energy for s in solve_all(circ)])
line = TransmissionLine()
line = line.with_length(calibrate_length(e_ls, line, 9.0, bounds=(1e-5, 3.3e-3)))
f = readout_table(e_ls, line).frequencies
syn = SyndromeModel.from_frequencies(f, kappa=1e-4)
for s, freq in sorted(syn.frequencies.items()):
    print(s, f"{(freq - 9.0) * 1e6:+.2f} kHz", syn.members[s])

corr = Corrector(h, model.edsr.matrix)
ref = np.zeros(8, complex)
ref[0], ref[7] = np.cos(0.4), np.exp(0.3j) * np.sin(0.4)
for spin in (None, 0, 1, 2):
    psi = ref if spin is None else inject_error(ref, spin)
    _, report = correct_cycle(psi, syn, corr, reference=ref, injected_error=spin)
    print(report.to_dict())
