"""Workbench for series chains of Andreev spin qubits coupled by linear inductors.

The classical circuit is solved per spin configuration, the results are
reduced to an effective Ising/dispersive/EDSR model, and logical gates and
the bit-flip correction cycle are simulated on that model.
"""

from .circuit import ChainCircuit, JunctionParams, NodePhases, SpinConfig, all_configs, reference_circuit
from .control import GateObjective, gate_fidelity, krotov_guess, krotov_optimize, sequence_arbitrary_theta, three_pi_sequence
from .dynamics import LogicalFrame, PulseSchedule, drive_channels, propagate, static_hamiltonian, transition_spectrum
from .equilibrium import inductive_energy, solve_all, solve_equilibrium, spectrum_vs_flux
from .extraction import effective_model, extract_dispersive, extract_edsr_weights, extract_ising, scan_2d, walsh_extract
from .gates import Corrector, FluxTrajectory, SyndromeModel, classify_syndrome, correct_cycle, inject_error, rz_phase, rzz_phase
from .resonator import TransmissionLine, calibrate_length, readout_table, resonance_frequency

__version__ = "0.1.0"

__all__ = [
    "ChainCircuit",
    "Corrector",
    "FluxTrajectory",
    "GateObjective",
    "JunctionParams",
    "LogicalFrame",
    "NodePhases",
    "PulseSchedule",
    "SpinConfig",
    "SyndromeModel",
    "TransmissionLine",
    "all_configs",
    "calibrate_length",
    "classify_syndrome",
    "correct_cycle",
    "drive_channels",
    "effective_model",
    "extract_dispersive",
    "extract_edsr_weights",
    "extract_ising",
    "gate_fidelity",
    "inductive_energy",
    "inject_error",
    "krotov_guess",
    "krotov_optimize",
    "reference_circuit",
    "propagate",
    "readout_table",
    "resonance_frequency",
    "rz_phase",
    "rzz_phase",
    "scan_2d",
    "sequence_arbitrary_theta",
    "solve_all",
    "solve_equilibrium",
    "spectrum_vs_flux",
    "static_hamiltonian",
    "three_pi_sequence",
    "transition_spectrum",
    "walsh_extract",
]
