"""Transmission-line resonator terminated by the chain's inductance.

The resonance condition is ``cot(w l / v) = -i Z_L / Z_c`` with the load
``Z_L = 2 i w phi0**2 / E_L``. Writing ``x = w l / v`` this becomes the real
equation ``cot(x) = k x`` with ``k = 2 phi0**2 v / (l E_L Z_c)``, which has
exactly one root in (0, pi/2) for k > 0.

SI units are used only inside this module; inputs and outputs are GHz.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .circuit import H_PLANCK, PHI0, ChainCircuit
from .equilibrium import solve_all

C_LIGHT = 299792458.0
L_MIN = 0.1e-3
L_MAX = 3.3e-3
_EPS = 1e-9


class ResonatorError(ValueError):
    pass


class NoRootInBracket(ResonatorError):
    pass


class NonPositiveInductiveEnergy(ResonatorError):
    pass


class TargetUnreachable(ResonatorError):
    def __init__(self, message, interval):
        super().__init__(message)
        self.interval = interval


@dataclass(frozen=True)
class TransmissionLine:
    z_c: float = 50.0
    v_eff: float = 0.39 * C_LIGHT
    length: float | None = None

    def __post_init__(self):
        if self.z_c <= 0 or self.v_eff <= 0:
            raise ValueError("impedance and phase velocity must be positive")
        if self.length is not None and not 1e-5 <= self.length <= 1e-1:
            raise ValueError(f"line length {self.length} m outside [1e-5, 1e-1] m")

    def with_length(self, length: float) -> "TransmissionLine":
        return replace(self, length=float(length))

    @property
    def quarter_wave(self) -> float:
        """Unloaded quarter-wave frequency v/(4l), GHz."""
        return self.v_eff / (4 * self._length()) * 1e-9

    def _length(self) -> float:
        if self.length is None:
            raise ValueError("line length not set")
        return self.length


def load_factor(e_l: float, line: TransmissionLine, z_factor: float = 2.0) -> float:
    """k in cot(x) = k x. ``z_factor`` is the prefactor of Z_L (2 by default)."""
    e_l_joule = e_l * 1e9 * H_PLANCK
    return z_factor * PHI0**2 * line.v_eff / (line._length() * e_l_joule * line.z_c)


def resonance_frequency(e_l: float, line: TransmissionLine, *, z_factor: float = 2.0) -> float:
    """Lowest resonance of the loaded line, GHz, to better than 1 Hz."""
    if not np.isfinite(e_l):
        if e_l > 0:
            return line.quarter_wave
        raise NonPositiveInductiveEnergy(f"E_L = {e_l}")
    if e_l <= 0:
        raise NonPositiveInductiveEnergy(f"E_L must be positive, got {e_l} GHz")
    k = load_factor(e_l, line, z_factor)
    scale = line.v_eff / (2 * np.pi * line._length())  # Hz per unit x

    def f(x):
        return np.cos(x) / np.sin(x) - k * x

    lo, hi = _EPS, np.pi - _EPS
    if not f(lo) > 0 > f(hi):
        raise NoRootInBracket(f"no sign change for k={k}")
    x = brentq(f, lo, hi, xtol=1e-3 / scale, rtol=4 * np.finfo(float).eps, maxiter=500)
    # one Newton polish step; f'(x) = -1/sin^2 - k
    x -= f(x) / (-1.0 / np.sin(x) ** 2 - k)
    return x * scale * 1e-9


def root_residual(f_ghz: float, e_l: float, line: TransmissionLine, *, z_factor: float = 2.0) -> float:
    x = 2 * np.pi * f_ghz * 1e9 * line._length() / line.v_eff
    return float(np.cos(x) / np.sin(x) - load_factor(e_l, line, z_factor) * x)


@dataclass
class ReadoutTable:
    frequencies: np.ndarray  # GHz, ordered by config index
    inductive_energies: np.ndarray  # GHz
    line: TransmissionLine

    @property
    def reference_frequency(self) -> float:
        """Walsh constant term (config average) of the resonance frequency."""
        return float(np.mean(self.frequencies))


def _frequencies(e_ls, line, z_factor):
    return np.array([resonance_frequency(e, line, z_factor=z_factor) for e in e_ls])


def calibrate_length(
    circuit: ChainCircuit | np.ndarray,
    line: TransmissionLine,
    target_f0: float = 9.0,
    *,
    z_factor: float = 2.0,
    bounds=(L_MIN, L_MAX),
) -> float:
    """Line length (m) placing the config-averaged resonance at ``target_f0``.

    ``circuit`` may also be the array of per-config inductive energies, which
    avoids re-solving the equilibria.
    """
    e_ls = _inductive_energies(circuit)

    def f0(length):
        return float(np.mean(_frequencies(e_ls, line.with_length(length), z_factor)))

    lo, hi = bounds
    f_hi, f_lo = f0(lo), f0(hi)  # f0 decreases with length
    if not f_lo <= target_f0 <= f_hi:
        raise TargetUnreachable(
            f"target {target_f0} GHz outside achievable [{f_lo:.6f}, {f_hi:.6f}] GHz",
            (f_lo, f_hi),
        )
    # f0 ~ 1/l: stop at a length step worth well below 1 Hz
    return float(brentq(lambda l: f0(l) - target_f0, lo, hi, xtol=1e-19, rtol=4 * np.finfo(float).eps, maxiter=500))


def readout_table(circuit: ChainCircuit | np.ndarray, line: TransmissionLine, *, z_factor: float = 2.0) -> ReadoutTable:
    e_ls = _inductive_energies(circuit)
    return ReadoutTable(_frequencies(e_ls, line, z_factor), e_ls, line)


def _inductive_energies(circuit) -> np.ndarray:
    if isinstance(circuit, ChainCircuit):
        return np.array([s.inductive_energy for s in solve_all(circuit)])
    return np.asarray(circuit, dtype=float)


def line_for_target(circuit, target_f0: float = 9.0, *, z_c=50.0, v_eff=0.39 * C_LIGHT, z_factor=2.0):
    """Calibrated line and its readout table in one call."""
    e_ls = _inductive_energies(circuit)
    line = TransmissionLine(z_c, v_eff)
    line = line.with_length(calibrate_length(e_ls, line, target_f0, z_factor=z_factor))
    return line, readout_table(e_ls, line, z_factor=z_factor)
