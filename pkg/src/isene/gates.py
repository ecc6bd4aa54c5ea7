"""Flux-pulse Z rotations, intermodule ZZ phase, syndrome readout and the bit-flip correction cycle."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import minimize_scalar

from .circuit import ChainCircuit, SpinConfig, spin_table
from .dynamics import (
    SX,
    DriveChannel,
    LogicalFrame,
    PulseSchedule,
    SpinHamiltonian,
    drive_channels,
    local_op,
    schedule_unitary,
)
from .equilibrium import solve_equilibrium

KAPPA_DEFAULT = 1e-4  # GHz


class EndpointNotZero(ValueError):
    pass


class AmbiguousFrequency(ValueError):
    pass


class UncorrectableState(ValueError):
    pass


class InterModuleCouplingTooStrong(UserWarning):
    pass


# R_Z from a flux pulse -------------------------------------------------------


@dataclass
class FluxTrajectory:
    """Sampled flux (rad) on one loop. A repeated time marks a jump."""

    times: np.ndarray
    flux: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.flux = np.asarray(self.flux, dtype=float)
        if self.times.shape != self.flux.shape or self.times.ndim != 1 or self.times.size < 2:
            raise ValueError("times and flux must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(self.times) < 0):
            raise ValueError("times must be non-decreasing")
        if self.flux[0] != 0.0 or self.flux[-1] != 0.0:
            raise EndpointNotZero(f"flux must start and end at zero, got {self.flux[0]} and {self.flux[-1]}")

    @classmethod
    def square(cls, amplitude: float, duration: float, samples: int = 3) -> "FluxTrajectory":
        """Flux switched on at t=0 and off at t=duration."""
        inner = np.linspace(0.0, duration, samples)
        t = np.concatenate([[0.0], inner, [duration]])
        f = np.concatenate([[0.0], np.full(samples, amplitude), [0.0]])
        return cls(t, f)

    @classmethod
    def from_function(cls, fn, duration: float, samples: int) -> "FluxTrajectory":
        t = np.linspace(0.0, duration, samples)
        f = np.array([fn(x) for x in t], dtype=float)
        f[0] = f[-1] = 0.0
        return cls(t, f)

    def pieces(self):
        """Index ranges of the continuous stretches between jumps."""
        cuts = np.flatnonzero(np.diff(self.times) == 0) + 1
        bounds = np.concatenate([[0], cuts, [self.times.size]])
        return [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b - a >= 2]

    def negated(self) -> "FluxTrajectory":
        return FluxTrajectory(self.times.copy(), -self.flux)


@dataclass
class PhaseResult:
    theta: float  # unwrapped, rad
    theta_mod: float  # in [0, 2 pi)
    detuning: np.ndarray  # nu_up - nu_down at each sample, GHz


def logical_detuning(circuit: ChainCircuit, flux_values, flux_index: int = 0) -> np.ndarray:
    """E_up...up - E_down...down (GHz) for each flux value on loop ``flux_index``."""
    n = circuit.n
    up, down = SpinConfig((1,) * n), SpinConfig((-1,) * n)
    values = np.asarray(flux_values, dtype=float)
    uniq, inv = np.unique(values, return_inverse=True)
    # walk outward from zero flux so each solve starts next to the previous one
    order = np.argsort(np.abs(uniq), kind="stable")
    out = np.empty(uniq.size)
    warm = {}
    for i in order:
        fl = np.array(circuit.external_fluxes, dtype=float)
        fl[flux_index] = uniq[i]
        c = circuit.with_fluxes(fl)
        side = np.sign(uniq[i])
        e = []
        for cfg in (up, down):
            x0 = warm.get((side, cfg.index))
            if x0 is not None:
                x0 = x0 + c.linear_minimum() - warm[(side, "lin")]
            sol = solve_equilibrium(c, cfg, x0=x0)
            warm[(side, cfg.index)] = sol.x
            e.append(sol.energy_g)
        warm[(side, "lin")] = c.linear_minimum()
        out[i] = e[0] - e[1]
    return out[inv]


def _integrate(times, values, pieces):
    return float(sum(simpson(values[p], x=times[p]) for p in pieces))


def rz_phase(circuit: ChainCircuit, trajectory: FluxTrajectory, flux_index: int = 0) -> PhaseResult:
    """Logical Z phase 2 pi * int (nu_up - nu_down) dt of a flux pulse."""
    if not 0 <= flux_index < circuit.n:
        raise IndexError(f"flux_index {flux_index} out of range")
    det = logical_detuning(circuit, trajectory.flux, flux_index)
    theta = 2 * np.pi * _integrate(trajectory.times, det, trajectory.pieces())
    return PhaseResult(theta, float(np.mod(theta, 2 * np.pi)), det)


# R_ZZ between two modules --------------------------------------------------


def rzz_phase(j_inter, times, *, j_intra=None) -> float:
    """ZZ angle 2 pi * int 2 J_inter dt (GHz, ns).

    Warns when |J_inter| reaches the weakest intramodule coupling ``j_intra``
    (scalar or coupling matrices).
    """
    t = np.asarray(times, dtype=float)
    j = np.broadcast_to(np.asarray(j_inter, dtype=float), t.shape)
    if j_intra is not None:
        jm = np.concatenate([np.abs(np.atleast_1d(np.asarray(m, dtype=float))).ravel() for m in np.atleast_1d(j_intra)])
        jm = jm[jm > 0]
        if jm.size and np.max(np.abs(j)) >= jm.min():
            warnings.warn(
                "intermodule coupling is not weaker than the intramodule couplings",
                InterModuleCouplingTooStrong,
                stacklevel=2,
            )
    return 2 * np.pi * float(simpson(2 * j, x=t))


def two_module_hamiltonian(j_a, j_b, j_inter: float, link=(2, 0)) -> np.ndarray:
    """Diagonal of the 64-state Ising model of two 3-spin modules.

    Module a holds spins 0-2 and module b spins 3-5; ``link`` names the
    coupled spin of each module.
    """
    ja, jb = np.triu(np.asarray(j_a, float), 1), np.triu(np.asarray(j_b, float), 1)
    na, nb = ja.shape[0], jb.shape[0]
    sig = spin_table(na + nb)
    sa, sb = sig[:, :na], sig[:, na:]
    diag = np.einsum("ch,hk,ck->c", sa, ja, sa) + np.einsum("ch,hk,ck->c", sb, jb, sb)
    return diag + j_inter * sa[:, link[0]] * sb[:, link[1]]


def rzz_phase_simulated(j_a, j_b, j_inter, times, link=(2, 0)) -> float:
    """ZZ angle read off the phases of the four logical product states of the 64-state model."""
    t = np.asarray(times, dtype=float)
    j = np.broadcast_to(np.asarray(j_inter, dtype=float), t.shape)
    diags = np.array([two_module_hamiltonian(j_a, j_b, x, link) for x in j])
    phase = -2 * np.pi * simpson(diags, x=t, axis=0)
    na = np.asarray(j_a).shape[0]
    nb = np.asarray(j_b).shape[0]
    full_a, full_b = (1 << na) - 1, ((1 << nb) - 1) << na
    p00, p01, p10, p11 = phase[0], phase[full_b], phase[full_a], phase[full_a | full_b]
    # R_ZZ(theta) = exp(-i theta ZZ/2): equal phases -theta/2 on 00, 11 and +theta/2 on 01, 10
    return float((p01 + p10 - p00 - p11) / 2)


# syndromes ---------------------------------------------------------------


def syndrome_of(config: int, n: int = 3) -> tuple:
    s = spin_table(n)[config]
    return tuple(int(s[i] * s[i + 1]) for i in range(n - 1))


def correction_map(n: int = 3) -> dict:
    """Syndrome -> 0-based spin to flip (None when no flip is needed)."""
    out = {syndrome_of(0, n): None}
    for j in range(n):
        out[syndrome_of(1 << j, n)] = j
    return out


@dataclass
class SyndromeModel:
    frequencies: dict  # syndrome -> class frequency, GHz
    members: dict  # syndrome -> config indices
    kappa: float = KAPPA_DEFAULT
    n: int = 3

    def __post_init__(self):
        keys = list(self.frequencies)
        for a in range(len(keys)):
            for b in range(a + 1, len(keys)):
                d = abs(self.frequencies[keys[a]] - self.frequencies[keys[b]])
                if d <= self.kappa:
                    raise AmbiguousFrequency(
                        f"classes {keys[a]} and {keys[b]} are {d * 1e3:.4g} MHz apart, not more than kappa = {self.kappa * 1e3:.4g} MHz"
                    )

    @classmethod
    def from_frequencies(cls, frequencies, kappa: float = KAPPA_DEFAULT) -> "SyndromeModel":
        """Build from per-config readout frequencies (ordered by config index)."""
        f = np.asarray(frequencies, dtype=float)
        n = int(round(np.log2(f.size)))
        if 2**n != f.size:
            raise ValueError("need one frequency per spin configuration")
        members = {}
        for c in range(f.size):
            members.setdefault(syndrome_of(c, n), []).append(c)
        freqs = {s: float(np.mean(f[m])) for s, m in members.items()}
        return cls(freqs, members, kappa, n)

    @property
    def corrections(self) -> dict:
        return correction_map(self.n)


def classify_syndrome(measured_f: float, model: SyndromeModel) -> tuple:
    best = min(model.frequencies, key=lambda s: (abs(model.frequencies[s] - measured_f), s))
    if abs(model.frequencies[best] - measured_f) > model.kappa / 2:
        raise AmbiguousFrequency(f"{measured_f} GHz is not within kappa/2 of any syndrome class")
    return best


# correction cycle ----------------------------------------------------------


def inject_error(state, spin: int, n: int | None = None) -> np.ndarray:
    """Bit flip (sigma_x) on one spin, 0-based."""
    psi = np.asarray(state, dtype=complex)
    n = n or int(round(np.log2(psi.size)))
    return local_op(SX, spin, n) @ psi


def blackman_pulse(h_static: SpinHamiltonian, channel: DriveChannel, source: int, target: int, slowness: float = 2000.0):
    """Resonant Blackman pi pulse between two configs with peak Rabi rate f/slowness."""
    n = h_static.n
    f = abs(h_static.diagonal[target] - h_static.diagonal[source])
    g = abs(channel.operator(n)[target, source])
    if f == 0 or g == 0:
        raise UncorrectableState("correction transition is degenerate or not driven")
    peak_rabi = f / slowness
    duration = 1.0 / (2 * 0.42 * peak_rabi)
    f_max = max(f, float(np.ptp(h_static.diagonal)))
    nsteps = int(np.ceil(duration * 20 * f_max))
    times = np.linspace(0.0, duration, nsteps + 1)
    mid = 0.5 * (times[1:] + times[:-1]) / duration
    shape = 0.42 - 0.5 * np.cos(2 * np.pi * mid) + 0.08 * np.cos(4 * np.pi * mid)
    # normalise the discrete area to exactly one half Rabi cycle; holding the
    # carrier constant over a step scales its resonant part by sinc(f dt)
    dt = duration / nsteps
    amp = 0.5 / (g * shape.sum() * dt * np.sinc(f * dt))
    env = np.zeros((nsteps + 1, 1))
    env[:-1, 0] = amp * shape
    ch = DriveChannel(channel.spin, channel.weights, [(f, 0.0)])
    return PulseSchedule(times, env, [ch])


@dataclass
class Corrector:
    """Correction pulses, one per spin, simulated once and cached."""

    h_static: SpinHamiltonian
    a_matrix: np.ndarray
    slowness: float = 2000.0
    calibrate: bool = False
    include_self_term: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def schedule(self, spin: int) -> PulseSchedule:
        return self._entry(spin)[0]

    def unitary(self, spin: int) -> np.ndarray:
        return self._entry(spin)[1]

    def _entry(self, spin: int):
        if spin not in self._cache:
            ch = drive_channels(self.a_matrix, self.include_self_term)[spin]
            sched = blackman_pulse(self.h_static, ch, 1 << spin, 0, self.slowness)
            u = schedule_unitary(self.h_static, sched)
            if self.calibrate:
                sched, u = self._calibrated(sched, spin)
            self._cache[spin] = (sched, u)
        return self._cache[spin]

    def _calibrated(self, sched: PulseSchedule, spin: int):
        src = 1 << spin

        def leak(scale):
            s = PulseSchedule(sched.times, sched.envelopes * scale, sched.channels)
            return 1.0 - abs(schedule_unitary(self.h_static, s)[0, src]) ** 2

        res = minimize_scalar(leak, bounds=(0.95, 1.05), method="bounded", options={"xatol": 1e-9})
        s = PulseSchedule(sched.times, sched.envelopes * res.x, sched.channels)
        return s, schedule_unitary(self.h_static, s)


@dataclass
class CycleReport:
    injected_error: int | None  # 1-based spin, None for no error
    measured_syndrome: tuple
    correction_spin: int | None  # 1-based
    final_W: float
    pauli_frame: str  # "I" or "Z"
    fidelity: float | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["measured_syndrome"] = list(self.measured_syndrome)
        return d


def measured_frequency(state, model: SyndromeModel) -> float:
    """Noise-free readout: frequency of the syndrome class holding most weight."""
    p = np.abs(np.asarray(state)) ** 2
    weights = {s: p[m].sum() for s, m in model.members.items()}
    return model.frequencies[max(weights, key=lambda s: (weights[s], s))]


def correct_cycle(
    state,
    model: SyndromeModel,
    corrector: Corrector,
    *,
    reference=None,
    injected_error: int | None = None,
):
    """Measure the stabilizers, project, apply the correction pulse and report.

    A correction pulse on a Kramers pair returns the two logical amplitudes with
    opposite signs; that logical Z is recorded in ``pauli_frame`` instead of
    being undone. ``reference`` is the logical state expected before the error;
    fidelity is computed after applying the recorded frame.
    """
    psi = np.asarray(state, dtype=complex)
    n = model.n
    frame = LogicalFrame(n)
    syn = classify_syndrome(measured_frequency(psi, model), model)
    proj = np.zeros_like(psi)
    idx = model.members[syn]
    proj[idx] = psi[idx]
    norm = np.linalg.norm(proj)
    if norm == 0:
        raise UncorrectableState("measured sector carries no weight")
    proj /= norm
    spin = model.corrections.get(syn)
    pauli = "I"
    if spin is None:
        if set(idx) != {0, frame.dim - 1}:
            raise UncorrectableState(f"syndrome {syn} has no correction")
        out = proj
    else:
        single = {1 << spin, (frame.dim - 1) ^ (1 << spin)}
        if set(idx) != single:
            raise UncorrectableState(f"syndrome {syn} does not select a single-flip pair")
        u = corrector.unitary(spin)
        out = u @ proj
        a, b = 1 << spin, (frame.dim - 1) ^ (1 << spin)
        p0 = u[0, a]
        p1 = u[frame.dim - 1, b]
        pauli = "Z" if np.real(p1 / p0) < 0 else "I"
    w = float(abs(out[0]) ** 2 + abs(out[-1]) ** 2)
    fid = None
    if reference is not None:
        ref = np.asarray(reference, dtype=complex).copy()
        if pauli == "Z":
            ref[-1] = -ref[-1]
        fid = float(abs(np.vdot(ref, out)) ** 2)
    report = CycleReport(
        None if injected_error is None else injected_error + 1,
        syn,
        None if spin is None else spin + 1,
        w,
        pauli,
        fid,
    )
    return out, report
