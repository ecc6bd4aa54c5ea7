"""Logical R_X gates from EDSR drives: resonant pi-pulse loops and Krotov optimization."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .dynamics import (
    LogicalFrame,
    logical_decompose,
    propagate,
    relative_angle,
    DriveChannel,
    PulseSchedule,
    SpinHamiltonian,
    StepTooLarge,
    Trajectory,
    _ops,
    drive_channels,
    max_dt,
)

log = logging.getLogger(__name__)


class UnresolvableTransitions(ValueError):
    pass


class MonotonicityViolation(RuntimeError):
    pass


def rx(theta: float) -> np.ndarray:
    """exp(-i theta X / 2) on the logical qubit."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


@dataclass
class GateObjective:
    target: np.ndarray  # 2x2 on the logical subspace
    frame: LogicalFrame = field(default_factory=LogicalFrame)
    theta: float | None = None

    def __post_init__(self):
        t = np.asarray(self.target, dtype=complex)
        if t.shape != (2, 2) or not np.allclose(t.conj().T @ t, np.eye(2), atol=1e-12):
            raise ValueError("target must be a 2x2 unitary")
        self.target = t

    @classmethod
    def rotation_x(cls, theta: float, frame: LogicalFrame | None = None) -> "GateObjective":
        return cls(rx(theta), frame or LogicalFrame(), float(theta))

    @property
    def initial_states(self) -> np.ndarray:
        return self.frame.basis

    @property
    def target_states(self) -> np.ndarray:
        return self.frame.basis @ self.target


def gate_fidelity(u_sim, objective: GateObjective) -> float:
    """|tr(P U_target^dag U_sim P)|^2 / 4 on the logical subspace.

    ``u_sim`` is either the full propagator or the (dim, 2) images of the
    two logical basis states.
    """
    u = np.asarray(u_sim, dtype=complex)
    cols = u @ objective.frame.basis if u.shape[1] == objective.frame.dim else u
    tau = np.trace(objective.target_states.conj().T @ cols)
    return float(abs(tau) ** 2 / 4)


# resonant pulse sequences ----------------------------------------------


@dataclass
class PulseStep:
    spin: int
    frequency: float
    rotation: float  # rotation angle in the two-level subspace
    sign: float  # envelope sign (-1 reverses the rotation axis)
    source: int  # config index the pulse acts on
    target: int
    coupling: float  # |<target|D|source>|


@dataclass
class ResonantSequence:
    schedule: PulseSchedule
    steps: list
    rwa_unitary: np.ndarray  # interaction-picture prediction
    min_gap: float
    rabi_rate: float


def _flip(c: int, spin: int) -> int:
    return c ^ (1 << spin)


def _energy_gap(h: SpinHamiltonian, a: int, b: int) -> float:
    return h.diagonal[b] - h.diagonal[a]


def rwa_generator(h: SpinHamiltonian, op: np.ndarray, freq: float, phase: float, amp: float, tol: float) -> np.ndarray:
    """Resonant part of amp*cos(2 pi f t + phase)*op in the interaction picture of h."""
    d = h.diagonal
    gap = d[None, :] - d[:, None]  # gap[a, b] = E_b - E_a
    out = np.zeros_like(op)
    # element (b, a) oscillates as exp(2 pi i (E_b - E_a) t)
    up = np.abs(gap.T - freq) < tol
    down = np.abs(gap.T + freq) < tol
    out[up] = 0.5 * amp * op[up] * np.exp(-1j * phase)
    out[down] = 0.5 * amp * op[down] * np.exp(1j * phase)
    return out


def _loop_candidates(h: SpinHamiltonian, channels):
    n = h.n
    ops = [ch.operator(n) for ch in channels]
    dim = 2**n
    full = dim - 1
    for a, c, b in permutations(range(3)):
        e_a = _flip(0, a)
        e_b = _flip(e_a, c)
        chain = [(a, 0, e_a), (c, e_a, e_b), (b, e_b, full)]
        gaps, safe, steps = [], [], []
        for spin, src, dst in chain:
            f = abs(_energy_gap(h, src, dst))
            g = abs(ops[spin][dst, src])
            others = {abs(_energy_gap(h, x, _flip(x, spin))) for x in range(dim)}
            gaps.append(min([2 * f] + [abs(f - o) for o in others if abs(f - o) > 1e-15]))
            # off-resonant elements are driven by the same amplitude, so a weak
            # resonant element forces proportionally stronger stray driving
            peak = np.abs(ops[spin]).max()
            safe.append(gaps[-1] * g / peak if peak > 0 else 0.0)
            steps.append((spin, src, dst, f, g))
        yield min(safe), min(gaps), steps


def _resolved_loop(h, channels, loop, rabi_rate):
    cands = list(_loop_candidates(h, channels))
    if loop is not None:
        cands = [c for c in cands if tuple(s[0] for s in c[2]) == tuple(loop)]
        if not cands:
            raise ValueError(f"{loop} is not a valid (a, c, b) loop")
    safe, gap, steps = max(cands, key=lambda c: c[0])
    if safe == 0:
        raise UnresolvableTransitions("a loop transition has zero drive matrix element")
    if rabi_rate is None:
        rabi_rate = safe / 100
    if gap < 50 * rabi_rate:
        raise UnresolvableTransitions(f"min spectral gap {gap:.4g} GHz < 50 x rabi rate {rabi_rate:.4g} GHz")
    return gap, steps, rabi_rate


def _build_sequence(h, channels, plan, rabi_rate, dt, gap):
    """plan: list of (spin, src, dst, freq, coupling, rotation, sign, phase_offset)."""
    n = h.n
    channels = [DriveChannel(ch.spin, ch.weights, []) for ch in channels]
    durations = [rot / (2 * np.pi * rabi_rate) for *_, rot, _, _ in plan]
    f_max = max([p[3] for p in plan] + [float(np.ptp(h.diagonal))])
    if dt is None:
        dt = 1.0 / (20.0 * f_max)
    # quantize each pulse to whole steps, adjusting amplitude to keep the area
    nsteps = [max(1, int(np.ceil(d / dt))) for d in durations]
    times = np.linspace(0.0, sum(nsteps) * dt, sum(nsteps) + 1)
    env = np.zeros((times.size, len(channels)))
    steps, u_rwa = [], np.eye(2**n, dtype=complex)
    k0 = 0
    ops = [ch.operator(n) for ch in channels]
    for (spin, src, dst, f, g, rot, sign, phase), ns in zip(plan, nsteps):
        ch = channels[spin]
        if not any(abs(c[0] - f) < 1e-15 and abs(c[1] - phase) < 1e-15 for c in ch.carriers):
            if ch.carriers:
                # one carrier per channel; a second tone would need its own envelope
                if abs(ch.carriers[0][0] - f) > 1e-15:
                    raise ValueError("a channel can only carry one resonant tone in a sequence")
            else:
                ch.carriers.append((f, phase))
        amp = rot / (2 * np.pi * g * ns * dt)
        env[k0 : k0 + ns, spin] = sign * amp
        gen = rwa_generator(h, ops[spin], f, ch.carriers[0][1], sign * amp, gap / 4)
        u_rwa = expm(-2j * np.pi * gen * ns * dt) @ u_rwa
        steps.append(PulseStep(spin, f, rot, sign, src, dst, g))
        k0 += ns
    return PulseSchedule(times, env, channels), steps, u_rwa


def three_pi_sequence(
    h_static: SpinHamiltonian,
    a_matrix,
    rabi_rate: float | None = None,
    *,
    loop=None,
    dt: float | None = None,
    include_self_term: bool = False,
) -> ResonantSequence:
    """Three resonant pi pulses carrying |up...up> to |down...down> one spin at a time.

    ``loop = (a, c, b)`` fixes the spins: a and b flip with the other two
    spins aligned, c with them anti-aligned. By default the loop with the
    best resolved transitions is used. ``rabi_rate`` defaults to a hundredth
    of the smallest gap, reduced by the ratio of resonant to strongest
    matrix element of the driven channel.
    """
    channels = drive_channels(a_matrix, include_self_term)
    gap, steps, rabi_rate = _resolved_loop(h_static, channels, loop, rabi_rate)
    plan = [(s, src, dst, f, g, np.pi, 1.0, 0.0) for s, src, dst, f, g in steps]
    sched, psteps, u = _build_sequence(h_static, channels, plan, rabi_rate, dt, gap)
    return ResonantSequence(sched, psteps, u, gap, rabi_rate)


def sequence_arbitrary_theta(
    h_static: SpinHamiltonian,
    a_matrix,
    theta: float,
    rabi_rate: float | None = None,
    *,
    loop=None,
    dt: float | None = None,
    include_self_term: bool = False,
) -> ResonantSequence:
    """R_X(theta) from a pi/2 and a pi pulse, a rotation by theta on the third
    loop transition, and the first two pulses undone in reverse order.

    The first two pulses leave each X sector in an equal superposition of the
    two levels joined by the third transition. Its drive has opposite sign in
    the two sectors, so the rotation imprints opposite phases on them.
    """
    channels = drive_channels(a_matrix, include_self_term)
    gap, steps, rabi_rate = _resolved_loop(h_static, channels, loop, rabi_rate)
    (sa, a0, a1, fa, ga), (sc, c0, c1, fc, gc), (sb, b0, b1, fb, gb) = steps
    frame = LogicalFrame(h_static.n)
    objective = GateObjective.rotation_x(theta, frame)
    best = None
    rot = abs(theta)
    # the phase of the middle tone fixes its rotation axis; pick the one that
    # leaves the prepared superposition an eigenstate
    for phase3 in (0.0, np.pi / 2, np.pi, 3 * np.pi / 2):
        plan = [
            (sa, a0, a1, fa, ga, np.pi / 2, 1.0, 0.0),
            (sc, c0, c1, fc, gc, np.pi, 1.0, 0.0),
            (sb, b0, b1, fb, gb, rot, 1.0, phase3),
            (sc, c1, c0, fc, gc, np.pi, -1.0, 0.0),
            (sa, a1, a0, fa, ga, np.pi / 2, -1.0, 0.0),
        ]
        if rot == 0:
            plan.pop(2)
        sched, psteps, u = _build_sequence(h_static, channels, plan, rabi_rate, dt, gap)
        f = gate_fidelity(u, objective)
        if best is None or f > best[0]:
            best = (f, sched, psteps, u)
        if rot == 0:
            break
    _, sched, psteps, u = best
    return ResonantSequence(sched, psteps, u, gap, rabi_rate)


# Krotov ------------------------------------------------------------------


def blackman_flank_shape(times: np.ndarray, flank: float = 0.05) -> np.ndarray:
    """Update shape: 1 in the middle, Blackman rise/fall over ``flank`` of T, 0 at both ends."""
    t = np.asarray(times, dtype=float)
    t0, t1 = t[0], t[-1]
    w = flank * (t1 - t0)
    s = np.ones_like(t)

    def rise(x):  # x in [0, 1]
        return 0.42 - 0.5 * np.cos(np.pi * x) + 0.08 * np.cos(2 * np.pi * x)

    lo = t < t0 + w
    hi = t > t1 - w
    s[lo] = rise((t[lo] - t0) / w)
    s[hi] = rise((t1 - t[hi]) / w)
    s[0] = s[-1] = 0.0
    return np.clip(s, 0.0, 1.0)


def krotov_guess(
    h_static: SpinHamiltonian,
    a_matrix,
    duration: float = 5000.0,
    nsteps: int = 5000,
    amplitude: float = 1e-3,
    flank: float = 0.05,
    include_self_term: bool = False,
) -> PulseSchedule:
    """Small flat envelope on every spin, with both conditional tones of that spin."""
    from .dynamics import transition_spectrum

    channels = drive_channels(a_matrix, include_self_term)
    spec = transition_spectrum(h_static.couplings)
    for ch in channels:
        ch.carriers = [(t.frequency, 0.0) for t in spec if t.spin == ch.spin]
    times = np.linspace(0.0, duration, nsteps + 1)
    shape = blackman_flank_shape(times, flank)
    env = amplitude * np.repeat(shape[:, None], len(channels), axis=1)
    return PulseSchedule(times, env, channels)


@dataclass
class KrotovResult:
    schedule: PulseSchedule
    fidelities: list
    lambda_a: float
    iterations: int
    max_iterations_reached: bool
    objective: GateObjective
    final_states: np.ndarray  # (dim, 2) images of the logical basis

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelities[-1]


def krotov_optimize(
    objective: GateObjective,
    initial: PulseSchedule,
    h_static: SpinHamiltonian,
    lambda_a: float = 0.5,
    n_iter: int = 500,
    *,
    shape: np.ndarray | None = None,
    flank: float = 0.05,
    monotonic_tol: float = 1e-10,
    target_infidelity: float | None = None,
) -> KrotovResult:
    """First-order Krotov optimization of the channel envelopes.

    Co-states start from chi(T) = tau/N^2 |target> (square-modulus
    functional) and run backward under the old pulses; envelopes are updated
    sequentially during the forward pass by
    dM(t) = S(t)/lambda_a * Im sum_k <chi_k(t)| dH/dM |psi_k(t)>.
    """
    if n_iter < 0:
        raise ValueError("n_iter must be non-negative")
    if lambda_a <= 0:
        raise ValueError("lambda_a must be positive")
    if initial.dt > max_dt(h_static, initial) * (1 + 1e-12):
        raise StepTooLarge("time step too coarse for the carriers")
    sched = initial.copy()
    if shape is None:
        shape = blackman_flank_shape(sched.times, flank)
    step_shape = np.ascontiguousarray(shape[:-1], dtype=float)
    h0 = h_static.matrix
    ops = _ops(h_static, sched.channels)
    carr = np.ascontiguousarray(sched.carrier_matrix(), dtype=float)
    env = np.ascontiguousarray(sched.envelopes[:-1], dtype=float)
    psi0 = np.ascontiguousarray(objective.initial_states)
    tgt = objective.target_states
    n_obj = psi0.shape[1]

    psi_t, us = _kernels.forward_store(h0, ops, carr, env, sched.dt, psi0)
    fids = [gate_fidelity(psi_t, objective)]
    it = 0
    for it in range(1, n_iter + 1):
        tau = np.trace(tgt.conj().T @ psi_t)
        chi_t = np.ascontiguousarray(tau / n_obj**2 * tgt)
        psi_t = _kernels.krotov_sweep(h0, ops, carr, env, step_shape, lambda_a, sched.dt, psi0, chi_t, us)
        fids.append(gate_fidelity(psi_t, objective))
        if fids[-1] < fids[-2] - monotonic_tol:
            raise MonotonicityViolation(
                f"fidelity dropped from {fids[-2]:.12f} to {fids[-1]:.12f} at iteration {it}"
            )
        if target_infidelity is not None and 1 - fids[-1] < target_infidelity:
            break
    if it > 0:
        sched.envelopes[:-1] = env
        sched.envelopes[-1] = 0.0
    return KrotovResult(sched, fids, lambda_a, it, it == n_iter, objective, psi_t)


@dataclass
class GateTraces:
    times: np.ndarray
    theta: np.ndarray  # unwrapped phi_- - phi_+
    weight: np.ndarray  # population of the logical subspace
    alpha_plus: np.ndarray
    alpha_minus: np.ndarray
    trajectory: Trajectory


def gate_traces(
    h_static: SpinHamiltonian,
    schedule: PulseSchedule,
    psi0=None,
    *,
    frame: LogicalFrame | None = None,
    sample_every: float | None = None,
) -> GateTraces:
    """Relative angle and logical weight along a pulse, starting from |0_L> by default."""
    frame = frame or LogicalFrame(h_static.n)
    psi0 = frame.zero if psi0 is None else np.asarray(psi0, complex)
    traj = propagate(h_static, schedule, psi0, sample_every=sample_every)
    dec = [logical_decompose(s, frame) for s in traj.states]
    return GateTraces(
        traj.times,
        relative_angle(traj.states, frame),
        np.array([d.weight for d in dec]),
        np.array([d.alpha_plus for d in dec]),
        np.array([d.alpha_minus for d in dec]),
        traj,
    )


def wrapped_error(angle: float, target: float) -> float:
    """Distance between two angles on the circle."""
    return float(abs(np.angle(np.exp(1j * (angle - target)))))
