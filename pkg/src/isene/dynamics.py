"""Spin Hamiltonian, EDSR drive channels and lab-frame time evolution.

Basis states are ordered by ``SpinConfig.index``: bit h of the index is the
state of spin h (0 = up, sigma_z = +1). Energies are GHz, times ns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from . import _kernels
from .circuit import spin_table

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID2 = np.eye(2, dtype=complex)


class StepTooLarge(ValueError):
    pass


class SymmetryViolation(ValueError):
    pass


class FrameError(ValueError):
    pass


def local_op(op: np.ndarray, j: int, n: int) -> np.ndarray:
    """``op`` acting on spin j (0-based) of n spins; spin 0 is the lowest bit."""
    out = np.eye(1, dtype=complex)
    for h in reversed(range(n)):
        out = np.kron(out, op if h == j else ID2)
    return out


def global_flip(n: int) -> np.ndarray:
    """X = prod_h sigma_x^(h)."""
    out = np.eye(1, dtype=complex)
    for _ in range(n):
        out = np.kron(out, SX)
    return out


def _coupling_matrix(j, n=None) -> np.ndarray:
    if isinstance(j, dict):
        n = n or 1 + max(max(k) for k in j)
        m = np.zeros((n, n))
        for (a, b), v in j.items():
            m[a, b] = m[b, a] = v
        return m
    m = np.asarray(j, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("couplings must be a square matrix or a {(h, j): J} mapping")
    upper, lower = np.triu(m, 1), np.tril(m, -1)
    if not lower.any() or not upper.any():
        # one triangle given
        m = upper + lower
        return m + m.T
    if not np.allclose(m, m.T, rtol=1e-12, atol=0):
        raise ValueError("coupling matrix is neither symmetric nor triangular")
    return 0.5 * (m + m.T) - np.diag(np.diag(m))


@dataclass
class SpinHamiltonian:
    """Diagonal static Hamiltonian sum_{h<j} J_hj s_h s_j (plus optional offset)."""

    couplings: np.ndarray
    diagonal: np.ndarray

    @property
    def n(self) -> int:
        return self.couplings.shape[0]

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diagonal).astype(complex)

    def energy(self, index: int) -> float:
        return float(self.diagonal[index])


def static_hamiltonian(j, n: int | None = None, offset: float = 0.0) -> SpinHamiltonian:
    m = _coupling_matrix(j, n)
    sig = spin_table(m.shape[0])
    diag = np.einsum("ch,hk,ck->c", sig, np.triu(m, 1), sig) + offset
    return SpinHamiltonian(m, diag)


@dataclass
class Transition:
    spin: int
    frequency: float  # GHz, non-negative
    others_aligned: bool
    configs: list  # (lower-index config, flipped config) pairs


def transition_spectrum(j, resolve: float = 0.0) -> list[Transition]:
    """Two conditional flip frequencies per spin of a three-spin chain.

    Spin j flips at |2(J_jk + J_jl)| when the other two spins are aligned and
    at |2(J_jk - J_jl)| when they are anti-aligned. Warns when two
    frequencies of the same spin lie within ``resolve`` of each other.
    """
    m = _coupling_matrix(j)
    if m.shape[0] != 3:
        raise ValueError("transition_spectrum is defined for three spins")
    sig = spin_table(3)
    out = []
    for s in range(3):
        k, l = [h for h in range(3) if h != s]
        for aligned, f in ((True, 2 * (m[s, k] + m[s, l])), (False, 2 * (m[s, k] - m[s, l]))):
            pairs = []
            for c in range(8):
                if sig[c, s] > 0 and (sig[c, k] == sig[c, l]) == aligned:
                    pairs.append((c, c ^ (1 << s)))
            out.append(Transition(s, abs(f), aligned, pairs))
    freqs = [t.frequency for t in out]
    for a, b in combinations(range(len(out)), 2):
        if out[a].spin == out[b].spin and abs(freqs[a] - freqs[b]) <= resolve:
            warnings.warn(
                f"spin {out[a].spin + 1}: transition frequencies {freqs[a]:.6g} and {freqs[b]:.6g} GHz"
                " are not resolvable",
                stacklevel=2,
            )
    return out


def transition_frequency(j, spin: int, others_aligned: bool) -> float:
    for t in transition_spectrum(j):
        if t.spin == spin and t.others_aligned == others_aligned:
            return t.frequency
    raise KeyError((spin, others_aligned))


@dataclass
class DriveChannel:
    """EDSR drive on one spin: M(t) * sum_f a_f cos(2 pi f t + phi_f) * sigma_y^(j) sum_k w_k sigma_z^(k)."""

    spin: int
    weights: np.ndarray
    carriers: list = field(default_factory=list)  # (freq GHz, phase rad, relative amplitude)

    def operator(self, n: int) -> np.ndarray:
        w = np.asarray(self.weights, dtype=float)
        z = sum((w[k] * local_op(SZ, k, n) for k in range(n) if w[k] != 0.0), np.zeros((2**n, 2**n), complex))
        return local_op(SY, self.spin, n) @ z

    def carrier(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if not self.carriers:
            return np.ones_like(t)
        out = np.zeros_like(t)
        for c in self.carriers:
            f, phase = c[0], c[1]
            amp = c[2] if len(c) > 2 else 1.0
            out += amp * np.cos(2 * np.pi * f * t + phase)
        return out

    @property
    def max_frequency(self) -> float:
        return max((c[0] for c in self.carriers), default=0.0)


def drive_channels(a_matrix, include_self_term: bool = False) -> list[DriveChannel]:
    """One channel per spin from an A matrix (row j = weights of the drop across junction j)."""
    a = np.asarray(a_matrix, dtype=float)
    chans = []
    for j in range(a.shape[0]):
        w = a[j].copy()
        if not include_self_term:
            w[j] = 0.0
        chans.append(DriveChannel(j, w))
    return chans


@dataclass
class PulseSchedule:
    """Envelopes on a uniform time grid.

    ``envelopes[k, c]`` drives channel c during step k (t_k to t_{k+1}); the
    carrier is evaluated at the step midpoint. The last row belongs to t = T
    and is never used for propagation, so it only records the pinned endpoint.
    """

    times: np.ndarray  # (K+1,) ns
    envelopes: np.ndarray  # (K+1, n_channels) GHz
    channels: list

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def nsteps(self) -> int:
        return self.times.size - 1

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.times[1:] + self.times[:-1])

    def carrier_matrix(self) -> np.ndarray:
        tm = self.midpoints()
        return np.column_stack([ch.carrier(tm) for ch in self.channels]) if self.channels else np.zeros((tm.size, 0))

    def fields(self) -> np.ndarray:
        return self.envelopes[:-1] * self.carrier_matrix()

    def copy(self) -> "PulseSchedule":
        return PulseSchedule(self.times.copy(), self.envelopes.copy(), list(self.channels))

    @property
    def max_frequency(self) -> float:
        return max((ch.max_frequency for ch in self.channels), default=0.0)


def time_grid(duration: float, dt: float) -> np.ndarray:
    k = int(np.ceil(duration / dt - 1e-9))
    return np.linspace(0.0, k * dt, k + 1)


def max_dt(h_static: SpinHamiltonian, schedule: PulseSchedule) -> float:
    gap = float(np.ptp(h_static.diagonal)) if h_static.diagonal.size else 0.0
    f_max = max(gap, schedule.max_frequency)
    return np.inf if f_max == 0 else 1.0 / (20.0 * f_max)


def _ops(h_static: SpinHamiltonian, channels) -> np.ndarray:
    n = h_static.n
    if not channels:
        return np.zeros((0, 2**n, 2**n), complex)
    return np.array([ch.operator(n) for ch in channels])


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_samples, dim) for one state or (n_samples, dim, m)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def propagate(
    h_static: SpinHamiltonian,
    schedule: PulseSchedule,
    psi0,
    *,
    sample_every: float | None = None,
    check_dt: bool = True,
) -> Trajectory:
    """Piecewise-constant lab-frame propagation of one state or a column stack.

    Samples are taken every ``max(dt, sample_every)`` (default T/5000).
    """
    if check_dt and schedule.dt > max_dt(h_static, schedule) * (1 + 1e-12):
        raise StepTooLarge(f"dt = {schedule.dt} ns exceeds 1/(20 f_max) = {max_dt(h_static, schedule)} ns")
    psi0 = np.asarray(psi0, dtype=complex)
    single = psi0.ndim == 1
    cols = psi0[:, None] if single else psi0
    if sample_every is None:
        sample_every = schedule.duration / 5000
    stride = max(1, int(round(max(sample_every, schedule.dt) / schedule.dt)))
    fields = np.ascontiguousarray(schedule.fields(), dtype=float)
    out = _kernels.propagate(
        h_static.matrix, _ops(h_static, schedule.channels), fields, schedule.dt, np.ascontiguousarray(cols), stride
    )
    idx = np.arange(0, schedule.nsteps + 1, stride)
    if idx[-1] != schedule.nsteps:
        idx = np.append(idx, schedule.nsteps)
    states = out[:, :, 0] if single else out
    return Trajectory(schedule.times[idx], states)


def schedule_unitary(h_static: SpinHamiltonian, schedule: PulseSchedule, *, check_dt: bool = True) -> np.ndarray:
    if check_dt and schedule.dt > max_dt(h_static, schedule) * (1 + 1e-12):
        raise StepTooLarge(f"dt = {schedule.dt} ns exceeds 1/(20 f_max)")
    fields = np.ascontiguousarray(schedule.fields(), dtype=float)
    return _kernels.total_unitary(h_static.matrix, _ops(h_static, schedule.channels), fields, schedule.dt)


# logical frame -----------------------------------------------------------


@dataclass
class LogicalFrame:
    n: int = 3

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def zero(self) -> np.ndarray:
        v = np.zeros(self.dim, complex)
        v[0] = 1.0
        return v

    @property
    def one(self) -> np.ndarray:
        v = np.zeros(self.dim, complex)
        v[-1] = 1.0
        return v

    @property
    def plus(self) -> np.ndarray:
        return (self.zero + self.one) / np.sqrt(2)

    @property
    def minus(self) -> np.ndarray:
        return (self.zero - self.one) / np.sqrt(2)

    @property
    def basis(self) -> np.ndarray:
        """(dim, 2) columns |0_L>, |1_L>."""
        return np.column_stack([self.zero, self.one])

    @property
    def projector(self) -> np.ndarray:
        b = self.basis
        return b @ b.conj().T

    def encode(self, alpha, beta) -> np.ndarray:
        return alpha * self.zero + beta * self.one

    def error_labels(self) -> dict:
        """Error-manifold label (flipped spin, 0-based) -> the two config indices."""
        return {j: (1 << j, (self.dim - 1) ^ (1 << j)) for j in range(self.n)}

    def validate(self, h_static: SpinHamiltonian, atol: float = 1e-12):
        """Raise FrameError unless the logical pair is the degenerate ground doublet."""
        d = h_static.diagonal
        e0, e1 = d[0], d[-1]
        others = np.delete(d, [0, self.dim - 1])
        if abs(e0 - e1) > atol or (others.size and others.min() <= max(e0, e1) + atol):
            raise FrameError("logical pair is not the lowest degenerate doublet (coupling not ferromagnetic)")


@dataclass
class LogicalDecomposition:
    alpha_plus: float
    phi_plus: float
    alpha_minus: float
    phi_minus: float
    beta: np.ndarray
    weight: float


def logical_decompose(psi, frame: LogicalFrame | None = None) -> LogicalDecomposition:
    frame = frame or LogicalFrame(int(round(np.log2(len(psi)))))
    psi = np.asarray(psi, dtype=complex)
    cp = np.vdot(frame.plus, psi)
    cm = np.vdot(frame.minus, psi)
    beta = np.delete(psi, [0, frame.dim - 1])
    return LogicalDecomposition(abs(cp), float(np.angle(cp)), abs(cm), float(np.angle(cm)), beta, abs(cp) ** 2 + abs(cm) ** 2)


def relative_angle(states, frame: LogicalFrame | None = None) -> np.ndarray:
    """Unwrapped phi_- - phi_+ along a trajectory (equals theta for R_X(theta) = exp(-i theta X/2))."""
    frame = frame or LogicalFrame(int(round(np.log2(np.shape(states)[-1]))))
    states = np.asarray(states)
    cp = states @ frame.plus.conj()
    cm = states @ frame.minus.conj()
    return np.unwrap(np.angle(cm) - np.angle(cp))


# X symmetry ---------------------------------------------------------------


def sector_basis(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of the X = +1 and X = -1 sectors.

    Representatives have spin 1 up. For odd n the minus-sector states carry
    the sign prod_{h>1} sigma_h, a gauge in which every single-flip drive
    element is exactly opposite in the two sectors.
    """
    dim = 2**n
    sig = spin_table(n)
    reps = [c for c in range(dim) if sig[c, 0] > 0]
    plus = np.zeros((dim, len(reps)), complex)
    minus = np.zeros((dim, len(reps)), complex)
    for col, c in enumerate(reps):
        partner = (dim - 1) ^ c
        sign = np.prod(sig[c, 1:]) if n % 2 else 1.0
        plus[c, col] = plus[partner, col] = 1 / np.sqrt(2)
        minus[c, col] = sign / np.sqrt(2)
        minus[partner, col] = -sign / np.sqrt(2)
    return plus, minus


@dataclass
class SymmetryReport:
    static_commutator: float
    drive_commutators: list
    static_sector_mismatch: float
    drive_sector_antisymmetry: list

    def passed(self, tol: float = 1e-12) -> bool:
        return max([self.static_commutator, *self.drive_commutators]) < tol


def x_symmetry_report(h_static, channels: Sequence[DriveChannel] = (), tol: float = 1e-12) -> SymmetryReport:
    """Commutators with X and the sector blocks; raises SymmetryViolation above ``tol``."""
    h = h_static.matrix if isinstance(h_static, SpinHamiltonian) else np.asarray(h_static, complex)
    n = int(round(np.log2(h.shape[0])))
    x = global_flip(n)
    comm = lambda a: float(np.linalg.norm(x @ a - a @ x, 2))  # noqa: E731
    c0 = comm(h)
    ops = [ch.operator(n) if isinstance(ch, DriveChannel) else np.asarray(ch) for ch in channels]
    cd = [comm(op) for op in ops]
    if c0 > tol:
        raise SymmetryViolation(f"static Hamiltonian: ||[X, H]|| = {c0:.3e}")
    for j, c in enumerate(cd):
        if c > tol:
            raise SymmetryViolation(f"drive channel {j}: ||[X, H_d]|| = {c:.3e}")
    p, m = sector_basis(n)
    hp, hm = p.conj().T @ h @ p, m.conj().T @ h @ m
    anti = [float(np.linalg.norm(p.conj().T @ op @ p + m.conj().T @ op @ m)) for op in ops]
    return SymmetryReport(c0, cd, float(np.linalg.norm(hp - hm)), anti)
