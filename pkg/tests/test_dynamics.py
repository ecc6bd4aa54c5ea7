import numpy as np
import pytest
from scipy.linalg import expm
from scipy.optimize import curve_fit

from isene.dynamics import (
    SX,
    SY,
    SZ,
    DriveChannel,
    FrameError,
    LogicalFrame,
    PulseSchedule,
    StepTooLarge,
    SymmetryViolation,
    drive_channels,
    global_flip,
    local_op,
    logical_decompose,
    propagate,
    relative_angle,
    schedule_unitary,
    sector_basis,
    static_hamiltonian,
    transition_spectrum,
    x_symmetry_report,
)


def test_local_op_ordering():
    # spin 0 is the least significant bit of the config index
    op = local_op(SX, 0, 3)
    e = np.zeros(8)
    e[0] = 1
    assert np.argmax(np.abs(op @ e)) == 1
    assert np.allclose(global_flip(3) @ e, np.eye(8)[7])


def test_static_hamiltonian_diagonal():
    j = np.array([[0, 0.003, 1e-5], [0, 0, 0.002], [0, 0, 0]])
    h = static_hamiltonian(j)
    assert h.energy(0) == pytest.approx(0.003 + 1e-5 + 0.002)
    # spin 1 flipped: sigma = (+, -, +)
    assert h.energy(2) == pytest.approx(-0.003 + 1e-5 - 0.002)
    assert np.allclose(h.diagonal, h.diagonal[::-1])


def test_transition_spectrum_values():
    j = {(0, 1): 0.003, (1, 2): 0.002, (0, 2): 1e-5}
    h = static_hamiltonian(j, 3)
    for t in transition_spectrum(j):
        for a, b in t.configs:
            assert abs(h.energy(b) - h.energy(a)) == pytest.approx(t.frequency, abs=1e-15)
    with pytest.warns(UserWarning):
        transition_spectrum({(0, 1): 0.003, (1, 2): 0.0, (0, 2): 0.0}, resolve=1e-6)


def _random_hamiltonian(rng):
    j = np.triu(rng.uniform(-5e-3, 5e-3, (3, 3)), 1)
    a = rng.uniform(-0.03, 0.03, (3, 3))
    return static_hamiltonian(j), a


def test_x_symmetry_random_drives(rng):
    x = global_flip(3)
    worst = 0.0
    for _ in range(100):
        h, a = _random_hamiltonian(rng)
        chans = drive_channels(a, include_self_term=bool(rng.integers(2)))
        m = rng.normal(size=3) * 1e-3
        ht = h.matrix + sum(mk * ch.operator(3) for mk, ch in zip(m, chans))
        worst = max(worst, np.linalg.norm(x @ ht - ht @ x, 2))
        rep = x_symmetry_report(h, chans)
        assert rep.passed()
        assert rep.static_sector_mismatch < 1e-15
        # each drive acts with opposite sign in the two X sectors
        assert max(rep.drive_sector_antisymmetry) < 1e-15
    assert worst < 1e-12


def test_symmetry_violation_detected():
    h = static_hamiltonian(np.zeros((3, 3)))
    with pytest.raises(SymmetryViolation):
        x_symmetry_report(h, [local_op(SZ, 0, 3)])


def test_sector_basis_orthonormal():
    p, m = sector_basis(3)
    b = np.hstack([p, m])
    assert np.allclose(b.conj().T @ b, np.eye(8))
    x = global_flip(3)
    assert np.allclose(x @ p, p)
    assert np.allclose(x @ m, -m)


def test_propagator_matches_expm(rng):
    h, a = _random_hamiltonian(rng)
    chans = drive_channels(a)
    for ch, f in zip(chans, (0.004, 0.006, 0.009)):
        ch.carriers = [(f, 0.3)]
    times = np.linspace(0, 200.0, 201)
    env = rng.normal(size=(201, 3)) * 0.05
    sched = PulseSchedule(times, env, chans)
    u = np.eye(8, dtype=complex)
    for k, tm in enumerate(sched.midpoints()):
        hk = h.matrix + sum(env[k, c] * ch.carrier(tm) * ch.operator(3) for c, ch in enumerate(chans))
        u = expm(-2j * np.pi * hk * sched.dt) @ u
    assert np.allclose(schedule_unitary(h, sched), u, atol=1e-12)
    psi0 = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi0 /= np.linalg.norm(psi0)
    traj = propagate(h, sched, psi0, sample_every=sched.dt)
    assert np.allclose(traj.final, u @ psi0, atol=1e-12)
    assert traj.times[-1] == times[-1]


def test_norm_drift_over_five_microseconds(ref_ham, ref_a):
    chans = drive_channels(ref_a)
    for ch, t in zip(chans, transition_spectrum(ref_ham.couplings)[::2]):
        ch.carriers = [(t.frequency, 0.0)]
    times = np.linspace(0, 5000.0, 5001)
    env = np.full((5001, 3), 5e-3)
    sched = PulseSchedule(times, env, chans)
    psi0 = np.full(8, 1 / np.sqrt(8), complex)
    traj = propagate(ref_ham, sched, psi0, sample_every=10.0)
    drift = np.abs(np.linalg.norm(traj.states, axis=1) - 1)
    assert drift.max() < 1e-9


def test_step_too_large(ref_ham, ref_a):
    chans = drive_channels(ref_a)
    chans[0].carriers = [(0.5, 0.0)]
    sched = PulseSchedule(np.linspace(0, 10, 3), np.zeros((3, 3)), chans)
    with pytest.raises(StepTooLarge):
        propagate(ref_ham, sched, np.eye(8)[0])


def test_isolated_rabi_rate(ref_ham, ref_a):
    # spin 3 flipped out of |uuu>: a two-level problem driven through row 3 of A
    spin, src, dst = 2, 0, 4
    f = ref_ham.energy(dst) - ref_ham.energy(src)
    others = [t.frequency for t in transition_spectrum(ref_ham.couplings) if t.spin == spin]
    gap = min(abs(f - o) for o in others if abs(abs(f) - o) > 1e-12)
    g = abs(ref_a[2, 0] + ref_a[2, 1])
    ch = DriveChannel(spin, drive_channels(ref_a)[spin].weights, [(abs(f), 0.0)])
    assert abs(ch.operator(3)[dst, src]) == pytest.approx(g, rel=1e-12)
    rabi = gap / 50
    amp = rabi / g
    period = 1 / rabi
    dt = 1 / (20 * np.ptp(ref_ham.diagonal))
    k = int(np.ceil(1.2 * period / dt))
    times = np.arange(k + 1) * dt
    sched = PulseSchedule(times, np.full((k + 1, 1), amp), [ch])
    traj = propagate(ref_ham, sched, np.eye(8)[src], sample_every=period / 200)
    p = np.abs(traj.states[:, dst]) ** 2
    (fit,), _ = curve_fit(lambda t, r: np.sin(np.pi * r * t) ** 2, traj.times, p, p0=[rabi])
    assert fit == pytest.approx(amp * g, rel=0.02)


def test_logical_frame_helpers():
    fr = LogicalFrame(3)
    psi = fr.encode(np.cos(0.3), -1j * np.sin(0.3))
    d = logical_decompose(psi, fr)
    assert d.weight == pytest.approx(1.0)
    assert np.angle(np.exp(1j * (d.phi_minus - d.phi_plus))) == pytest.approx(0.6)
    assert relative_angle([psi], fr)[0] == pytest.approx(0.6)
    assert fr.error_labels()[1] == (2, 5)
    assert np.allclose(fr.projector @ fr.plus, fr.plus)


def test_frame_validation(ref_ham):
    ferro = static_hamiltonian(-np.abs(ref_ham.couplings))
    LogicalFrame(3).validate(ferro)
    with pytest.raises(FrameError):
        LogicalFrame(3).validate(ref_ham)


def test_self_term_commutes():
    a = np.diag([0.1, 0.2, 0.3])
    ch = drive_channels(a, include_self_term=True)[1]
    op = ch.operator(3)
    assert np.allclose(op, 0.2 * local_op(SY @ SZ, 1, 3))
