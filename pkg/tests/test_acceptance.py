"""Acceptance checks, one test per criterion.

Each test records a PASS/FAIL line with the measured numbers; the lines are
printed together at the end of the pytest run (see conftest.py). Running this
file directly does the same for just these checks.
"""

import copy
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest
from scipy.optimize import curve_fit

from isene import cli
from isene.circuit import SpinConfig, all_configs, reference_circuit
from isene.config import example_config_text, parse_config
from isene.control import (
    GateObjective,
    gate_fidelity,
    gate_traces,
    krotov_guess,
    krotov_optimize,
    three_pi_sequence,
    wrapped_error,
)
from isene.dynamics import (
    DriveChannel,
    PulseSchedule,
    drive_channels,
    global_flip,
    propagate,
    schedule_unitary,
    static_hamiltonian,
    transition_spectrum,
)
from isene.equilibrium import solve_all, solve_equilibrium
from isene.extraction import effective_model, extract_dispersive, extract_ising, scan_2d
from isene.gates import (
    Corrector,
    FluxTrajectory,
    SyndromeModel,
    classify_syndrome,
    correct_cycle,
    inject_error,
    rz_phase,
    rzz_phase,
    rzz_phase_simulated,
    syndrome_of,
)
from isene.resonator import (
    TransmissionLine,
    calibrate_length,
    readout_table,
    resonance_frequency,
)

sys.path.insert(0, os.path.dirname(__file__))
from oracles import grid_minimum, potential3  # noqa: E402
from test_circuit import random_circuit  # noqa: E402

RESULTS = {}

WIDE = (1e-5, 3.3e-3)  # line length bounds that reach 9 GHz at 5/5 nH
GRID = [1.0, 2.0, 3.0, 5.0, 7.0, 10.0]


def record(n, ok, detail):
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


@pytest.fixture(scope="module")
def ref():
    circ = reference_circuit()
    model = effective_model(circ)
    e_ls = np.array([s.inductive_energy for s in solve_all(circ)])
    line = TransmissionLine()
    line = line.with_length(calibrate_length(e_ls, line, 9.0, bounds=WIDE))
    return circ, static_hamiltonian(model.ising.couplings), model.edsr.matrix, line


def test_criterion_01_kramers_nulls(ref):
    circ, _, _, line = ref
    worst = 0.0
    for fl in ((0.0,) * 3, (np.pi,) * 3):
        c = circ.with_fluxes(fl)
        sols = solve_all(c)
        worst = max(
            worst,
            extract_ising(c, solutions=sols).walsh.max_odd() * 1e3,
            extract_dispersive(c, line, solutions=sols).walsh.max_odd() * 1e3,
        )
    off = circ.with_fluxes((0.1, 0.0, 0.0))
    sols = solve_all(off)
    broken = max(
        extract_ising(off, allow_off_kramers=True, solutions=sols).walsh.max_odd() * 1e3,
        extract_dispersive(off, line, allow_off_kramers=True, solutions=sols).walsh.max_odd() * 1e3,
    )
    record(1, worst < 1e-6 and broken > 1e-6, f"max odd at 0/pi = {worst:.2e} MHz, with 0.1 rad = {broken:.2e} MHz")


def test_criterion_02_kramers_degeneracy(ref):
    circ = ref[0]
    worst = 0.0
    for fl in ((0.0,) * 3, (np.pi,) * 3):
        e = np.array([s.energy_g for s in solve_all(circ.with_fluxes(fl))])
        worst = max(worst, max(abs(e[c] - e[7 ^ c]) for c in range(8)))
    record(2, worst < 1e-9, f"max |E(s) - E(-s)| = {worst:.2e} GHz")


def test_criterion_03_oracle_equivalence():
    rng = np.random.default_rng(2024)
    e_err = el_err = g_err = 0.0
    for _ in range(3):
        circ, (e0, es, lv, lc, fl) = random_circuit(rng)
        for cfg in all_configs(3):
            sol = solve_equilibrium(circ, cfg)
            _, e_ref = grid_minimum(lambda x: potential3(x, cfg.as_array(), e0, es, lv, lc, fl), 5)
            e_err = max(e_err, abs(sol.energy_g - e_ref))
            h = 1e-3
            p0 = sol.x[0]
            e = [solve_equilibrium(circ, cfg, phi_in=p0 + d, x0=sol.x).energy_g for d in (-h, 0.0, h)]
            fd = (e[0] - 2 * e[1] + e[2]) / h**2
            el_err = max(el_err, abs(sol.inductive_energy - fd) / abs(fd))
            x = rng.uniform(-2, 2, 5)
            g = circ.gradient(x, cfg)
            cd = np.array([(circ.potential_energy(x + 1e-5 * v, cfg) - circ.potential_energy(x - 1e-5 * v, cfg)) / 2e-5 for v in np.eye(5)])
            g_err = max(g_err, np.max(np.abs(g - cd)) / np.max(np.abs(g)))
    ok = e_err < 1e-6 and el_err < 1e-6 and g_err < 1e-6
    record(3, ok, f"energy vs grid {e_err:.1e} GHz, E_L vs FD {el_err:.1e} rel, gradient vs CD {g_err:.1e} rel")


def test_criterion_04_magnitudes():
    circ = reference_circuit()
    res = scan_2d(circ, GRID, GRID, ("J", "chi", "A"))
    v = res.values
    j_ok = (np.abs(v["J12"]) >= 1) & (np.abs(v["J12"]) < 10) & (np.abs(v["J23"]) >= 1) & (np.abs(v["J23"]) < 10)
    chi_ok = (np.abs(v["chi12"]) >= 0.1) & (np.abs(v["chi12"]) <= 1) & (np.abs(v["chi23"]) >= 0.1) & (np.abs(v["chi23"]) <= 1)
    both = j_ok & chi_ok
    i5 = GRID.index(5.0)
    j_ratio = abs(v["J13"][i5, i5] / v["J12"][i5, i5])
    # 9 GHz at 5/5 nH needs a line shorter than 0.1 mm
    at5 = scan_2d(circ, [5.0], [5.0], ("chi",), bounds=WIDE).values
    chi_ratio = abs(at5["chi13"][0, 0] / at5["chi12"][0, 0])
    off = max(np.nanmax(np.abs(v[f"A{j}{k}"])) for j in (1, 2, 3) for k in (1, 2, 3) if j != k)
    pts = [(GRID[i], GRID[k]) for i, k in zip(*np.nonzero(both))]
    ok = bool(both.any()) and j_ratio < 0.5 and chi_ratio < 0.5 and off >= 0.01
    record(
        4,
        ok,
        f"{len(pts)} grid points with J in MHz decade and chi in [0.1, 1] MHz (e.g. Lv/Lc = {pts[0] if pts else None} nH); "
        f"|J13/J12| = {j_ratio:.3f}, |chi13/chi12| = {chi_ratio:.3f} at 5/5 nH; max off-diagonal |A| = {off:.3f}",
    )


def test_criterion_05_resonator():
    line = TransmissionLine(length=1e-3)
    qw = abs(resonance_frequency(1e13, line) / line.quarter_wave - 1)
    circ = reference_circuit(2.0, 10.0)
    e_ls = np.array([s.inductive_energy for s in solve_all(circ)])
    length = calibrate_length(e_ls, TransmissionLine(), 9.0)
    closure = abs(readout_table(e_ls, TransmissionLine(length=length)).reference_frequency - 9.0) * 1e9
    grid = np.linspace(5.0, 500.0, 50)
    f = np.array([resonance_frequency(e, line) for e in grid])
    mono = bool(np.all(np.diff(f) > 0))
    record(5, qw < 1e-9 and closure < 1.0 and mono, f"quarter-wave rel err {qw:.1e}, closure {closure:.1e} Hz, monotone {mono}")


def test_criterion_06_dynamics(ref):
    _, h, a, _ = ref
    rng = np.random.default_rng(7)
    x = global_flip(3)
    comm = 0.0
    for _ in range(100):
        j = np.triu(rng.uniform(-5e-3, 5e-3, (3, 3)), 1)
        aa = rng.uniform(-0.03, 0.03, (3, 3))
        hh = static_hamiltonian(j)
        ht = hh.matrix + sum(m * ch.operator(3) for m, ch in zip(rng.normal(size=3), drive_channels(aa, bool(rng.integers(2)))))
        comm = max(comm, np.linalg.norm(x @ ht - ht @ x, 2))

    chans = drive_channels(a)
    for ch, t in zip(chans, transition_spectrum(h.couplings)[::2]):
        ch.carriers = [(t.frequency, 0.0)]
    times = np.linspace(0, 5000.0, 5001)
    traj = propagate(h, PulseSchedule(times, np.full((5001, 3), 5e-3), chans), np.full(8, 8**-0.5, complex), sample_every=10.0)
    drift = np.max(np.abs(np.linalg.norm(traj.states, axis=1) - 1))

    # spin 3 out of |uuu>; its drive row gives the matrix element A31 + A32
    f = h.energy(4) - h.energy(0)
    others = [t.frequency for t in transition_spectrum(h.couplings) if t.spin == 2]
    gap = min(abs(f - o) for o in others if abs(f - o) > 1e-12)
    g = abs(a[2, 0] + a[2, 1])
    rabi = gap / 50
    amp = rabi / g
    dt = 1 / (20 * np.ptp(h.diagonal))
    k = int(np.ceil(1.2 / rabi / dt))
    ch = DriveChannel(2, chans[2].weights, [(f, 0.0)])
    tr = propagate(h, PulseSchedule(np.arange(k + 1) * dt, np.full((k + 1, 1), amp), [ch]), np.eye(8)[0], sample_every=1 / rabi / 200)
    (fit,), _ = curve_fit(lambda t, r: np.sin(np.pi * r * t) ** 2, tr.times, np.abs(tr.states[:, 4]) ** 2, p0=[rabi])
    rel = abs(fit / (amp * g) - 1)
    record(6, comm < 1e-12 and drift < 1e-9 and rel < 0.02, f"max ||[X, H]|| = {comm:.1e}, norm drift {drift:.1e}, Rabi rel err {rel:.2e}")


def test_criterion_07_three_pi(ref):
    _, h, a, _ = ref
    seq = three_pi_sequence(h, a)
    fid = gate_fidelity(schedule_unitary(h, seq.schedule), GateObjective.rotation_x(np.pi))
    tr = gate_traces(h, seq.schedule)
    record(7, fid > 0.99 and tr.weight[-1] > 0.99, f"R_X(pi) fidelity {fid:.8f}, final W {tr.weight[-1]:.8f}, T = {seq.schedule.duration / 1e3:.0f} us")


def _krotov(args):
    h, a, theta = args
    guess = krotov_guess(h, a, duration=5000.0, nsteps=5000)
    res = krotov_optimize(GateObjective.rotation_x(theta), guess, h, n_iter=500)
    tr = gate_traces(h, res.schedule)
    f = np.array(res.fidelities)
    return theta, float(np.min(np.diff(f))), res.infidelity, tr.theta[-1]


def test_criterion_08_krotov(ref):
    _, h, a, _ = ref
    jobs = [(h, a, th) for th in (np.pi, np.pi / 2, np.pi / 4)]
    workers = min(3, os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            out = list(pool.map(_krotov, jobs))
    else:
        out = [_krotov(j) for j in jobs]
    ok = True
    parts = []
    for theta, worst_step, infid, final in out:
        err = wrapped_error(final, theta)
        ok &= worst_step >= -1e-10 and infid < 1e-3 and err < 1e-2
        parts.append(f"theta={theta:.4f}: 1-F={infid:.1e}, worst step {worst_step:.1e}, angle err {err:.1e}")
    record(8, ok, "; ".join(parts))


def test_criterion_09_rz_rzz(ref):
    circ, h, _, _ = ref
    amp, dur = 0.1, 10.0
    res = rz_phase(circ, FluxTrajectory.square(amp, dur))
    c = circ.with_fluxes((amp, 0.0, 0.0))
    nu = solve_equilibrium(c, SpinConfig((1, 1, 1))).energy_g - solve_equilibrium(c, SpinConfig((-1, -1, -1))).energy_g
    rz_err = abs(res.theta - 2 * np.pi * nu * dur)
    t = np.linspace(0, 1000.0, 101)
    const_err = abs(rzz_phase(1e-6, t) - 4 * np.pi * 1e-6 * 1000.0)
    j = h.couplings
    j_inter = np.abs(j[j != 0]).min() / 10
    t = np.linspace(0, 20000.0, 401)
    pulse = j_inter * np.sin(np.pi * t / t[-1]) ** 2
    oracle_err = abs(rzz_phase(pulse, t, j_intra=j) - rzz_phase_simulated(j, j, pulse, t))
    ok = rz_err < 1e-6 and const_err < 1e-6 and oracle_err < 1e-3
    record(9, ok, f"R_Z closed form err {rz_err:.1e} rad, R_ZZ closed form err {const_err:.1e} rad, 64-state vs area {oracle_err:.1e} rad")


def test_criterion_10_qec(ref):
    circ, h, a, line = ref
    f = readout_table(circ, line).frequencies
    model = SyndromeModel.from_frequencies(f, 1e-4)
    classified = sum(classify_syndrome(f[c], model) == syndrome_of(c) for c in range(8))
    corr = Corrector(h, a)
    rng = np.random.default_rng(10)
    w_err = f_err = 0.0
    frames = set()
    for _ in range(20):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        ref_state = np.zeros(8, complex)
        ref_state[0], ref_state[7] = v
        for spin in range(3):
            _, rep = correct_cycle(inject_error(ref_state, spin), model, corr, reference=ref_state, injected_error=spin)
            w_err = max(w_err, abs(rep.final_W - 1))
            f_err = max(f_err, abs(rep.fidelity - 1))
            frames.add(rep.pauli_frame)
    ok = classified == 8 and w_err < 1e-6 and f_err < 1e-6
    record(10, ok, f"{classified}/8 configs classified, max |W-1| = {w_err:.1e}, max |F-1| = {f_err:.1e}, frames {sorted(frames)}")


def _short_config():
    doc = json.loads(example_config_text())
    doc["scan"] = {"L_vertical_nH": [2.0, 3.0], "L_coupling_nH": [5.0, 10.0]}
    doc["spectrum"]["points"] = 11
    doc["optimize"].update({"duration_ns": 500.0, "steps": 1000, "iterations": 3})
    doc["qec"]["random_states"] = 3
    doc["gates"]["flux_samples"] = 51
    return parse_config(doc)


def test_criterion_11_determinism(tmp_path):
    cfg = _short_config()
    same, total = 0, 0
    diffs = []
    for task in cli.TASKS:
        outs = []
        for rep in range(2):
            out = tmp_path / f"{task}_{rep}"
            cli.run(copy.deepcopy(cfg), task, out, threads=2 if task == "scan" else 1, seed=5)
            outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        assert outs[0].keys() == outs[1].keys()
        for name in outs[0]:
            total += 1
            if outs[0][name] == outs[1][name]:
                same += 1
            else:
                diffs.append(f"{task}/{name}")
    record(11, same == total and total > 0, f"{same}/{total} CSV files byte-identical across two runs of {len(cli.TASKS)} tasks {diffs or ''}")


if __name__ == "__main__":
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    print()
    for n in sorted(RESULTS):
        print(RESULTS[n])
    sys.exit(code)
