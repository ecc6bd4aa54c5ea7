"""``isene <task> --config path`` front end.

Every task writes its tables plus ``manifest.json`` into the output directory.
Exit codes: 0 ok, 2 config error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io
from .config import TASKS, RunConfig, SchemaViolation, parse_config
from .control import (
    GateObjective,
    MonotonicityViolation,
    UnresolvableTransitions,
    gate_fidelity,
    gate_traces,
    krotov_guess,
    krotov_optimize,
    sequence_arbitrary_theta,
    three_pi_sequence,
)
from .dynamics import (
    FrameError,
    StepTooLarge,
    SymmetryViolation,
    drive_channels,
    schedule_unitary,
    static_hamiltonian,
    x_symmetry_report,
)
from .equilibrium import SolverError, solve_all, spectrum_vs_flux
from .extraction import (
    ExtractionError,
    extract_dispersive,
    extract_edsr_weights,
    extract_ising,
    scan_2d,
)
from .gates import (
    AmbiguousFrequency,
    Corrector,
    FluxTrajectory,
    SyndromeModel,
    UncorrectableState,
    classify_syndrome,
    correct_cycle,
    inject_error,
    rz_phase,
    rzz_phase,
    rzz_phase_simulated,
    syndrome_of,
)
from .resonator import ResonatorError, calibrate_length, readout_table

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

NUMERIC_ERRORS = (
    SolverError,
    ResonatorError,
    ExtractionError,
    UnresolvableTransitions,
    MonotonicityViolation,
    StepTooLarge,
    SymmetryViolation,
    FrameError,
    AmbiguousFrequency,
    UncorrectableState,
    FloatingPointError,
    np.linalg.LinAlgError,
)


def _version(pkg: str) -> str:
    try:
        return metadata.version(pkg)
    except metadata.PackageNotFoundError:
        return "unknown"


class Run:
    """Shared state of one task: config, solved configurations, output files."""

    def __init__(self, cfg: RunConfig, out: Path, threads: int, seed: int):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.seed = seed
        self.files: list[Path] = []
        self.details: dict = {}
        self._sols = None

    @property
    def circuit(self):
        return self.cfg.circuit()

    def solutions(self):
        if self._sols is None:
            self._sols = solve_all(self.circuit, **self.cfg.section("solver"))
        return self._sols

    def inductive_energies(self):
        return np.array([s.inductive_energy for s in self.solutions()])

    def line(self):
        line = self.cfg.line()
        if line.length is None:
            z = self.cfg.section("line")["z_factor"]
            length = calibrate_length(
                self.inductive_energies(), line, self.cfg.target_f0, z_factor=z, bounds=self.cfg.length_bounds
            )
            line = line.with_length(length)
        self.details["line_length_mm"] = line.length * 1e3
        return line

    def effective(self):
        """Static Hamiltonian and A matrix of the configured circuit."""
        sols = self.solutions()
        ising = extract_ising(self.circuit, solutions=sols)
        edsr = extract_edsr_weights(self.circuit, solutions=sols)
        self.details["J_GHz"] = ising.couplings
        self.details["A"] = edsr.matrix
        return static_hamiltonian(ising.couplings), edsr.matrix

    def csv(self, name, header_rows):
        self.files.append(io.write_csv(self.out / name, *header_rows))

    def json(self, name, obj):
        self.files.append(io.write_json(self.out / name, obj))


# tasks ---------------------------------------------------------------------


def task_solve(run: Run):
    run.csv("equilibrium.csv", io.equilibrium_rows(run.solutions()))


def task_extract(run: Run):
    sols = run.solutions()
    circ = run.circuit
    line = run.line()
    z = run.cfg.section("line")["z_factor"]
    ising = extract_ising(circ, solutions=sols)
    disp = extract_dispersive(circ, line, solutions=sols, z_factor=z)
    edsr = extract_edsr_weights(circ, solutions=sols)
    run.csv("equilibrium.csv", io.equilibrium_rows(sols))
    run.csv("readout.csv", io.readout_rows(readout_table(run.inductive_energies(), line, z_factor=z)))
    run.json(
        "coefficients.json",
        {
            "J_MHz": ising.summary(),
            "chi_MHz": disp.summary(),
            "A": edsr.matrix,
            "A_fit_residual_rad": edsr.residual,
            "kramers": {
                "max_odd_J_MHz": ising.walsh.max_odd() * 1e3,
                "max_odd_chi_MHz": disp.walsh.max_odd() * 1e3,
            },
        },
    )


def task_scan(run: Run):
    sc = run.cfg.section("scan")
    if not sc:
        raise SchemaViolation([("/scan", "the scan task needs a scan section")])
    line = run.cfg.line()
    lsec = run.cfg.section("line")
    kw = dict(
        line=line,
        target_f0=run.cfg.target_f0 or 9.0,
        z_factor=lsec["z_factor"],
        bounds=run.cfg.length_bounds,
    )
    outputs = sc.get("outputs", ["J", "chi", "A"])
    npts = len(sc["L_vertical_nH"]) * len(sc["L_coupling_nH"])
    if run.threads > 1 and npts > 1:
        with ProcessPoolExecutor(max_workers=min(run.threads, npts)) as pool:
            res = scan_2d(run.circuit, sc["L_vertical_nH"], sc["L_coupling_nH"], outputs, map_fn=pool.map, **kw)
    else:
        res = scan_2d(run.circuit, sc["L_vertical_nH"], sc["L_coupling_nH"], outputs, **kw)
    for key in sorted(res.values):
        run.csv(f"scan_{key}.csv", io.scan_rows(res, key))
    run.json(
        "scan_summary.json",
        {
            "labels": sorted(res.values),
            "line_length_mm": (res.lengths * 1e3),
            "failures": res.failures,
            "max_abs_odd_MHz": _max_odd(res),
        },
    )


def _max_odd(res) -> float:
    vals = [np.nanmax(np.abs(v)) for k, v in res.values.items() if k[0] in "Jc" and _is_odd(k)]
    vals = [v for v in vals if np.isfinite(v)]
    return float(max(vals)) if vals else 0.0


def _is_odd(label: str) -> bool:
    digits = label.lstrip("Jchi")
    return label != "f0" and len(digits) % 2 == 1


def task_spectrum(run: Run):
    sp = _section(run, "spectrum")
    grid = np.linspace(sp["flux_start_rad"], sp["flux_stop_rad"], sp["points"])
    sweep = spectrum_vs_flux(run.circuit, sp["flux_loop"] - 1, grid)
    labels = [str(c) for c in sweep.configs]
    header = ["flux_rad", *[f"E_{lab}_GHz" for lab in labels]]
    run.csv("spectrum.csv", (header, [[g, *row] for g, row in zip(sweep.grid, sweep.energies)]))
    run.details["discontinuities"] = sweep.discontinuities


def _section(run: Run, name: str) -> dict:
    sec = run.cfg.section(name)
    if not sec:
        sec = parse_config({"circuit": run.cfg.data["circuit"], name: {}}).section(name)
    return sec


def _pulse_change_rows(schedule):
    header, rows = io.pulse_rows(schedule)
    keep = [0] + [k for k in range(1, len(rows)) if rows[k][1:] != rows[k - 1][1:] or k == len(rows) - 1]
    return header, [rows[k] for k in keep]


def task_dynamics(run: Run):
    dy = _section(run, "dynamics")
    h, a = run.effective()
    if dy["sequence"] == "three_pi":
        theta = np.pi
        seq = three_pi_sequence(h, a, dy.get("rabi_GHz"), dt=dy.get("dt_ns"))
    else:
        theta = dy["theta_rad"]
        seq = sequence_arbitrary_theta(h, a, theta, dy.get("rabi_GHz"), dt=dy.get("dt_ns"))
    sched = seq.schedule
    traces = gate_traces(h, sched, sample_every=sched.duration / dy["samples"])
    obj = GateObjective.rotation_x(theta)
    fid = gate_fidelity(schedule_unitary(h, sched), obj)
    run.csv("trajectory.csv", io.trajectory_rows(traces))
    run.csv("pulses.csv", _pulse_change_rows(sched))
    run.json(
        "result.json",
        {
            "sequence": dy["sequence"],
            "theta_rad": theta,
            "fidelity": fid,
            "final_W": traces.weight[-1],
            "final_theta_rad": traces.theta[-1],
            "rabi_GHz": seq.rabi_rate,
            "min_gap_GHz": seq.min_gap,
            "steps": sched.nsteps,
            "dt_ns": sched.dt,
            "transitions": [
                {"spin": s.spin + 1, "from": s.source, "to": s.target, "frequency_GHz": s.frequency, "rotation_rad": s.rotation}
                for s in seq.steps
            ],
        },
    )


def task_optimize(run: Run):
    op = _section(run, "optimize")
    h, a = run.effective()
    guess = krotov_guess(h, a, op["duration_ns"], op["steps"], op["guess_GHz"], op["flank_fraction"])
    obj = GateObjective.rotation_x(op["theta_rad"])
    res = krotov_optimize(obj, guess, h, op["lambda_a"], op["iterations"], flank=op["flank_fraction"])
    traces = gate_traces(h, res.schedule)
    run.csv("pulses.csv", io.pulse_rows(res.schedule))
    run.csv("fidelity.csv", (["iteration", "fidelity"], list(enumerate(res.fidelities))))
    run.csv("trajectory.csv", io.trajectory_rows(traces))
    run.json(
        "result.json",
        {
            "theta_rad": op["theta_rad"],
            "lambda_a": res.lambda_a,
            "iterations": res.iterations,
            "max_iterations_reached": res.max_iterations_reached,
            "final_fidelity": res.fidelities[-1],
            "final_W": traces.weight[-1],
            "final_theta_rad": traces.theta[-1],
            "carriers": [{"spin": ch.spin + 1, "tones": [list(c) for c in ch.carriers]} for ch in res.schedule.channels],
        },
    )


def task_gates(run: Run):
    g = _section(run, "gates")
    circ = run.circuit
    amp, dur = g["flux_amplitude_rad"], g["flux_duration_ns"]
    traj = FluxTrajectory.from_function(lambda t: amp * np.sin(np.pi * t / dur) ** 2, dur, g["flux_samples"])
    rz = rz_phase(circ, traj, g["flux_loop"] - 1)
    rz_neg = rz_phase(circ, traj.negated(), g["flux_loop"] - 1)
    h, _ = run.effective()
    times = np.linspace(0.0, g["rzz_duration_ns"], 101)
    j = g["J_inter_GHz"]
    run.csv("rz_pulse.csv", (["t_ns", "flux_rad", "detuning_GHz"], list(zip(traj.times, traj.flux, rz.detuning))))
    run.json(
        "gates.json",
        {
            "rz_theta_rad": rz.theta,
            "rz_theta_mod_2pi": rz.theta_mod,
            "rz_theta_negated_flux_rad": rz_neg.theta,
            "rzz_theta_rad": rzz_phase(j, times, j_intra=h.couplings),
            "rzz_theta_64_state_rad": rzz_phase_simulated(h.couplings, h.couplings, j, times),
            "rzz_closed_form_rad": 4 * np.pi * j * g["rzz_duration_ns"],
        },
    )


def task_qec(run: Run):
    q = _section(run, "qec")
    h, a = run.effective()
    z = run.cfg.section("line")["z_factor"]
    table = readout_table(run.inductive_energies(), run.line(), z_factor=z)
    model = SyndromeModel.from_frequencies(table.frequencies, q["kappa_GHz"])
    rows = []
    for c, f in enumerate(table.frequencies):
        s = classify_syndrome(f, model)
        rows.append([c, f, *syndrome_of(c), *s])
    run.csv("syndromes.csv", (["config_index", "f_r_GHz", "s12", "s23", "measured_s12", "measured_s23"], rows))
    corr = Corrector(h, a, slowness=q["slowness"])
    rng = np.random.default_rng(run.seed)
    states = [np.array([1.0, 0.0], complex)]
    for _ in range(q["random_states"]):
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        states.append(v / np.linalg.norm(v))
    reports = []
    dim = h.dim
    for k, (al, be) in enumerate(states):
        ref = np.zeros(dim, complex)
        ref[0], ref[-1] = al, be
        for err in [None, *range(h.n)]:
            psi = ref if err is None else inject_error(ref, err)
            _, rep = correct_cycle(psi, model, corr, reference=ref, injected_error=err)
            d = rep.to_dict()
            d["state_index"] = k
            reports.append(d)
    run.json("qec_reports.json", reports)
    run.details["min_final_W"] = min(r["final_W"] for r in reports)
    run.details["min_fidelity"] = min(r["fidelity"] for r in reports)


def task_check(run: Run):
    circ = run.circuit
    sols = run.solutions()
    ising = extract_ising(circ, allow_off_kramers=True, solutions=sols)
    edsr = extract_edsr_weights(circ, allow_off_kramers=True, solutions=sols)
    e = np.array([s.energy_g for s in sols])
    full = 2**circ.n - 1
    degeneracy = float(max(abs(e[c] - e[full ^ c]) for c in range(2**circ.n)))
    report = {
        "kramers_point": circ.is_kramers_point(),
        "max_odd_E_g_MHz": ising.walsh.max_odd() * 1e3,
        "max_kramers_splitting_GHz": degeneracy,
        "odd_E_g_MHz": {"".join(str(i + 1) for i in k): v * 1e3 for k, v in ising.walsh.odd().items()},
        "tolerance_MHz": 1e-6,
    }
    try:
        line = run.line()
        disp = extract_dispersive(circ, line, allow_off_kramers=True, solutions=sols, z_factor=run.cfg.section("line")["z_factor"])
        report["max_odd_f_r_MHz"] = disp.walsh.max_odd() * 1e3
    except ResonatorError as exc:
        report["readout_skipped"] = str(exc)
    if circ.n == 3:
        h = static_hamiltonian(ising.couplings)
        try:
            sym = x_symmetry_report(h, drive_channels(edsr.matrix))
            report["x_commutator_max"] = max([sym.static_commutator, *sym.drive_commutators])
        except SymmetryViolation as exc:
            report["x_symmetry_violation"] = str(exc)
    odd = [v for k, v in report.items() if k.startswith("max_odd")]
    report["kramers_nulls_hold"] = bool(all(v < 1e-6 for v in odd))
    run.json("check.json", report)


TASK_FUNCS = {
    "solve": task_solve,
    "extract": task_extract,
    "scan": task_scan,
    "spectrum": task_spectrum,
    "dynamics": task_dynamics,
    "optimize": task_optimize,
    "gates": task_gates,
    "qec": task_qec,
    "check": task_check,
}


def run(cfg: RunConfig, task: str | None = None, out=".", *, threads: int | None = None, seed: int = 0) -> dict:
    """Execute one task and write its artifacts plus a manifest; returns the manifest."""
    task = task or cfg.task
    if task not in TASK_FUNCS:
        raise SchemaViolation([("/task", f"unknown or missing task {task!r}; choose from {', '.join(TASKS)}")])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    r = Run(cfg, out, threads or os.cpu_count() or 1, seed)
    t0 = time.perf_counter()
    TASK_FUNCS[task](r)
    wall = time.perf_counter() - t0
    manifest = {
        "task": task,
        "config_sha256": cfg.digest(),
        "config": cfg.data,
        "versions": {
            "isene": _version("isene"),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": _version("scipy"),
            "numba": _version("numba"),
        },
        "tolerances": cfg.section("solver"),
        "seed": seed,
        "wall_time_s": wall,
        "outputs": {p.name: io.sha256_file(p) for p in r.files},
        "details": r.details,
    }
    io.write_json(out / "manifest.json", manifest)
    return manifest


def _fail(code: int, payload: dict, out: Path | None):
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        try:
            io.write_json(out / "error.json", payload)
        except OSError:
            pass
    return code


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="isene", description="Andreev spin-qubit chain workbench")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, default=Path("isene_out"), help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker processes for sweeps (default: all cores)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomly drawn test states")
    args = p.parse_args(argv)
    try:
        cfg = parse_config(args.config.read_bytes())
    except OSError as exc:
        return _fail(EXIT_CONFIG, {"error": "ConfigUnreadable", "message": str(exc)}, None)
    except SchemaViolation as exc:
        return _fail(EXIT_CONFIG, exc.to_dict(), None)
    try:
        manifest = run(cfg, args.task, args.out, threads=args.threads, seed=args.seed)
    except SchemaViolation as exc:
        return _fail(EXIT_CONFIG, exc.to_dict(), args.out)
    except NUMERIC_ERRORS as exc:
        return _fail(EXIT_NUMERIC, {"error": type(exc).__name__, "message": str(exc), "task": args.task}, args.out)
    except Exception as exc:  # any other module failure still gets a machine-readable report
        return _fail(EXIT_NUMERIC, {"error": type(exc).__name__, "message": str(exc), "task": args.task, "unexpected": True}, args.out)
    print(json.dumps({"task": args.task, "out": str(args.out), "outputs": sorted(manifest["outputs"])}))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
