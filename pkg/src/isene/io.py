"""CSV and JSON writers with fixed column order and round-trip float formatting."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .circuit import spin_table


def fmt(x) -> str:
    """Shortest repr that round-trips; identical on every run."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return path


def read_csv(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def equilibrium_rows(solutions):
    n = solutions[0].circuit.n
    header = ["config_index", *[f"sigma_{h + 1}" for h in range(n)], "phi_in_star", "E_g_GHz", "E_L_GHz"]
    header += [f"drop_{h + 1}" for h in range(n)]
    sig = spin_table(n)
    rows = []
    for s in solutions:
        c = s.config.index
        rows.append([c, *[int(v) for v in sig[c]], s.phases_star.phi_in, s.energy_g, s.inductive_energy, *s.junction_drops])
    return header, rows


def readout_rows(table):
    header = ["config_index", "E_L_GHz", "f_r_GHz"]
    return header, [[c, e, f] for c, (e, f) in enumerate(zip(table.inductive_energies, table.frequencies))]


def scan_rows(result, key):
    return ["L_vertical_nH", "L_coupling_nH", "value_MHz"], list(result.rows(key))


def trajectory_rows(traces):
    states = traces.trajectory.states
    dim = states.shape[1]
    header = ["t_ns"]
    for a in range(dim):
        header += [f"re_{a}", f"im_{a}"]
    header += ["W", "alpha_plus", "alpha_minus", "theta"]
    rows = []
    for k, t in enumerate(traces.times):
        amps = []
        for a in range(dim):
            amps += [states[k, a].real, states[k, a].imag]
        rows.append([t, *amps, traces.weight[k], traces.alpha_plus[k], traces.alpha_minus[k], traces.theta[k]])
    return header, rows


def pulse_rows(schedule):
    nch = schedule.envelopes.shape[1]
    header = ["t_ns", *[f"M{c + 1}_GHz" for c in range(nch)]]
    return header, [[t, *row] for t, row in zip(schedule.times, schedule.envelopes)]
