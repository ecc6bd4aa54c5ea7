"""Walsh decomposition of per-configuration observables.

Any function of N classical spins expands exactly in products of sigma_z's.
The coefficient of subset S is ``2**-N * sum_sigma prod_{h in S} sigma_h * f(sigma)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import partial
from itertools import combinations

import numpy as np

from .circuit import ChainCircuit, spin_table
from .equilibrium import SolverError, solve_all
from .resonator import L_MAX, L_MIN, TargetUnreachable, TransmissionLine, calibrate_length, readout_table

log = logging.getLogger(__name__)

KRAMERS_TOL_MHZ = 1e-6
ZERO_REPORT_MHZ = 1e-9


class ExtractionError(ValueError):
    pass


class MissingConfig(ExtractionError):
    pass


class DuplicateConfig(ExtractionError):
    pass


def subsets(n: int) -> list[tuple[int, ...]]:
    """All spin subsets, ordered by size then lexicographically."""
    return [s for k in range(n + 1) for s in combinations(range(n), k)]


def walsh_matrix(n: int) -> np.ndarray:
    """W[c, s] = prod_{h in subset s} sigma_h(config c)."""
    sig = spin_table(n)
    return np.array([[np.prod(row[list(s)]) for s in subsets(n)] for row in sig])


@dataclass
class WalshCoefficients:
    n: int
    values: dict  # subset tuple -> coefficient

    def __getitem__(self, key) -> float:
        return self.values[_key(key)]

    @property
    def constant(self) -> float:
        return self.values[()]

    def order(self, k: int) -> dict:
        return {s: v for s, v in self.values.items() if len(s) == k}

    def odd(self) -> dict:
        return {s: v for s, v in self.values.items() if len(s) % 2}

    def even(self) -> dict:
        return {s: v for s, v in self.values.items() if len(s) % 2 == 0}

    def max_odd(self) -> float:
        return max((abs(v) for v in self.odd().values()), default=0.0)

    def pairwise(self) -> dict:
        return self.order(2)

    def reconstruct(self) -> np.ndarray:
        w = walsh_matrix(self.n)
        return w @ np.array([self.values[s] for s in subsets(self.n)])

    def as_vector(self) -> np.ndarray:
        return np.array([self.values[s] for s in subsets(self.n)])


def _key(key) -> tuple:
    if isinstance(key, str):
        # "12" -> (0, 1), 1-based labels as used in the Hamiltonians
        return tuple(int(ch) - 1 for ch in key)
    return tuple(sorted(key))


def walsh_extract(values, n: int | None = None) -> WalshCoefficients:
    """Walsh coefficients of a table over all 2**N configurations.

    ``values`` is either a sequence ordered by config index or a mapping from
    config index (or SpinConfig) to value.
    """
    if isinstance(values, dict):
        idx = [k.index if hasattr(k, "index") and not isinstance(k, int) else int(k) for k in values]
        if len(set(idx)) != len(idx):
            raise DuplicateConfig("configuration listed twice")
        if n is None:
            n = max(1, int(np.ceil(np.log2(max(idx) + 1))))
        missing = sorted(set(range(2**n)) - set(idx))
        if missing:
            raise MissingConfig(f"missing configurations {missing}")
        if len(idx) != 2**n:
            raise DuplicateConfig(f"expected {2**n} configurations, got {len(idx)}")
        vec = np.empty(2**n)
        for k, v in zip(idx, values.values()):
            vec[k] = v
    else:
        vec = np.asarray(values, dtype=float)
        size = vec.shape[0]
        if n is None:
            n = int(round(np.log2(size))) if size > 0 else 0
        if size < 2**n:
            raise MissingConfig(f"expected {2**n} entries, got {size}")
        if size > 2**n or 2**n != size:
            raise DuplicateConfig(f"expected {2**n} entries, got {size}")
    coeffs = walsh_matrix(n).T @ vec / 2**n
    return WalshCoefficients(n, dict(zip(subsets(n), coeffs)))


@dataclass
class IsingModel:
    """Energy couplings in GHz; ``walsh`` keeps every order including J0."""

    walsh: WalshCoefficients
    energies: np.ndarray

    @property
    def n(self) -> int:
        return self.walsh.n

    @property
    def offset(self) -> float:
        return self.walsh.constant

    @property
    def couplings(self) -> np.ndarray:
        """Symmetric N x N matrix of pairwise J, zero diagonal."""
        j = np.zeros((self.n, self.n))
        for (a, b), v in self.walsh.pairwise().items():
            j[a, b] = j[b, a] = v
        return j

    def summary(self) -> dict:
        return _summary(self.walsh, drop_constant=True)


@dataclass
class DispersiveModel:
    walsh: WalshCoefficients
    frequencies: np.ndarray
    line: TransmissionLine

    @property
    def f0(self) -> float:
        return self.walsh.constant

    @property
    def chi(self) -> np.ndarray:
        c = np.zeros((self.walsh.n, self.walsh.n))
        for (a, b), v in self.walsh.pairwise().items():
            c[a, b] = c[b, a] = v
        return c

    def summary(self) -> dict:
        return _summary(self.walsh, drop_constant=False)


@dataclass
class EdsrWeights:
    """A[j, k]: Walsh weight of the equilibrium drop across junction j on spin k."""

    matrix: np.ndarray
    drops: np.ndarray
    residual: float

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    @property
    def off_diagonal(self) -> np.ndarray:
        return self.matrix - np.diag(self.diagonal)

    def drive_weights(self, j: int, include_self: bool = False) -> np.ndarray:
        """Weights of sigma_z^(k) multiplying sigma_y^(j) in the drive on spin j."""
        w = self.matrix[j].copy()
        if not include_self:
            w[j] = 0.0
        return w


def _label(s) -> str:
    return "J" + "".join(str(i + 1) for i in s) if s else "J0"


def _summary(walsh: WalshCoefficients, drop_constant: bool) -> dict:
    out = {}
    for s, v in walsh.values.items():
        if drop_constant and not s:
            continue
        mhz = float(v) * 1e3
        if s and abs(mhz) < ZERO_REPORT_MHZ:
            mhz = 0.0
        out["".join(str(i + 1) for i in s) or "0"] = mhz
    return out


def _check_kramers(circuit: ChainCircuit, allow_off_kramers: bool):
    if not allow_off_kramers and not circuit.is_kramers_point():
        raise ExtractionError("circuit is not at a Kramers point; pass allow_off_kramers=True")


def extract_ising(circuit: ChainCircuit, *, allow_off_kramers: bool = False, solutions=None) -> IsingModel:
    _check_kramers(circuit, allow_off_kramers)
    sols = solutions if solutions is not None else solve_all(circuit)
    energies = np.array([s.energy_g for s in sols])
    return IsingModel(walsh_extract(energies, circuit.n), energies)


def extract_dispersive(
    circuit: ChainCircuit,
    line: TransmissionLine,
    *,
    allow_off_kramers: bool = False,
    solutions=None,
    z_factor: float = 2.0,
) -> DispersiveModel:
    _check_kramers(circuit, allow_off_kramers)
    sols = solutions if solutions is not None else solve_all(circuit)
    table = readout_table(np.array([s.inductive_energy for s in sols]), line, z_factor=z_factor)
    return DispersiveModel(walsh_extract(table.frequencies, circuit.n), table.frequencies, line)


def extract_edsr_weights(circuit: ChainCircuit, *, allow_off_kramers: bool = False, solutions=None) -> EdsrWeights:
    _check_kramers(circuit, allow_off_kramers)
    sols = solutions if solutions is not None else solve_all(circuit)
    drops = np.array([s.junction_drops for s in sols])  # (2**N, N)
    sig = spin_table(circuit.n)
    a = drops.T @ sig / 2**circuit.n
    residual = float(np.max(np.abs(drops - sig @ a.T)))
    return EdsrWeights(a, drops, residual)


@dataclass
class EffectiveModel:
    circuit: ChainCircuit
    ising: IsingModel
    edsr: EdsrWeights
    dispersive: DispersiveModel | None = None

    def kramers_report(self) -> dict:
        rep = {
            "kramers_point": self.circuit.is_kramers_point(),
            "max_odd_J_MHz": self.ising.walsh.max_odd() * 1e3,
            "tolerance_MHz": KRAMERS_TOL_MHZ,
        }
        if self.dispersive is not None:
            rep["max_odd_chi_MHz"] = self.dispersive.walsh.max_odd() * 1e3
        rep["passed"] = all(v < KRAMERS_TOL_MHZ for k, v in rep.items() if k.startswith("max_odd"))
        return rep


def effective_model(
    circuit: ChainCircuit,
    line: TransmissionLine | None = None,
    *,
    target_f0: float | None = None,
    allow_off_kramers: bool = False,
    z_factor: float = 2.0,
) -> EffectiveModel:
    """Solve all configurations once and extract J, A and (optionally) chi.

    With ``target_f0`` the line length is first calibrated to that frequency.
    """
    _check_kramers(circuit, allow_off_kramers)
    sols = solve_all(circuit)
    ising = extract_ising(circuit, allow_off_kramers=True, solutions=sols)
    edsr = extract_edsr_weights(circuit, allow_off_kramers=True, solutions=sols)
    disp = None
    if line is not None:
        if target_f0 is not None:
            e_ls = np.array([s.inductive_energy for s in sols])
            line = line.with_length(calibrate_length(e_ls, line, target_f0, z_factor=z_factor))
        disp = extract_dispersive(circuit, line, allow_off_kramers=True, solutions=sols, z_factor=z_factor)
    return EffectiveModel(circuit, ising, edsr, disp)


@dataclass
class ScanResult:
    l_vertical: np.ndarray
    l_coupling: np.ndarray
    values: dict  # coefficient label -> (len(lv), len(lc)) array in MHz (A unitless)
    lengths: np.ndarray
    failures: list

    def rows(self, key: str):
        for i, lv in enumerate(self.l_vertical):
            for k, lc in enumerate(self.l_coupling):
                yield lv, lc, self.values[key][i, k]


def scan_point(template: ChainCircuit, lv: float, lc: float, outputs, line, target_f0, z_factor, bounds=(L_MIN, L_MAX)):
    circ = ChainCircuit(
        template.junctions,
        (lv,) * template.n,
        (lc,) * (template.n - 1),
        template.external_fluxes,
        template.junction_sign,
    )
    out, fail, length = {}, [], np.nan
    sols = solve_all(circ)
    if "J" in outputs:
        w = extract_ising(circ, allow_off_kramers=True, solutions=sols).walsh
        for s, v in w.values.items():
            if s:
                out[_label(s)] = v * 1e3
    if "A" in outputs:
        a = extract_edsr_weights(circ, allow_off_kramers=True, solutions=sols).matrix
        for j in range(circ.n):
            for k in range(circ.n):
                out[f"A{j + 1}{k + 1}"] = a[j, k]
    if "chi" in outputs:
        e_ls = np.array([s.inductive_energy for s in sols])
        try:
            length = calibrate_length(e_ls, line, target_f0, z_factor=z_factor, bounds=bounds)
            w = walsh_extract(readout_table(e_ls, line.with_length(length), z_factor=z_factor).frequencies, circ.n)
            for s, v in w.values.items():
                out["chi" + "".join(str(i + 1) for i in s) if s else "f0"] = v * 1e3
        except TargetUnreachable as exc:
            fail.append(str(exc))
    return out, fail, length


def _scan_worker(template, outputs, line, target_f0, z_factor, bounds, point):
    try:
        return scan_point(template, point[0], point[1], outputs, line, target_f0, z_factor, bounds)
    except SolverError as exc:
        return {}, [f"solver: {exc}"], np.nan


def scan_2d(
    template: ChainCircuit,
    l_vertical,
    l_coupling,
    outputs=("J", "chi"),
    *,
    line: TransmissionLine | None = None,
    target_f0: float = 9.0,
    z_factor: float = 2.0,
    bounds=(L_MIN, L_MAX),
    map_fn=map,
) -> ScanResult:
    """Grid over uniform vertical and coupling inductances.

    Values are MHz for J and chi (``f0`` too), dimensionless for A. A point
    that fails (solver or unreachable calibration) is NaN and listed in
    ``failures``; the scan carries on. ``map_fn`` may be a parallel map; it
    must return results in input order.
    """
    lv = np.asarray(l_vertical, dtype=float)
    lc = np.asarray(l_coupling, dtype=float)
    if np.any(lv <= 0) or np.any(lc <= 0):
        raise ValueError("inductance grids must be positive")
    line = line or TransmissionLine()
    points = [(i, k) for i in range(lv.size) for k in range(lc.size)]
    work = partial(_scan_worker, template, tuple(outputs), line, target_f0, z_factor, tuple(bounds))
    results = list(map_fn(work, [(lv[i], lc[k]) for i, k in points]))
    keys = sorted({key for r in results for key in r[0]})
    values = {key: np.full((lv.size, lc.size), np.nan) for key in keys}
    lengths = np.full((lv.size, lc.size), np.nan)
    failures = []
    for (i, k), (out, fail, length) in zip(points, results):
        for key, v in out.items():
            values[key][i, k] = v
        lengths[i, k] = length
        failures.extend({"L_vertical_nH": lv[i], "L_coupling_nH": lc[k], "error": f} for f in fail)
    return ScanResult(lv, lc, values, lengths, failures)
