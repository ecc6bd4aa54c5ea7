"""Series chain of Andreev spin junctions coupled by linear inductors.

Node ordering used everywhere in the package::

    [phi_in, u_1 .. u_{N-1}, d_1 .. d_{N-1}]

Junction ``i`` sits between ``d_{i-1}`` and ``d_i`` (with ``d_0 = phi_in`` and
``d_N = ground``); vertical inductor ``i`` sits between ``u_{i-1}`` and ``u_i``
(``u_0 = phi_in``, ``u_N = ground``) and carries the loop flux ``phi_e_i``;
coupling inductor ``i`` joins ``u_i`` and ``d_i``.

Energies are E/h in GHz, phases in radians, inductances in nH.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

HBAR = 1.0545718e-34
E_CHARGE = 1.602177e-19
H_PLANCK = 2 * np.pi * HBAR
PHI0 = HBAR / (2 * E_CHARGE)  # reduced flux quantum, Wb

MINUS_COS = "minus_cos"
PLUS_COS = "plus_cos"


class DimensionError(ValueError):
    pass


def inductive_energy_ghz(inductance_nh):
    """phi0**2 / (L h) in GHz for an inductance given in nH."""
    return PHI0**2 / (np.asarray(inductance_nh) * 1e-9 * H_PLANCK) * 1e-9


@dataclass(frozen=True)
class JunctionParams:
    e0: float
    e_sigma: float

    def __post_init__(self):
        if not self.e_sigma > 0:
            raise ValueError(f"e_sigma must be positive, got {self.e_sigma}")

    @property
    def amplitude(self) -> float:
        return float(np.hypot(self.e0, self.e_sigma))

    @property
    def gamma(self) -> float:
        # atan2 keeps gamma in (0, pi) for either sign of e0
        return float(np.arctan2(self.e_sigma, self.e0))


@dataclass(frozen=True)
class SpinConfig:
    """One classical z-configuration; bit h of ``index`` is (1 - sigma_h)/2."""

    spins: tuple[int, ...]

    def __post_init__(self):
        if any(s not in (-1, 1) for s in self.spins):
            raise ValueError(f"spins must be +-1, got {self.spins}")

    @classmethod
    def from_index(cls, index: int, n: int) -> "SpinConfig":
        if not 0 <= index < 2**n:
            raise ValueError(f"index {index} out of range for {n} spins")
        return cls(tuple(1 - 2 * ((index >> h) & 1) for h in range(n)))

    @property
    def index(self) -> int:
        return sum(((1 - s) // 2) << h for h, s in enumerate(self.spins))

    @property
    def n(self) -> int:
        return len(self.spins)

    def flip(self) -> "SpinConfig":
        return SpinConfig(tuple(-s for s in self.spins))

    def as_array(self) -> np.ndarray:
        return np.array(self.spins, dtype=float)

    def __str__(self):
        return "".join("u" if s > 0 else "d" for s in self.spins)


def all_configs(n: int) -> list[SpinConfig]:
    return [SpinConfig.from_index(i, n) for i in range(2**n)]


def spin_table(n: int) -> np.ndarray:
    """(2**n, n) array of sigma values ordered by config index."""
    return np.array([c.spins for c in all_configs(n)], dtype=float)


@dataclass(frozen=True)
class NodePhases:
    phi_in: float
    upper: np.ndarray
    lower: np.ndarray

    @classmethod
    def from_vector(cls, x, n: int) -> "NodePhases":
        x = np.asarray(x, dtype=float)
        if x.shape != (2 * n - 1,):
            raise DimensionError(f"expected {2 * n - 1} phases, got shape {x.shape}")
        return cls(float(x[0]), x[1:n].copy(), x[n:].copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.phi_in], self.upper, self.lower])


@dataclass(frozen=True)
class ChainCircuit:
    """N Andreev junctions in series, shunted by a ladder of linear inductors.

    ``junction_sign`` selects the junction energy convention: ``"minus_cos"``
    uses -sqrt(E0**2 + Es**2) cos(phi - gamma*sigma); ``"plus_cos"`` uses
    E0 cos(phi) + Es sigma sin(phi), which is the negative of it.
    """

    junctions: tuple[JunctionParams, ...]
    vertical_inductances: tuple[float, ...]
    coupling_inductances: tuple[float, ...]
    external_fluxes: tuple[float, ...] = ()
    junction_sign: str = MINUS_COS

    def __post_init__(self):
        n = len(self.junctions)
        if n < 1:
            raise ValueError("need at least one junction")
        object.__setattr__(self, "junctions", tuple(self.junctions))
        object.__setattr__(self, "vertical_inductances", tuple(float(x) for x in self.vertical_inductances))
        object.__setattr__(self, "coupling_inductances", tuple(float(x) for x in self.coupling_inductances))
        fluxes = tuple(float(x) for x in self.external_fluxes) or (0.0,) * n
        object.__setattr__(self, "external_fluxes", fluxes)
        if len(self.vertical_inductances) != n:
            raise DimensionError(f"need {n} vertical inductances, got {len(self.vertical_inductances)}")
        if len(self.coupling_inductances) != n - 1:
            raise DimensionError(f"need {n - 1} coupling inductances, got {len(self.coupling_inductances)}")
        if len(fluxes) != n:
            raise DimensionError(f"need {n} external fluxes, got {len(fluxes)}")
        if min(self.vertical_inductances + self.coupling_inductances, default=1.0) <= 0:
            raise ValueError("inductances must be strictly positive")
        if self.junction_sign not in (MINUS_COS, PLUS_COS):
            raise ValueError(f"unknown junction_sign {self.junction_sign!r}")

    @classmethod
    def uniform(cls, e0, e_sigma, l_vertical, l_coupling, fluxes=None, **kw) -> "ChainCircuit":
        """Chain with per-junction energies and one inductance per orientation."""
        e0 = np.broadcast_to(e0, np.shape(e_sigma))
        junctions = tuple(JunctionParams(float(a), float(b)) for a, b in zip(e0, e_sigma))
        n = len(junctions)
        return cls(
            junctions,
            (float(l_vertical),) * n,
            (float(l_coupling),) * (n - 1),
            tuple(fluxes) if fluxes is not None else (),
            **kw,
        )

    @property
    def n(self) -> int:
        return len(self.junctions)

    @property
    def n_nodes(self) -> int:
        return 2 * self.n - 1

    @property
    def vertical_energies(self) -> np.ndarray:
        return inductive_energy_ghz(self.vertical_inductances)

    @property
    def coupling_energies(self) -> np.ndarray:
        return inductive_energy_ghz(self.coupling_inductances)

    def with_fluxes(self, fluxes: Sequence[float]) -> "ChainCircuit":
        return ChainCircuit(
            self.junctions,
            self.vertical_inductances,
            self.coupling_inductances,
            tuple(fluxes),
            self.junction_sign,
        )

    def is_kramers_point(self, atol: float = 1e-12) -> bool:
        r = np.mod(np.asarray(self.external_fluxes), np.pi)
        return bool(np.all((r < atol) | (np.pi - r < atol)))

    @cached_property
    def _incidence(self):
        n, m = self.n, self.n_nodes
        up = lambda i: 0 if i == 0 else i  # noqa: E731
        dn = lambda i: 0 if i == 0 else n - 1 + i  # noqa: E731
        junc = np.zeros((n, m))
        vert = np.zeros((n, m))
        coup = np.zeros((n - 1, m))
        for i in range(n):
            junc[i, dn(i)] += 1.0
            vert[i, up(i)] += 1.0
            if i + 1 < n:
                junc[i, dn(i + 1)] -= 1.0
                vert[i, up(i + 1)] -= 1.0
                coup[i, up(i + 1)] = 1.0
                coup[i, dn(i + 1)] = -1.0
        ind = np.vstack([vert, coup])
        stiff = np.concatenate([self.vertical_energies, self.coupling_energies])
        offset = np.concatenate([self.external_fluxes, np.zeros(n - 1)])
        amp = np.array([j.amplitude for j in self.junctions])
        gamma = np.array([j.gamma for j in self.junctions])
        return junc, ind, stiff, offset, amp, gamma

    @cached_property
    def inductive_hessian(self) -> np.ndarray:
        """Phase-independent Hessian of the inductor terms (GHz/rad^2)."""
        _, ind, stiff, _, _, _ = self._incidence
        return ind.T @ (stiff[:, None] * ind)

    def junction_drops(self, x) -> np.ndarray:
        """Phase drop across each junction, phi_{d,i-1} - phi_{d,i}."""
        return self._incidence[0] @ np.asarray(x, dtype=float)

    def linear_minimum(self, phi_in: float | None = None) -> np.ndarray:
        """Minimizer of the inductor-only energy (exact linear solve)."""
        _, ind, stiff, offset, _, _ = self._incidence
        hess = self.inductive_hessian
        rhs = ind.T @ (stiff * offset)
        if phi_in is None:
            return np.linalg.solve(hess, rhs)
        x = np.empty(self.n_nodes)
        x[0] = phi_in
        x[1:] = np.linalg.solve(hess[1:, 1:], rhs[1:] - hess[1:, 0] * phi_in)
        return x

    def _terms(self, phases, config):
        x = _as_vector(phases, self)
        sigma = _as_sigma(config, self)
        junc, ind, stiff, offset, amp, gamma = self._incidence
        arg = junc @ x - gamma * sigma
        stretch = ind @ x - offset
        return x, arg, stretch

    def potential_energy(self, phases, config) -> float:
        _, arg, stretch = self._terms(phases, config)
        junc, ind, stiff, offset, amp, gamma = self._incidence
        return float(self._sign * np.sum(amp * np.cos(arg)) + 0.5 * np.sum(stiff * stretch**2))

    def gradient(self, phases, config) -> np.ndarray:
        _, arg, stretch = self._terms(phases, config)
        junc, ind, stiff, offset, amp, gamma = self._incidence
        return -self._sign * junc.T @ (amp * np.sin(arg)) + ind.T @ (stiff * stretch)

    def hessian(self, phases, config) -> np.ndarray:
        _, arg, _ = self._terms(phases, config)
        junc, _, _, _, amp, _ = self._incidence
        h = -self._sign * junc.T @ ((amp * np.cos(arg))[:, None] * junc) + self.inductive_hessian
        return 0.5 * (h + h.T)

    @property
    def _sign(self) -> float:
        return -1.0 if self.junction_sign == MINUS_COS else 1.0


def potential_energy(circuit: ChainCircuit, phases, config) -> float:
    return circuit.potential_energy(phases, config)


def gradient(circuit: ChainCircuit, phases, config) -> np.ndarray:
    return circuit.gradient(phases, config)


def hessian(circuit: ChainCircuit, phases, config) -> np.ndarray:
    return circuit.hessian(phases, config)


def _as_vector(phases, circuit: ChainCircuit) -> np.ndarray:
    x = phases.to_vector() if isinstance(phases, NodePhases) else np.asarray(phases, dtype=float)
    if x.shape != (circuit.n_nodes,):
        raise DimensionError(f"circuit has {circuit.n_nodes} node phases, got shape {x.shape}")
    return x


def _as_sigma(config, circuit: ChainCircuit) -> np.ndarray:
    sigma = config.as_array() if isinstance(config, SpinConfig) else np.asarray(config, dtype=float)
    if sigma.shape != (circuit.n,):
        raise DimensionError(f"circuit has {circuit.n} spins, got shape {sigma.shape}")
    return sigma


# junction energies of the reference three-spin chain (GHz)
REFERENCE_E0 = (0.4, 0.4, 0.4)
REFERENCE_E_SIGMA = (0.4, 0.3, 0.2)


def reference_circuit(l_vertical: float = 5.0, l_coupling: float = 5.0, fluxes=None) -> ChainCircuit:
    return ChainCircuit.uniform(REFERENCE_E0, REFERENCE_E_SIGMA, l_vertical, l_coupling, fluxes)
