"""Classical ground state of the chain for each spin configuration."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .circuit import ChainCircuit, NodePhases, SpinConfig, all_configs

log = logging.getLogger(__name__)

TOLERANCE = 1e-12
MAX_ITER = 200
FREE = "free"


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    def __init__(self, message, residual=np.nan, where=None):
        super().__init__(message)
        self.residual = residual
        self.where = where


class SaddleDetected(SolverError):
    pass


class SingularInternalBlock(SolverError):
    pass


@dataclass
class EquilibriumSolution:
    circuit: ChainCircuit
    config: SpinConfig
    phases_star: NodePhases
    energy_g: float
    junction_drops: np.ndarray
    hessian_at_min: np.ndarray
    residual: float
    free_input: bool
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    _inductive_energy: float | None = None

    @property
    def x(self) -> np.ndarray:
        return self.phases_star.to_vector()

    @property
    def inductive_energy(self) -> float:
        if self._inductive_energy is None:
            self._inductive_energy = inductive_energy(self)
        return self._inductive_energy


def _newton(circuit, sigma, x0, fixed, tol, max_iter, descend=False):
    """Damped Newton on grad V = 0 with backtracking on ||grad V||.

    With ``fixed`` the first coordinate (phi_in) is held at its initial value.
    ``descend`` replaces the Hessian eigenvalues by their magnitudes while it
    is indefinite and backtracks on V instead, so the iteration runs downhill
    away from maxima and saddles.
    """
    x = np.array(x0, dtype=float)
    sl = slice(1, None) if fixed else slice(None)
    g = circuit.gradient(x, sigma)[sl]
    r = np.linalg.norm(g)
    history = [r]
    for it in range(max_iter):
        if r < tol:
            return x, r, it, history
        h = circuit.hessian(x, sigma)[sl, sl]
        downhill = False
        if descend:
            w, v = np.linalg.eigh(h)
            downhill = w.min() <= 0
        if downhill:
            w = np.maximum(np.abs(w), 1e-3 * np.abs(w).max())
            step = -v @ ((v.T @ g) / w)
            e = circuit.potential_energy(x, sigma)
        else:
            step = -np.linalg.solve(h, g)
        t = 1.0
        while True:
            trial = x.copy()
            trial[sl] += t * step
            g_trial = circuit.gradient(trial, sigma)[sl]
            r_trial = np.linalg.norm(g_trial)
            if downhill:
                if circuit.potential_energy(trial, sigma) < e or t < 1e-8:
                    break
            # accept any decrease; near the root the full step always wins
            elif r_trial < r or t < 1e-8:
                break
            t *= 0.5
        if not downhill and r_trial >= r and r < 1e3 * tol:
            # stalled at floating-point noise floor just above tol
            return x, r, it, history
        x, g, r = trial, g_trial, r_trial
        history.append(r)
    if r < tol:
        return x, r, max_iter, history
    raise NonConvergence(f"Newton did not converge in {max_iter} iterations (residual {r:.3e})", r)


def _is_psd(h, rtol=1e-12):
    w = np.linalg.eigvalsh(h)
    return w.min() >= -rtol * max(1.0, abs(w).max())


def solve_equilibrium(
    circuit: ChainCircuit,
    config: SpinConfig,
    phi_in: float | None = None,
    *,
    x0=None,
    tol: float = TOLERANCE,
    max_iter: int = MAX_ITER,
    restarts: int = 8,
    seed: int = 0,
) -> EquilibriumSolution:
    """Minimize the potential over node phases for one spin configuration.

    ``phi_in=None`` leaves the input phase free (2N-1 unknowns); otherwise it
    is held fixed and only the 2N-2 internal nodes are solved for. The start
    point defaults to the inductor-only minimum, which is all zeros at zero
    flux. Sweeps pass the previous solution as ``x0``.
    """
    if not isinstance(config, SpinConfig):
        config = SpinConfig(tuple(int(s) for s in config))
    sigma = config.as_array()
    fixed = phi_in is not None
    if x0 is None:
        x0 = circuit.linear_minimum(phi_in)
    else:
        x0 = np.array(x0, dtype=float)
        if fixed:
            x0[0] = phi_in
    sl = slice(1, None) if fixed else slice(None)

    x, r, it, history = _newton(circuit, sigma, x0, fixed, tol, max_iter)
    h = circuit.hessian(x, sigma)
    if not _is_psd(h[sl, sl]):
        log.info("saddle at config %s, restarting from perturbed seeds", config)
        rng = np.random.default_rng(seed)
        best = None
        for _ in range(restarts):
            mask = rng.random(x0.size) < 0.5
            if fixed:
                mask[0] = False
            seed_x = x0 + mask * rng.choice([-0.3, 0.3], size=x0.size)
            try:
                xs, rs, its, hs = _newton(circuit, sigma, seed_x, fixed, tol, max_iter, descend=True)
            except NonConvergence:
                continue
            hh = circuit.hessian(xs, sigma)
            if _is_psd(hh[sl, sl]):
                e = circuit.potential_energy(xs, sigma)
                if best is None or e < best[0]:
                    best = (e, xs, rs, its, hs, hh)
        if best is None:
            raise SaddleDetected(f"no stable minimum found for config {config}")
        _, x, r, it, history, h = best

    return EquilibriumSolution(
        circuit=circuit,
        config=config,
        phases_star=NodePhases.from_vector(x, circuit.n),
        energy_g=circuit.potential_energy(x, sigma),
        junction_drops=circuit.junction_drops(x),
        hessian_at_min=h,
        residual=float(r),
        free_input=not fixed,
        iterations=it,
        residual_history=history,
    )


def inductive_energy(solution: EquilibriumSolution) -> float:
    """Schur complement of the Hessian onto the input phase, GHz.

    Equals the curvature of the ground energy with respect to phi_in once all
    internal nodes have relaxed.
    """
    if not solution.free_input:
        raise ValueError("inductive energy needs a free-input-phase solution")
    h = solution.hessian_at_min
    inner = h[1:, 1:]
    if inner.size == 0:
        return float(h[0, 0])
    cond = np.linalg.cond(inner)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularInternalBlock(f"internal Hessian block is singular (cond={cond:.2e})")
    return float(h[0, 0] - h[0, 1:] @ np.linalg.solve(inner, h[1:, 0]))


def solve_all(circuit: ChainCircuit, **kw) -> list[EquilibriumSolution]:
    """Free-input equilibria for every configuration, ordered by index."""
    out = []
    for c in all_configs(circuit.n):
        try:
            out.append(solve_equilibrium(circuit, c, **kw))
        except SolverError as exc:
            exc.where = {"config_index": c.index}
            raise
    return out


@dataclass
class FluxSweep:
    flux_index: int
    grid: np.ndarray
    configs: list[SpinConfig]
    energies: np.ndarray  # (len(grid), len(configs))
    discontinuities: list = field(default_factory=list)

    def delta(self, a: int, b: int) -> np.ndarray:
        ia = [c.index for c in self.configs].index(a)
        ib = [c.index for c in self.configs].index(b)
        return self.energies[:, ia] - self.energies[:, ib]


def spectrum_vs_flux(
    circuit: ChainCircuit,
    flux_index: int,
    grid,
    configs=None,
    *,
    jump_tol: float = 0.5,
    **kw,
) -> FluxSweep:
    """Ground energy per config while sweeping one loop flux.

    Each point is warm-started from its predecessor. A change in node phases
    larger than ``jump_tol`` per 0.05 rad of flux is recorded as a possible
    branch jump.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size > 1 and not (np.all(np.diff(grid) > 0) or np.all(np.diff(grid) < 0)):
        raise ValueError("flux grid must be strictly monotone")
    if configs is None:
        configs = all_configs(circuit.n)
    energies = np.empty((grid.size, len(configs)))
    jumps = []
    for k, c in enumerate(configs):
        prev = None
        for i, phi in enumerate(grid):
            fluxes = list(circuit.external_fluxes)
            fluxes[flux_index] = phi
            circ = circuit.with_fluxes(fluxes)
            x0 = None
            if prev is not None:
                # shift the warm start by the change of the inductor-only minimum
                x0 = prev.x + circ.linear_minimum() - prev.circuit.linear_minimum()
            try:
                sol = solve_equilibrium(circ, c, x0=x0, **kw)
            except NonConvergence as exc:
                exc.where = {"config_index": c.index, "grid_index": i, "flux": float(phi)}
                raise
            if prev is not None:
                dphi = abs(phi - grid[i - 1])
                move = np.max(np.abs(sol.x - prev.x - (circ.linear_minimum() - prev.circuit.linear_minimum())))
                if move > jump_tol * max(dphi / 0.05, 1.0):
                    jumps.append((c.index, i))
            energies[i, k] = sol.energy_g
            prev = sol
    return FluxSweep(flux_index, grid, list(configs), energies, jumps)
