import numpy as np
import pytest

from isene.circuit import ChainCircuit, JunctionParams, SpinConfig, all_configs, reference_circuit
from isene.equilibrium import (
    NonConvergence,
    inductive_energy,
    solve_all,
    solve_equilibrium,
    spectrum_vs_flux,
)

from oracles import el_ghz, grid_minimum, potential3
from test_circuit import random_circuit


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_energy_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    circ, (e0, es, lv, lc, fl) = random_circuit(rng)
    for cfg in all_configs(3)[::3]:
        sol = solve_equilibrium(circ, cfg)
        _, e_ref = grid_minimum(lambda x: potential3(x, cfg.as_array(), e0, es, lv, lc, fl), 5)
        assert abs(sol.energy_g - e_ref) < 1e-6


def test_solution_is_stationary_and_stable(ref_circuit):
    for sol in solve_all(ref_circuit):
        assert sol.residual < 1e-10
        assert np.linalg.eigvalsh(sol.hessian_at_min).min() > 0
        assert np.allclose(sol.junction_drops, ref_circuit.junction_drops(sol.x))


def test_fixed_input_phase_is_respected(ref_circuit):
    sol = solve_equilibrium(ref_circuit, SpinConfig((1, -1, 1)), phi_in=0.2)
    assert sol.x[0] == 0.2
    assert not sol.free_input
    assert np.linalg.norm(ref_circuit.gradient(sol.x, sol.config)[1:]) < 1e-10
    with pytest.raises(ValueError):
        inductive_energy(sol)


@pytest.mark.parametrize("seed", [21, 22, 23])
def test_schur_complement_is_curvature(seed):
    rng = np.random.default_rng(seed)
    circ, _ = random_circuit(rng)
    h = 1e-3
    for cfg in all_configs(3)[:4]:
        free = solve_equilibrium(circ, cfg)
        p0 = free.x[0]
        e = [solve_equilibrium(circ, cfg, phi_in=p0 + d, x0=free.x).energy_g for d in (-h, 0.0, h)]
        fd = (e[0] - 2 * e[1] + e[2]) / h**2
        assert abs(free.inductive_energy - fd) <= 1e-6 * abs(fd)


def test_schur_complement_network_reduction():
    # with negligible junctions the lower rail floats, so only the three
    # vertical inductors in series carry phi_in to ground
    tiny = JunctionParams(1e-12, 1e-12)
    circ = ChainCircuit((tiny,) * 3, (2.0, 3.0, 4.0), (5.0, 6.0))
    sol = solve_equilibrium(circ, SpinConfig((1, 1, 1)))
    want = 1.0 / sum(1.0 / el_ghz(x) for x in (2.0, 3.0, 4.0))
    assert sol.inductive_energy == pytest.approx(want, rel=1e-6)


def test_single_junction_closed_form():
    # one junction parallel to one inductor: E_L = E_l - A cos(drop - gamma sigma) curvature
    circ = ChainCircuit.uniform([0.4], [0.3], 5.0, 5.0)
    for s in (1, -1):
        sol = solve_equilibrium(circ, SpinConfig((s,)))
        amp = np.hypot(0.4, 0.3)
        gam = np.arctan2(0.3, 0.4)
        assert sol.inductive_energy == pytest.approx(circ.vertical_energies[0] + amp * np.cos(sol.x[0] - gam * s), rel=1e-12)


def test_nonconvergence_reported():
    with pytest.raises(NonConvergence):
        solve_equilibrium(reference_circuit(), SpinConfig((1, 1, 1)), max_iter=1, tol=1e-30)


def test_start_on_maximum_restarts_to_minimum():
    # strong junction, weak inductor: the potential has local maxima
    circ = ChainCircuit.uniform([8.0], [6.0], 100.0, 100.0)
    phi = np.linspace(-10, 10, 20001)
    grad = np.array([circ.gradient([p], (1,))[0] for p in phi])
    roots = phi[:-1][np.sign(grad[:-1]) != np.sign(grad[1:])]
    maxima = [p for p in roots if circ.hessian([p], (1,))[0, 0] < 0]
    assert maxima
    ref = min(circ.potential_energy([p], (1,)) for p in phi)
    for p in maxima:
        sol = solve_equilibrium(circ, SpinConfig((1,)), x0=[p])
        assert sol.hessian_at_min[0, 0] > 0
        assert sol.energy_g <= ref + 1e-6


def test_spectrum_sweep_is_smooth_and_kramers_symmetric(ref_circuit):
    grid = np.linspace(-np.pi, np.pi, 41)
    sweep = spectrum_vs_flux(ref_circuit, 0, grid)
    assert sweep.energies.shape == (41, 8)
    assert not sweep.discontinuities
    # time reversal: E(sigma, phi) = E(-sigma, -phi)
    for c in range(8):
        assert np.allclose(sweep.energies[:, c], sweep.energies[::-1, 7 - c], atol=1e-9)
    with pytest.raises(ValueError):
        spectrum_vs_flux(ref_circuit, 0, [0.0, 0.2, 0.1])
