import re
import sys

import numpy as np
import pytest

from isene import effective_model, reference_circuit, solve_all, static_hamiltonian
from isene.resonator import TransmissionLine, calibrate_length


@pytest.fixture(scope="session")
def ref_circuit():
    return reference_circuit()


@pytest.fixture(scope="session")
def ref_model(ref_circuit):
    return effective_model(ref_circuit)


@pytest.fixture(scope="session")
def ref_ham(ref_model):
    return static_hamiltonian(ref_model.ising.couplings)


@pytest.fixture(scope="session")
def ref_a(ref_model):
    return ref_model.edsr.matrix


@pytest.fixture(scope="session")
def ref_line(ref_circuit):
    # 9 GHz needs a line shorter than 0.1 mm at 5/5 nH
    e_ls = np.array([s.inductive_energy for s in solve_all(ref_circuit)])
    line = TransmissionLine()
    return line.with_length(calibrate_length(e_ls, line, 9.0, bounds=(1e-5, 3.3e-3)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    lines = dict(mod.RESULTS)
    for rep in terminalreporter.stats.get("failed", []) + terminalreporter.stats.get("error", []):
        m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", rep.nodeid)
        if m and int(m.group(1)) not in lines:
            n = int(m.group(1))
            lines[n] = f"criterion {n:2d}: FAIL  did not complete ({rep.longrepr.reprcrash.message if hasattr(rep.longrepr, 'reprcrash') else 'error'})"
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
