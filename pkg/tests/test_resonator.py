import numpy as np
import pytest

from isene.resonator import (
    C_LIGHT,
    NonPositiveInductiveEnergy,
    TargetUnreachable,
    TransmissionLine,
    calibrate_length,
    line_for_target,
    load_factor,
    readout_table,
    resonance_frequency,
    root_residual,
)

from oracles import cot_root

LINE = TransmissionLine(50.0, 0.39 * C_LIGHT, 1.0e-3)


def test_quarter_wave_limit():
    f_qw = 0.39 * C_LIGHT / (4 * 1.0e-3) * 1e-9
    assert LINE.quarter_wave == pytest.approx(f_qw, rel=1e-15)
    assert resonance_frequency(1e13, LINE) == pytest.approx(f_qw, rel=1e-9)
    assert resonance_frequency(np.inf, LINE) == f_qw


def test_root_matches_bisection():
    for e_l in (0.5, 5.0, 32.7, 500.0):
        k = load_factor(e_l, LINE)
        x = cot_root(k)
        f = x * LINE.v_eff / (2 * np.pi * LINE.length) * 1e-9
        assert resonance_frequency(e_l, LINE) == pytest.approx(f, abs=1e-9)
        assert abs(root_residual(resonance_frequency(e_l, LINE), e_l, LINE)) < 1e-8


def test_z_factor_scales_load():
    assert load_factor(10.0, LINE, z_factor=4.0) == pytest.approx(2 * load_factor(10.0, LINE), rel=1e-15)
    assert resonance_frequency(10.0, LINE, z_factor=0.5) > resonance_frequency(10.0, LINE)


def test_monotone_in_inductive_energy():
    e_l = np.geomspace(0.1, 1e4, 50)
    f = np.array([resonance_frequency(e, LINE) for e in e_l])
    assert np.all(np.diff(f) > 0)
    assert f[-1] < LINE.quarter_wave


def test_bad_inductive_energy():
    with pytest.raises(NonPositiveInductiveEnergy):
        resonance_frequency(0.0, LINE)
    with pytest.raises(NonPositiveInductiveEnergy):
        resonance_frequency(-np.inf, LINE)
    with pytest.raises(ValueError):
        TransmissionLine(50.0, C_LIGHT, 1.0)


def test_calibration_closure():
    e_ls = np.array([30.0, 31.0, 29.5, 30.5])
    line = TransmissionLine()
    length = calibrate_length(e_ls, line, 6.0)
    f = readout_table(e_ls, line.with_length(length)).frequencies
    assert abs(f.mean() - 6.0) < 1e-9  # 1 Hz


def test_calibration_out_of_range():
    with pytest.raises(TargetUnreachable) as info:
        calibrate_length(np.array([30.0]), TransmissionLine(), 200.0)
    lo, hi = info.value.interval
    assert lo < hi < 200.0


def test_reference_chain_calibrates_with_short_line(ref_circuit):
    with pytest.raises(TargetUnreachable):
        line_for_target(ref_circuit, 9.0)
    line = TransmissionLine()
    e_ls = readout_table(ref_circuit, line.with_length(1e-3)).inductive_energies
    length = calibrate_length(e_ls, line, 9.0, bounds=(1e-5, 3.3e-3))
    assert 1e-5 < length < 1e-4
    table = readout_table(e_ls, line.with_length(length))
    assert abs(table.reference_frequency - 9.0) < 1e-9
