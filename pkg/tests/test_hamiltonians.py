import warnings

import numpy as np
import pytest

from edgedot.hamiltonians import (BOHR_MHZ_PER_T, EXCHANGE_OP, ExchangeValidityWarning, MediatorParams,
                                  SingleQubitFrame, StarkCalibration, TwoQubitFrame, build_single_qubit_h,
                                  build_two_qubit_h, detuning_to_g_shift, exchange_vs_mediator_voltage,
                                  frequency_to_detuning, g_shift_to_detuning, g_shift_to_frequency,
                                  g_shift_to_voltage, mediated_exchange, voltage_to_g_shift)
from edgedot.pulses import PulseEnvelope
from edgedot.qcore import DomainError, is_hermitian

from oracles import mediated_exchange_direct, single_qubit_segments, two_qubit_segments


def test_single_qubit_segments_match_oracle():
    rng = np.random.default_rng(1)
    i, q = rng.uniform(-1, 1, 7), rng.uniform(-1, 1, 7)
    env = PulseEnvelope(0.1, i, q)
    h = build_single_qubit_h(env, SingleQubitFrame(0.3))
    assert np.allclose(h.segments, single_qubit_segments(i, q, 0.3))
    assert all(is_hermitian(s) for s in h.segments)


def test_two_qubit_segments_match_oracle():
    rng = np.random.default_rng(2)
    i, q, ej = rng.uniform(-1, 1, 5), rng.uniform(-1, 1, 5), rng.uniform(0, 1, 5)
    env = PulseEnvelope(0.1, i, q, ej)
    h = build_two_qubit_h(env, TwoQubitFrame(0.2, -0.1))
    assert np.allclose(h.segments, two_qubit_segments(i, q, ej, 0.2, -0.1))


def test_exchange_operator_is_zz_form():
    z = np.diag([1.0, -1.0])
    assert np.allclose(EXCHANGE_OP, (np.kron(z, z) - np.eye(4)) / 2)


def test_exchange_validity_strict_and_warn():
    env = PulseEnvelope(0.1, [0.0], [0.0], [10.0])
    frame = TwoQubitFrame(e_z=50.0)
    with pytest.raises(DomainError):
        build_two_qubit_h(env, frame)
    with pytest.warns(ExchangeValidityWarning):
        build_two_qubit_h(env, frame, strict=False)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_two_qubit_h(env, TwoQubitFrame())


def test_single_qubit_rejects_exchange_channel():
    with pytest.raises(DomainError):
        build_single_qubit_h(PulseEnvelope(0.1, [0.0], [0.0], [0.1]), SingleQubitFrame())


def test_frames_reject_non_finite():
    with pytest.raises(DomainError):
        SingleQubitFrame(np.nan)
    with pytest.raises(DomainError):
        TwoQubitFrame(np.inf, 0.0)


def test_mediated_exchange_matches_direct_formula():
    rng = np.random.default_rng(3)
    for _ in range(20):
        args = rng.uniform(0.1, 50, 5)
        j = mediated_exchange(MediatorParams(*args))
        assert abs(j - mediated_exchange_direct(*args)) <= 1e-12 * abs(j)


def test_mediated_exchange_scaling():
    p = MediatorParams(10.0, 20.0, 100.0, 200.0, 300.0)
    j = mediated_exchange(p)
    assert np.isclose(mediated_exchange(MediatorParams(20.0, 20.0, 100.0, 200.0, 300.0)), 4 * j, rtol=1e-14)
    assert np.isclose(mediated_exchange(MediatorParams(10.0, 20.0, 100.0, 200.0, 600.0)), j / 2, rtol=1e-14)
    with pytest.raises(DomainError):
        mediated_exchange(MediatorParams(1.0, 1.0, 0.0, 1.0, 1.0))


def test_inverse_square_voltage_law():
    v = np.array([0.5, 1.0, 2.0])
    j = exchange_vs_mediator_voltage(v, 3.0, 1.0)
    assert np.array_equal(j * v**2, np.full(3, 3.0))
    with pytest.raises(DomainError):
        exchange_vs_mediator_voltage(-1.0, 1.0, 1.0)


def test_unit_conversions():
    cal = StarkCalibration()
    # mu_B/h is about 13996 MHz/T
    assert abs(BOHR_MHZ_PER_T - 13996.2) < 0.1
    assert np.isclose(g_shift_to_frequency(1e-4, cal), 1.39962, rtol=1e-5)
    # a 1 MHz Larmor offset is pi rad/us on sigma_z (no 1/2 in the drive Hamiltonian)
    assert frequency_to_detuning(1.0) == np.pi
    assert np.isclose(detuning_to_g_shift(g_shift_to_detuning(3e-5, cal), cal), 3e-5, rtol=1e-14)
    assert np.isclose(voltage_to_g_shift(g_shift_to_voltage(4.5e-4, cal), cal), 4.5e-4, rtol=1e-14)
    assert np.isclose(g_shift_to_voltage(4.5e-4, cal), 0.225)


def test_calibration_validation():
    with pytest.raises(DomainError):
        StarkCalibration(b0=0.0)
    with pytest.raises(DomainError):
        StarkCalibration(dg_dv=0.0)
