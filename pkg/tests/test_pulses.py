import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgedot.hamiltonians import SingleQubitFrame, build_single_qubit_h
from edgedot.pulses import (AmConfig, PulseEnvelope, am_bands, am_factor, am_modulate,
                            composite_square_hadamard, envelope_spectrum, read_envelope,
                            square_cz_envelope, square_rotation, write_envelope)
from edgedot.qcore import CZ, HADAMARD, SX, DomainError, gate_fidelity, propagate


def test_envelope_amplitude_limit():
    with pytest.raises(DomainError):
        PulseEnvelope(0.01, [2.0], [0.0], amp_limit=1.0)
    with pytest.raises(DomainError):
        PulseEnvelope(0.01, [0.0, 0.0], [0.0])
    with pytest.raises(DomainError):
        PulseEnvelope(0.01, [0.0], [0.0], [2.0], ej_limit=1.0)
    with pytest.raises(DomainError):
        PulseEnvelope(0.0, [0.0], [0.0])


def test_square_pi_duration_and_gate():
    env = square_rotation("x", np.pi)
    assert np.isclose(env.duration, 1.0)
    u = propagate(build_single_qubit_h(env, SingleQubitFrame()))
    assert 1 - gate_fidelity(u, SX) < 1e-12


def test_square_rotation_coarse_dt_rejected():
    with pytest.raises(DomainError):
        square_rotation("x", np.pi, dt=0.3)
    with pytest.raises(DomainError):
        square_rotation("z", np.pi)


def test_composite_hadamard():
    env = composite_square_hadamard()
    assert np.isclose(env.duration, 1.5)
    u = propagate(build_single_qubit_h(env, SingleQubitFrame()))
    assert 1 - gate_fidelity(u, HADAMARD) < 1e-12


def test_square_cz_area():
    env = square_cz_envelope(4.0)
    assert np.isclose(np.sum(env.ej) * env.dt, np.pi / 2)
    assert np.all(env.i == 0) and np.all(env.q == 0)


def test_subdivide_and_concatenate():
    env = square_rotation("y", np.pi / 2)
    fine = env.subdivide(4)
    assert np.isclose(fine.duration, env.duration)
    u1 = propagate(build_single_qubit_h(env, SingleQubitFrame(0.2)))
    u2 = propagate(build_single_qubit_h(fine, SingleQubitFrame(0.2)))
    assert np.allclose(u1, u2)
    with pytest.raises(DomainError):
        env.then(fine)


@given(st.floats(0.1, 40.0), st.integers(1, 12))
@settings(max_examples=40, deadline=None)
def test_am_factor_equals_band_sum(omega, n):
    cfg = AmConfig(omega, n)
    tau = 6.0
    t = np.linspace(0, tau, 57)
    direct = am_factor(cfg, t, tau)
    bands = am_bands(cfg, tau)
    assert len(bands) == n
    summed = sum(np.exp(1j * (nu * t - psi)) for nu, psi in bands)
    assert np.allclose(direct, summed.real, atol=1e-10)
    assert np.allclose(summed.imag, 0.0, atol=1e-10)


def test_am_band_spacing():
    w = 2 * np.pi * 4.0
    odd = [nu for nu, _ in am_bands(AmConfig(w, 5), 1.0)]
    even = [nu for nu, _ in am_bands(AmConfig(w, 4), 1.0)]
    assert np.allclose(np.diff(odd), w / 2)
    assert np.allclose(np.diff(even), w / 2)
    assert np.isclose(even[2], w / 4)


def test_am_single_band_is_identity():
    env = composite_square_hadamard()
    out = am_modulate(env, AmConfig(1.0, 1))
    assert np.array_equal(out.i, env.i) and np.array_equal(out.q, env.q)


def test_spectrum_finds_n_peaks():
    # long constant probe so peaks are well resolved
    probe = PulseEnvelope(0.01, np.full(6000, 0.1), np.zeros(6000))
    f_am = 4.0
    out = am_modulate(probe, AmConfig(2 * np.pi * f_am, 6))
    peaks = envelope_spectrum(out, threshold=0.2)
    assert len(peaks) == 6
    freqs = np.array([f for f, _ in peaks])
    # neighbouring bands sit w/2 apart, i.e. f_am / 2 in MHz
    assert np.allclose(np.diff(freqs), f_am / 2, rtol=1e-4)
    assert np.allclose(freqs, -freqs[::-1], atol=1e-6)


def test_envelope_csv_round_trip(tmp_path):
    env = square_cz_envelope(1.0, dt=0.01)
    path = write_envelope(env, tmp_path / "cz.csv", {"note": "x"})
    back = read_envelope(path)
    assert np.array_equal(back.ej, env.ej) and back.dt == env.dt
    assert back.meta["note"] == "x"
    raw = path.read_bytes()
    assert b"\r\n" not in raw


def test_am_rejects_exchange():
    with pytest.raises(DomainError):
        am_modulate(square_cz_envelope(1.0), AmConfig(1.0, 3))
    with pytest.raises(DomainError):
        AmConfig(1.0, 0)
