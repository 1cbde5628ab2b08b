import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from edgedot.qcore import (CNOT, CZ, HADAMARD, I2, SX, SY, SZ, DomainError,
                           SegmentedHamiltonian, best_local_z, chain_product, expm_segments,
                           gate_fidelity, is_hermitian, is_unitary, kron, local_z, propagate)

from oracles import best_local_z_brute, fidelity_loop, propagate_expm


def random_hermitian(rng, d, k):
    a = rng.normal(size=(k, d, d)) + 1j * rng.normal(size=(k, d, d))
    return (a + np.conj(np.swapaxes(a, -1, -2))) / 2


@pytest.mark.parametrize("d", [2, 4, 8])
def test_propagate_matches_expm_oracle(d):
    rng = np.random.default_rng(d)
    segs = random_hermitian(rng, d, 13)
    u = propagate(SegmentedHamiltonian(0.037, segs))
    assert np.allclose(u, propagate_expm(segs, 0.037), atol=1e-12)
    assert is_unitary(u)


def test_expm_2x2_zero_generator_is_identity():
    u = expm_segments(np.zeros((3, 2, 2), dtype=complex), 0.5)
    assert np.allclose(u, np.eye(2))


def test_time_ordering_later_segment_on_left():
    segs = np.array([SX, SZ]) * np.pi / 4
    u = propagate(SegmentedHamiltonian(1.0, segs))
    first = propagate_expm(segs[:1], 1.0)
    second = propagate_expm(segs[1:], 1.0)
    assert np.allclose(u, second @ first)
    assert not np.allclose(u, first @ second)


def test_empty_hamiltonian_is_identity():
    h = SegmentedHamiltonian(0.1, np.zeros((0, 4, 4)))
    assert np.array_equal(propagate(h), np.eye(4))
    assert np.array_equal(chain_product(np.zeros((0, 2, 2))), np.eye(2))


def test_segmented_hamiltonian_validation():
    with pytest.raises(DomainError):
        SegmentedHamiltonian(0.1, np.zeros((2, 3, 3)))
    with pytest.raises(DomainError):
        SegmentedHamiltonian(0.0, np.zeros((2, 2, 2)))
    with pytest.raises(DomainError):
        SegmentedHamiltonian(0.1, np.array([[[0, 1], [0, 0]]], dtype=complex))
    with pytest.raises(DomainError):
        SegmentedHamiltonian(0.1, np.zeros((1, 2**11, 2**11)))


def test_square_pi_pulse_gives_x():
    # constant sigma_x coefficient pi/2 for 1 us rotates by pi
    u = propagate(SegmentedHamiltonian(0.01, np.repeat((np.pi / 2 * SX)[None], 100, axis=0)))
    assert 1 - gate_fidelity(u, SX) < 1e-12


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_fidelity_matches_loop_oracle_and_bounds(seed):
    u = unitary_group.rvs(4, random_state=seed)
    t = unitary_group.rvs(4, random_state=seed + 1)
    f = gate_fidelity(u, t)
    assert 0.0 <= f <= 1.0
    assert abs(f - fidelity_loop(u, t)) < 1e-12
    assert abs(gate_fidelity(u, u) - 1.0) < 1e-12
    assert abs(gate_fidelity(np.exp(0.7j) * u, u) - 1.0) < 1e-12


def test_fidelity_shape_mismatch():
    with pytest.raises(DomainError):
        gate_fidelity(I2, CZ)
    with pytest.raises(DomainError):
        gate_fidelity(SX, SX, "local_z_and_global")
    with pytest.raises(DomainError):
        gate_fidelity(SX, SX, "bogus")


def test_exchange_quarter_area_is_cz_up_to_local_z():
    u = np.diag(np.exp(-1j * np.pi / 2 * np.array([0, -1, -1, 0])))
    assert gate_fidelity(u, CZ) < 0.6
    assert 1 - gate_fidelity(u, CZ, "local_z_and_global") < 1e-12


@given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi), st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_best_local_z_beats_brute_grid(a, b, seed):
    base = unitary_group.rvs(4, random_state=seed)
    u = local_z(a, b).conj().T @ CZ
    # exact recovery on a pure phase error
    assert 1 - gate_fidelity(u, CZ, "local_z_and_global") < 1e-10
    f_opt = gate_fidelity(base, CZ, "local_z_and_global")
    assert f_opt >= best_local_z_brute(base, CZ, 180) - 1e-9


def test_helpers():
    assert is_hermitian(SY) and not is_hermitian(SY @ SX + SX)
    assert np.allclose(kron(SX, SZ), np.kron(SX, SZ))
    assert np.allclose(kron(I2, HADAMARD) @ CZ @ kron(I2, HADAMARD), CNOT)
    a, b = best_local_z(CZ, CZ)
    assert np.allclose(local_z(a, b), np.eye(4), atol=1e-6)
