import json

import numpy as np
import pytest
from scipy.stats import unitary_group

from edgedot.qcore import SX, SZ, DomainError
from edgedot.surface_cell import (Action, CycleSchedule, CycleTiming, PatchConfig, SpinRegister, StepRecord,
                                  build_schedule, cycle_time, run_cycles, schedule_to_json,
                                  singlet_invariance_check, singlet_projector, stabilizer_projector,
                                  tick_tock_cnot_check, timing_budget, write_syndromes_csv)

from oracles import pauli_string, singlet, stabilizer_eigenstate

DATA = [0, 1, 2, 3]


def ghz():
    psi = np.zeros(256, dtype=complex)
    psi[0] = psi[0b11110000] = 1 / np.sqrt(2)
    return SpinRegister(8, psi)


def test_schedule_shape():
    s = build_schedule()
    assert [st.index for st in s.steps] == list(range(1, 13))
    had = [st.index for st in s.steps if st.find("global_hadamard")]
    cz = [st.index for st in s.steps if st.find("cz_set")]
    sh = [st.index for st in s.steps if st.find("shuttle")]
    assert had == [2, 4, 7, 9, 12] and cz == [3, 6, 8, 11] and sh == [5, 10]


def test_schedule_durations_sum_to_cycle_time():
    t = CycleTiming(6.0, 4.0, 0.5)
    lookup = {"tau_h": t.tau_h, "tau_cz": t.tau_cz, "tau_shuttle": t.tau_shuttle, "none": 0.0}
    assert sum(lookup[st.duration] for st in build_schedule().steps) == cycle_time(t)


def test_overlapping_cz_rejected():
    steps = list(build_schedule().steps)
    steps[2] = StepRecord(3, (Action("cz_set", (("X1", "D1A"), ("X1", "D2A"))),), "tau_cz")
    with pytest.raises(DomainError):
        CycleSchedule(tuple(steps))
    with pytest.raises(DomainError):
        Action("teleport")


def test_cycle_time_and_budget():
    t = CycleTiming(6.0, 4.0)
    assert cycle_time(t) == 46.0
    b = timing_budget(t)
    assert b["window_min_us"] == 12.0 and b["window_max_us"] == 28.0
    assert np.isclose(b["init_budget_min_us"], 6.4) and np.isclose(b["init_budget_max_us"], 22.4)
    assert b["init_fits_min_window"]
    with pytest.raises(DomainError):
        CycleTiming(-1.0, 4.0)


def test_tick_tock_and_singlet_invariance():
    assert tick_tock_cnot_check()
    assert singlet_invariance_check() < 1e-10


def test_singlet_projector_against_oracle():
    s = singlet()
    assert np.allclose(singlet_projector(), np.outer(s, s.conj()))
    u = unitary_group.rvs(2, random_state=5)
    p = singlet_projector()
    uu = np.kron(u, u)
    assert np.max(np.abs(uu @ p - p @ uu)) < 1e-12


def test_register_apply_matches_dense():
    rng = np.random.default_rng(0)
    v = rng.normal(size=16) + 1j * rng.normal(size=16)
    reg = SpinRegister(4, v / np.linalg.norm(v))
    reg2 = reg.copy()
    reg2.apply(SX, [2])
    dense = pauli_string([SX], 4, [2]) @ reg.amplitudes
    assert np.allclose(reg2.amplitudes, dense)
    assert np.isclose(reg.expectation(SZ, [1]).real,
                      np.vdot(reg.amplitudes, pauli_string([SZ], 4, [1]) @ reg.amplitudes).real)
    with pytest.raises(DomainError):
        SpinRegister(11)


@pytest.mark.parametrize("xs, zs", [(1, 1), (1, -1), (-1, 1), (-1, -1)])
def test_deterministic_syndromes_on_eigenstates(xs, zs):
    reg = SpinRegister(8, stabilizer_eigenstate(8, DATA, xs, zs, seed=3))
    seen = {tuple(run_cycles(reg, 1, seed=s)[0][0]) for s in range(20)}
    assert seen == {(xs, zs)}


def test_projectors_match_oracle():
    px = stabilizer_projector("X")
    assert np.allclose(px, (np.eye(256) + pauli_string([SX] * 4, 8, DATA)) / 2)


def test_injected_errors_flip_one_syndrome():
    def z_err(c, r):
        r.apply(SZ, [0])

    def x_err(c, r):
        r.apply(SX, [0])

    assert run_cycles(ghz(), 2, between=z_err)[0] == [(1, 1), (-1, 1)]
    assert run_cycles(ghz(), 2, between=x_err)[0] == [(1, 1), (1, -1)]


def test_species_swap_without_step1_hadamard():
    psi = np.zeros(256, dtype=complex)
    psi[0b00010000] = psi[0b11100000] = 1 / np.sqrt(2)
    reg = SpinRegister(8, psi)
    plain = run_cycles(reg, 3)[0]
    fixed = run_cycles(reg, 3, PatchConfig(step1_hadamard=True))[0]
    assert plain == [(1, -1), (-1, 1), (1, -1)]
    assert fixed == [(1, -1)] * 3


def test_repeatability_on_random_state():
    rng = np.random.default_rng(11)
    v = rng.normal(size=256) + 1j * rng.normal(size=256)
    reg = SpinRegister(8, v / np.linalg.norm(v))
    for seed in range(5):
        hist = run_cycles(reg, 3, PatchConfig(step1_hadamard=True), seed=seed)[0]
        assert hist[0] == hist[1] == hist[2]


def test_outputs(tmp_path):
    write_syndromes_csv([(1, -1)], tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == "cycle,x,z\n0,1,-1\n"
    doc = json.loads(schedule_to_json(build_schedule(), CycleTiming(6.0, 4.0)))
    assert isinstance(doc, (dict, list))
