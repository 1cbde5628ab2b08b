import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgedot.hamiltonians import StarkCalibration
from edgedot.qcore import DomainError
from edgedot.trimmer import (CrossbarAddress, DotVoltageWindow, TrimmerDevice, crossbar_select,
                             divider_voltage, nearest_band, required_channel_resistance,
                             stability_margin, subthreshold_resistance, trim_plan)

from oracles import divider

WINDOW = DotVoltageWindow(1.0, 1.5, 1.5)


def plan(g, bands, **kw):
    return trim_plan(g, bands, kw.pop("max_shift", 4.5e-4), StarkCalibration(), WINDOW,
                     TrimmerDevice(), 1.25, **kw)


def test_divider_half_voltage():
    assert divider_voltage(1.5, 1e5, 1e5) == 0.75


@given(st.floats(1e2, 1e9), st.floats(1e3, 1e7), st.floats(0.1, 5.0))
@settings(max_examples=60, deadline=None)
def test_divider_matches_oracle_and_inverts(r_ch, r_d, v_dd):
    v = divider_voltage(v_dd, r_ch, r_d)
    assert abs(v - divider(v_dd, r_ch, r_d)) <= 1e-12 * v_dd
    back = required_channel_resistance(v, v_dd, r_d)
    assert abs(back - r_ch) <= 1e-12 * max(r_ch, r_d) * 10


def test_divider_validation():
    with pytest.raises(DomainError):
        divider_voltage(1.0, -1.0, 1.0)
    with pytest.raises(DomainError):
        required_channel_resistance(2.0, 1.5, 1e5)


def test_subthreshold_clamp():
    dev = TrimmerDevice(v_th=0.5, v_g=0.0, subthreshold_slope=0.1)
    assert np.isclose(subthreshold_resistance(dev), 1e5 * np.exp(5.0))
    assert subthreshold_resistance(TrimmerDevice(v_th=1e4)) == 1e12


def test_crossbar_selects_intersections():
    cells = crossbar_select(4, 4, [1], [0, 2])
    assert cells == {CrossbarAddress(1, 0), CrossbarAddress(1, 2)}
    with pytest.raises(DomainError):
        crossbar_select(2, 2, [2], [0])


def test_nearest_band_ties_go_low():
    bands = [-1.0, 0.0, 1.0]
    assert nearest_band(0.5, bands) == 1
    assert nearest_band(-0.5, bands) == 0
    assert nearest_band(5.0, bands) == 2 and nearest_band(-5.0, bands) == 0


def test_plan_assignment_fields():
    p = plan([1e-4, -2e-4], [0.0])
    assert p.n_failures == 0
    a = p.assignments[0]
    assert np.isclose(a.delta_g, -1e-4) and np.isclose(a.delta_v, -0.05)
    assert np.isclose(a.v_qd, 1.2)
    assert np.isclose(divider_voltage(1.5, a.r_ch, 1e5), a.v_qd, rtol=1e-12)


def test_plan_failure_reasons():
    assert plan([1e-3], [0.0]).failures[0][1] == "out_of_stark_range"
    p = trim_plan([-4e-4], [0.0], 4.5e-4, StarkCalibration(), WINDOW, TrimmerDevice(), 1.45)
    assert p.failures[0][1] == "outside_single_electron_window"
    p = trim_plan([-1e-4], [0.0], 4.5e-4, StarkCalibration(), WINDOW, TrimmerDevice(r_max=1e3), 1.25)
    assert p.failures[0][1] == "resistance_out_of_range"
    assert trim_plan([-1e-4], [0.0], 4.5e-4, StarkCalibration(), WINDOW,
                     TrimmerDevice(r_max=1e3), 1.25, direct=True).n_failures == 0
    with pytest.raises(DomainError):
        plan([0.0], [])


def test_asymmetric_range():
    p = plan([1e-4, -1e-4], [0.0], max_shift=(2e-4, 0.5e-4))
    assert [q for q, _, _ in p.failures] == [1]


def test_more_bands_fewer_failures():
    g = np.random.default_rng(0).normal(0, 5e-3, 1000)
    f10 = plan(g, np.linspace(-1.5e-2, 1.5e-2, 10)).n_failures
    f100 = plan(g, np.linspace(-1.5e-2, 1.5e-2, 100)).n_failures
    assert f10 > 0 and f100 < f10
    # every N=100 failure lies beyond the outermost band plus the tuning range
    p = plan(g, np.linspace(-1.5e-2, 1.5e-2, 100))
    assert all(abs(g[q]) > 1.5e-2 + 4.5e-4 for q, _, _ in p.failures)


def test_csv_export(tmp_path):
    p = plan([1e-4, 1e-3], [0.0])
    p.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0].startswith("qubit,band_index") and len(lines) == 3


def test_stability_margin():
    assert stability_margin(4e-5) == 2e-5
    with pytest.raises(DomainError):
        stability_margin(-1.0)
