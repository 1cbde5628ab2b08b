"""Voltage-trimming circuit model and Stark-shift tuning planner.

A trimming transistor in series with the downstream load forms a divider;
its channel resistance, set through a stored threshold voltage, fixes the
dot-gate voltage and hence the g-factor of the qubit under that gate.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .hamiltonians import StarkCalibration, g_shift_to_voltage
from .qcore import DomainError

__all__ = [
    "FAILURE_REASONS",
    "TrimmerDevice",
    "DotVoltageWindow",
    "CrossbarAddress",
    "Assignment",
    "TrimPlan",
    "divider_voltage",
    "required_channel_resistance",
    "subthreshold_resistance",
    "crossbar_select",
    "nearest_band",
    "trim_plan",
    "stability_margin",
]

FAILURE_REASONS = ("out_of_stark_range", "outside_single_electron_window",
                   "resistance_out_of_range")


@dataclass(frozen=True)
class TrimmerDevice:
    """Series trimming transistor and its downstream load (ohms, volts)."""

    r_d: float = 1e5
    r0: float = 1e5
    subthreshold_slope: float = 0.1
    v_th: float = 0.0
    v_g: float = 0.0
    r_max: float = 1e12

    def __post_init__(self):
        for name in ("r_d", "r0", "subthreshold_slope", "r_max"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class DotVoltageWindow:
    """Gate voltages (V) where the dot holds one electron: ``(v_1e, v_2e)``."""

    v_1e: float
    v_2e: float
    v_dd: float

    def __post_init__(self):
        if not 0 < self.v_1e < self.v_2e:
            raise DomainError("need 0 < v_1e < v_2e")
        if self.v_dd < self.v_2e:
            raise DomainError("v_dd must be >= v_2e")

    def contains(self, v):
        return self.v_1e < v < self.v_2e


@dataclass(frozen=True, order=True)
class CrossbarAddress:
    word_line: int
    bit_line: int

    def __post_init__(self):
        if self.word_line < 0 or self.bit_line < 0:
            raise DomainError("crossbar indices must be non-negative")


def divider_voltage(v_dd, r_ch, r_d):
    """Gate voltage ``v_dd r_d / (r_d + r_ch)`` behind the trimming channel."""
    r_ch = np.asarray(r_ch, dtype=float)
    if not r_d > 0:
        raise DomainError(f"r_d must be positive, got {r_d}")
    if np.any(r_ch < 0):
        raise DomainError("r_ch must be non-negative")
    out = v_dd * r_d / (r_d + r_ch)
    return float(out) if np.ndim(out) == 0 else out


def required_channel_resistance(v_target, v_dd, r_d):
    """Channel resistance giving ``v_target`` at the dot gate."""
    if not r_d > 0:
        raise DomainError(f"r_d must be positive, got {r_d}")
    v = np.asarray(v_target, dtype=float)
    if np.any(v <= 0) or np.any(v > v_dd):
        raise DomainError(f"v_target must lie in (0, v_dd={v_dd}]")
    out = r_d * (v_dd - v) / v
    return float(out) if np.ndim(out) == 0 else out


def subthreshold_resistance(dev: TrimmerDevice) -> float:
    """``r0 exp((v_th - v_g) / slope)``, capped at ``dev.r_max``."""
    x = (dev.v_th - dev.v_g) / dev.subthreshold_slope
    # compare in log space so large exponents do not overflow
    if x >= np.log(dev.r_max / dev.r0):
        return float(dev.r_max)
    return float(dev.r0 * np.exp(x))


def crossbar_select(n_word: int, n_bit: int, word_lines, bit_lines):
    """Cells enabled when both their word line and bit line are driven."""
    words, bits = set(word_lines), set(bit_lines)
    for w in words:
        if not 0 <= w < n_word:
            raise DomainError(f"word line {w} outside 0..{n_word - 1}")
    for b in bits:
        if not 0 <= b < n_bit:
            raise DomainError(f"bit line {b} outside 0..{n_bit - 1}")
    return {CrossbarAddress(w, b) for w, b in itertools.product(words, bits)}


@dataclass(frozen=True)
class Assignment:
    qubit: int
    band_index: int
    delta_g: float
    delta_v: float
    v_qd: float
    r_ch: float | None
    status: str = "ok"


@dataclass
class TrimPlan:
    assignments: list
    failures: list  # (qubit, reason, Assignment)
    metadata: dict = field(default_factory=dict)

    @property
    def n_failures(self):
        return len(self.failures)

    def rows(self):
        recs = list(self.assignments) + [a for _, _, a in self.failures]
        return sorted(recs, key=lambda a: a.qubit)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["qubit", "band_index", "delta_g", "delta_v_V", "v_qd_V", "r_ch_ohm", "status"])
            for a in self.rows():
                w.writerow([a.qubit, a.band_index, f"{a.delta_g:.17g}", f"{a.delta_v:.17g}",
                            f"{a.v_qd:.17g}", "" if a.r_ch is None else f"{a.r_ch:.17g}", a.status])


def nearest_band(g, bands):
    """Index of the band closest to ``g``; exact ties go to the lower band."""
    bands = np.asarray(bands, dtype=float)
    j = int(np.searchsorted(bands, g))
    if j == 0:
        return 0
    if j == len(bands):
        return len(bands) - 1
    return j - 1 if g - bands[j - 1] <= bands[j] - g else j


def trim_plan(g_samples, sidebands, max_shift, cal: StarkCalibration,
              window: DotVoltageWindow, dev: TrimmerDevice, v_baseline: float,
              direct: bool = False) -> TrimPlan:
    """Assign each qubit to its nearest sideband and size the trim.

    Parameters
    ----------
    g_samples : array_like
        Per-qubit g-factor offsets.
    sidebands : array_like
        Band positions in g-factor units, sorted ascending.
    max_shift : float or (float, float)
        Stark tuning range; a pair gives ``(down, up)`` limits.
    v_baseline : float
        Untrimmed dot-gate voltage (V).
    direct : bool
        Stored voltage drives the gate directly, so no channel resistance is
        needed and only the single-electron window is checked.
    """
    bands = np.asarray(sidebands, dtype=float)
    if bands.size == 0:
        raise DomainError("sidebands must not be empty")
    if np.any(np.diff(bands) < 0):
        raise DomainError("sidebands must be sorted")
    down, up = (max_shift, max_shift) if np.ndim(max_shift) == 0 else max_shift
    if down < 0 or up < 0:
        raise DomainError("max_shift must be non-negative")
    ok, bad = [], []
    for q, g in enumerate(np.asarray(g_samples, dtype=float)):
        k = nearest_band(g, bands)
        dg = float(bands[k] - g)
        dv = float(g_shift_to_voltage(dg, cal))
        v = v_baseline + dv
        reason, r_ch = None, None
        if dg > up or -dg > down:
            reason = "out_of_stark_range"
        elif not window.contains(v):
            reason = "outside_single_electron_window"
        elif not direct:
            r_ch = required_channel_resistance(v, window.v_dd, dev.r_d)
            if r_ch > dev.r_max:
                reason = "resistance_out_of_range"
        a = Assignment(q, k, dg, dv, v, r_ch, reason or "ok")
        if reason:
            bad.append((q, reason, a))
        else:
            ok.append(a)
    meta = {"n_qubits": len(ok) + len(bad), "n_bands": int(bands.size),
            "max_shift": [down, up], "v_baseline": v_baseline, "direct": direct}
    return TrimPlan(ok, bad, meta)


def stability_margin(window_dg: float) -> float:
    """Allowed g-factor drift after trimming: half the pulse's robust window.

    ``window_dg`` is the total width (in g units) of the region where the
    gate infidelity stays below the chosen threshold.
    """
    if window_dg < 0:
        raise DomainError("window width must be non-negative")
    return 0.5 * window_dg
