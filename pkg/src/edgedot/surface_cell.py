"""Twelve-step XXXX/ZZZZ stabilizer cycle with singlet-triplet ancillas.

Data spins shuttle between two dots (A and B). Every single-qubit gate is a
global Hadamard; two-qubit gates are selective CZs. Each ancilla is a pair
of spins prepared as a singlet and read out as singlet versus triplet.

The state-vector model here is a verification substrate for the schedule:
a closed toy patch with four data spins, whose primed partners of steps 8
and 11 wrap onto the second pair of data spins.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .qcore import CNOT, CZ, HADAMARD, I2, SX, DomainError, kron

__all__ = [
    "SITES",
    "Action",
    "StepRecord",
    "CycleSchedule",
    "build_schedule",
    "tick_tock_cnot_check",
    "SINGLET",
    "singlet_projector",
    "singlet_invariance_check",
    "SpinRegister",
    "PatchConfig",
    "CycleOutcome",
    "simulate_cycle",
    "run_cycles",
    "stabilizer_projector",
    "CycleTiming",
    "cycle_time",
    "timing_budget",
    "write_syndromes_csv",
    "schedule_to_json",
]

SITES = ("D1A", "D1B", "D2A", "D2B", "D1A'", "D1B'", "D2A'", "D2B'",
         "X1", "X2", "Z1", "Z2")
_KINDS = ("global_hadamard", "cz_set", "shuttle", "init_ancilla", "measure_ancilla", "idle")

_ALL = ("D1", "D2", "D1'", "D2'", "X1", "X2", "Z1", "Z2")


@dataclass(frozen=True)
class Action:
    kind: str
    operands: tuple = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown action kind {self.kind!r}")


@dataclass(frozen=True)
class StepRecord:
    index: int
    actions: tuple
    duration: str  # "tau_h", "tau_cz", "tau_shuttle" or "none"
    note: str = ""

    @property
    def kinds(self):
        return tuple(a.kind for a in self.actions)

    def find(self, kind):
        return [a for a in self.actions if a.kind == kind]


@dataclass(frozen=True)
class CycleSchedule:
    steps: tuple

    def __post_init__(self):
        if len(self.steps) != 12:
            raise DomainError("a cycle has exactly 12 steps")
        for s in self.steps:
            for a in s.find("cz_set"):
                flat = [x for pair in a.operands for x in pair]
                if len(flat) != len(set(flat)):
                    raise DomainError(f"step {s.index}: CZ pairs overlap")

    def step(self, index):
        return self.steps[index - 1]


def build_schedule() -> CycleSchedule:
    """Canonical 12-step cycle.

    Hadamards at 2, 4, 7, 9, 12; CZs at 3 and 6 (inside the cell) and at 8
    and 11 (with primed partners in adjacent cells); shuttles at 5 and 10.
    The X ancilla is prepared at step 1 and read at step 12; the Z ancilla is
    prepared at step 2 and read at step 1 of the following cycle.
    """
    data_a = ("D1A", "D2A")
    data_b = ("D1B", "D2B")
    every_a = data_a + ("D1A'", "D2A'", "X1", "X2", "Z1", "Z2")
    every_b = data_b + ("D1B'", "D2B'", "X1", "X2", "Z1", "Z2")
    steps = (
        StepRecord(1, (Action("init_ancilla", ("X1", "X2")),
                       Action("measure_ancilla", ("Z1", "Z2")),
                       Action("idle", data_a)), "none",
                   "Z readout belongs to the previous cycle"),
        StepRecord(2, (Action("global_hadamard", data_a + ("D1A'", "D2A'", "X1", "X2")),
                       Action("init_ancilla", ("Z1", "Z2"))), "tau_h"),
        StepRecord(3, (Action("cz_set", (("X1", "D1A"), ("X2", "D2A"))),), "tau_cz", "internal"),
        StepRecord(4, (Action("global_hadamard", every_a),), "tau_h"),
        StepRecord(5, (Action("shuttle", (("D1A", "D1B"), ("D2A", "D2B"),
                                          ("D1A'", "D1B'"), ("D2A'", "D2B'"))),), "tau_shuttle"),
        StepRecord(6, (Action("cz_set", (("Z1", "D1B"), ("Z2", "D2B"))),), "tau_cz", "internal"),
        StepRecord(7, (Action("global_hadamard", every_b),), "tau_h",
                   "cancels step 4 on the X ancilla"),
        StepRecord(8, (Action("cz_set", (("X1", "D1B'"), ("X2", "D2B'"))),), "tau_cz", "external"),
        StepRecord(9, (Action("global_hadamard", every_b),), "tau_h"),
        StepRecord(10, (Action("shuttle", (("D1B", "D1A"), ("D2B", "D2A"),
                                           ("D1B'", "D1A'"), ("D2B'", "D2A'"))),), "tau_shuttle"),
        StepRecord(11, (Action("cz_set", (("Z1", "D1A'"), ("Z2", "D2A'"))),), "tau_cz", "external"),
        StepRecord(12, (Action("global_hadamard", every_a),
                        Action("measure_ancilla", ("X1", "X2"))), "tau_h",
                   "unpaired data Hadamard swaps ancilla species next cycle "
                   "unless a global Hadamard is applied at step 1"),
    )
    return CycleSchedule(steps)


def tick_tock_cnot_check(tol: float = 1e-12) -> bool:
    """Check that Hadamards around a CZ give a CNOT, plus the helper identities."""
    ih = kron(I2, HADAMARD)
    perm = [0, 2, 1, 3]  # qubit swap
    checks = (
        np.max(np.abs(ih @ CZ @ ih - CNOT)) < tol,
        np.max(np.abs(HADAMARD @ HADAMARD - I2)) < tol,
        np.max(np.abs(CZ[perm][:, perm] - CZ)) < tol,
    )
    return bool(all(checks))


SINGLET = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
_TRIPLETS = (
    np.array([1, 0, 0, 0], dtype=complex),
    np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2),
    np.array([0, 0, 0, 1], dtype=complex),
)


def singlet_projector():
    return np.outer(SINGLET, np.conj(SINGLET))


def singlet_invariance_check(u=None, trials: int = 100, seed: int = 0) -> float:
    """Largest commutator ``||[U (x) U, P]||_max`` over singlet and triplet projectors.

    With ``u`` given, only that rotation is tested. Otherwise ``trials``
    Haar-random single-spin unitaries are drawn.
    """
    from scipy.stats import unitary_group

    ps = singlet_projector()
    pt = np.eye(4) - ps
    if u is not None:
        us = [np.asarray(u, dtype=complex)]
    else:
        us = unitary_group.rvs(2, size=trials, random_state=seed)
        us = [us] if trials == 1 else list(us)
    dev = 0.0
    for v in us:
        uu = np.kron(v, v)
        for p in (ps, pt):
            dev = max(dev, float(np.max(np.abs(uu @ p - p @ uu))))
    return dev


class SpinRegister:
    """State vector over ``n_spins`` spin-1/2 particles (spin 0 most significant)."""

    def __init__(self, n_spins: int, amplitudes=None):
        if not 1 <= n_spins <= 10:
            raise DomainError("n_spins must be in 1..10")
        self.n_spins = n_spins
        if amplitudes is None:
            amplitudes = np.zeros(2**n_spins, dtype=complex)
            amplitudes[0] = 1.0
        amp = np.array(amplitudes, dtype=complex).reshape(-1)
        if amp.size != 2**n_spins:
            raise DomainError("amplitude length does not match n_spins")
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > 1e-10:
            raise DomainError(f"state not normalized (norm {norm})")
        self.amplitudes = amp

    def copy(self):
        return SpinRegister(self.n_spins, self.amplitudes.copy())

    @property
    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def _tensor(self):
        return self.amplitudes.reshape((2,) * self.n_spins)

    def apply(self, op, spins):
        """Apply a ``2^k x 2^k`` operator to the listed spins, in order."""
        spins = list(spins)
        k = len(spins)
        if len(set(spins)) != k:
            raise DomainError("repeated spin in operator support")
        op = np.asarray(op, dtype=complex).reshape((2,) * (2 * k))
        psi = np.tensordot(op, self._tensor(), axes=(list(range(k, 2 * k)), spins))
        psi = np.moveaxis(psi, list(range(k)), spins)
        self.amplitudes = psi.reshape(-1)
        return self

    def reduced_amplitudes(self, spins, basis_vec):
        """Unnormalized data state ``(<b| (x) I) psi`` for a vector on ``spins``."""
        k = len(spins)
        psi = np.moveaxis(self._tensor(), list(spins), list(range(k)))
        bra = np.conj(np.asarray(basis_vec)).reshape((2,) * k)
        return np.tensordot(bra, psi, axes=(list(range(k)), list(range(k))))

    def expectation(self, op, spins):
        tmp = self.copy().apply(op, spins)
        return complex(np.vdot(self.amplitudes, tmp.amplitudes))


@dataclass
class PatchConfig:
    """Mapping from roles to register spins plus simulation options.

    ``spins`` maps the role names D1, D2, D1', D2', X1, X2, Z1, Z2 to register
    indices. ``shuttle_phase`` (rad) is a deterministic Z rotation
    ``diag(1, e^{i phase})`` applied to each shuttled spin. ``hadamard`` and
    ``cz`` substitute non-ideal gate matrices.
    """

    spins: dict = field(default_factory=lambda: {r: i for i, r in enumerate(_ALL)})
    shuttle_phase: float = 0.0
    step1_hadamard: bool = False
    hadamard: np.ndarray | None = None
    cz: np.ndarray | None = None

    def __post_init__(self):
        missing = [r for r in _ALL if r not in self.spins]
        if missing:
            raise DomainError(f"patch missing roles {missing}")
        idx = list(self.spins.values())
        if len(set(idx)) != len(idx):
            raise DomainError("patch assigns two roles to the same spin")
        if min(idx) < 0 or max(idx) >= 10:
            raise DomainError("spin index out of range")
        for name, shape in (("hadamard", (2, 2)), ("cz", (4, 4))):
            m = getattr(self, name)
            if m is not None and np.shape(m) != shape:
                raise DomainError(f"{name} override must be {shape}")

    @property
    def n_spins(self):
        return max(self.spins.values()) + 1

    def data_spins(self):
        return [self.spins[r] for r in ("D1", "D2", "D1'", "D2'")]


def _role(site):
    if site[0] == "D":
        return site[:2] + ("'" if site.endswith("'") else "")
    return site


def _dot(site):
    return site[2] if site[0] == "D" else None


@dataclass
class CycleOutcome:
    x: int
    z: int
    final: SpinRegister
    outcomes: dict = field(default_factory=dict)


class _CycleRunner:
    def __init__(self, patch: PatchConfig, rng):
        self.patch = patch
        self.rng = rng
        self.h = HADAMARD if patch.hadamard is None else np.asarray(patch.hadamard, complex)
        self.cz = CZ if patch.cz is None else np.asarray(patch.cz, complex)
        self.where = {r: "A" for r in ("D1", "D2", "D1'", "D2'")}

    def spin(self, site):
        role = _role(site)
        dot = _dot(site)
        if dot is not None and self.where[role] != dot:
            raise DomainError(f"site {site} is empty (spin is in dot {self.where[role]})")
        return self.patch.spins[role]

    def hadamards(self, reg, sites):
        for s in sites:
            reg.apply(self.h, [self.spin(s)])

    def cz_set(self, reg, pairs):
        for a, b in pairs:
            reg.apply(self.cz, [self.spin(a), self.spin(b)])

    def shuttle(self, reg, moves):
        phase = np.diag([1.0, np.exp(1j * self.patch.shuttle_phase)])
        for src, dst in moves:
            role = _role(src)
            if self.where[role] != _dot(src):
                raise DomainError(f"cannot shuttle from empty site {src}")
            self.where[role] = _dot(dst)
            if self.patch.shuttle_phase:
                reg.apply(phase, [self.patch.spins[role]])

    def measure(self, reg, pair):
        """Singlet (+1) versus triplet manifold (-1); renormalizes ``reg``."""
        spins = [self.patch.spins[p] for p in pair]
        ps = singlet_projector()
        p_s = float(np.real(reg.expectation(ps, spins)))
        p_s = min(max(p_s, 0.0), 1.0)
        singlet = self.rng.random() < p_s
        proj = ps if singlet else np.eye(4) - ps
        reg.apply(proj, spins)
        reg.amplitudes /= np.linalg.norm(reg.amplitudes)
        return 1 if singlet else -1

    def reset(self, reg, pair):
        """Prepare a singlet on ``pair`` whatever its current state.

        Realized as the channel with Kraus operators ``|S><b|`` over the
        singlet-triplet basis, sampled as a pure-state trajectory.
        """
        spins = [self.patch.spins[p] for p in pair]
        basis = (SINGLET,) + _TRIPLETS
        branches = [reg.reduced_amplitudes(spins, b) for b in basis]
        probs = np.array([np.sum(np.abs(x) ** 2) for x in branches])
        probs = probs / probs.sum()
        j = int(np.argmax(probs)) if np.max(probs) > 1 - 1e-12 else int(
            self.rng.choice(4, p=probs))
        rest = branches[j] / np.sqrt(np.sum(np.abs(branches[j]) ** 2))
        k = len(spins)
        full = np.multiply.outer(SINGLET.reshape((2,) * k), rest)
        full = np.moveaxis(full, list(range(k)), spins)
        reg.amplitudes = full.reshape(-1)


def simulate_cycle(initial: SpinRegister, schedule: CycleSchedule, patch: PatchConfig,
                   rng=None, first_cycle: bool = True) -> CycleOutcome:
    """Run one cycle and return the X and Z syndromes (+1 for singlet).

    Ancillas are reset to singlets when the schedule prepares them. The Z
    readout that the schedule places at step 1 of the next cycle is done at
    the end of this one, so each call returns a complete syndrome pair.
    ``patch.step1_hadamard`` applies a global data Hadamard at step 1 of
    every cycle after the first.
    """
    if initial.n_spins < patch.n_spins:
        raise DomainError("register smaller than the patch")
    rng = np.random.default_rng(rng)
    run = _CycleRunner(patch, rng)
    reg = initial.copy()
    out = {}
    for step in schedule.steps:
        for act in step.actions:
            if act.kind == "init_ancilla":
                run.reset(reg, act.operands)
            elif act.kind == "measure_ancilla":
                if step.index == 1:
                    continue  # Z readout handled at the end of the cycle
                out[act.operands[0][0]] = run.measure(reg, act.operands)
            elif act.kind == "global_hadamard":
                run.hadamards(reg, act.operands)
            elif act.kind == "cz_set":
                run.cz_set(reg, act.operands)
            elif act.kind == "shuttle":
                run.shuttle(reg, act.operands)
        if step.index == 1 and patch.step1_hadamard and not first_cycle:
            run.hadamards(reg, ("D1A", "D2A", "D1A'", "D2A'"))
    out["Z"] = run.measure(reg, ("Z1", "Z2"))
    return CycleOutcome(out["X"], out["Z"], reg, out)


def run_cycles(initial: SpinRegister, n_cycles: int, patch: PatchConfig | None = None,
               seed: int = 0, between=None):
    """Consecutive cycles; returns a list of ``(x, z)`` and the final register.

    ``between(cycle_index, register)`` may modify the register between cycles
    (error injection).
    """
    patch = patch or PatchConfig()
    schedule = build_schedule()
    rng = np.random.default_rng(seed)
    reg = initial.copy()
    hist = []
    for c in range(n_cycles):
        if between is not None and c > 0:
            between(c, reg)
        res = simulate_cycle(reg, schedule, patch, rng, first_cycle=(c == 0))
        hist.append((res.x, res.z))
        reg = res.final
    return hist, reg


def stabilizer_projector(kind: str, patch: PatchConfig | None = None, sign: int = 1):
    """Projector ``(I + sign * P) / 2`` for ``P`` = XXXX or ZZZZ on the data spins."""
    patch = patch or PatchConfig()
    n = patch.n_spins
    pauli = {"X": SX, "Z": np.diag([1.0, -1.0]).astype(complex)}[kind]
    ops = [I2] * n
    for s in patch.data_spins():
        ops[s] = pauli
    return 0.5 * (np.eye(2**n) + sign * kron(*ops))


@dataclass(frozen=True)
class CycleTiming:
    tau_h: float
    tau_cz: float
    tau_shuttle: float = 0.0
    tau_init: float = 0.0
    tau_meas: float = 5.6

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not v >= 0:
                raise DomainError(f"{k} must be non-negative, got {v}")


def cycle_time(t: CycleTiming) -> float:
    """Cycle duration ``5 tau_h + 4 tau_cz + 2 tau_shuttle`` (us)."""
    return 5 * t.tau_h + 4 * t.tau_cz + 2 * t.tau_shuttle


def timing_budget(t: CycleTiming) -> dict:
    """Measurement/initialization window and what remains for initialization.

    The shortest window spans two Hadamard slots around the cycle boundary.
    The longest uses every step in which an ancilla takes part in no CZ
    (steps 9 to 2 for the X ancilla): four Hadamard slots, one CZ and one
    shuttle.
    """
    lo = 2 * t.tau_h
    hi = 4 * t.tau_h + t.tau_cz + t.tau_shuttle
    rem_lo, rem_hi = lo - t.tau_meas, hi - t.tau_meas
    return {
        "total_us": cycle_time(t),
        "window_min_us": lo,
        "window_max_us": hi,
        "tau_meas_us": t.tau_meas,
        "init_budget_min_us": rem_lo,
        "init_budget_max_us": rem_hi,
        "tau_init_us": t.tau_init,
        "init_fits_min_window": bool(t.tau_init <= rem_lo),
        "init_fits_max_window": bool(t.tau_init <= rem_hi),
    }


def write_syndromes_csv(history, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cycle", "x", "z"])
        for i, (x, z) in enumerate(history):
            w.writerow([i, x, z])


def schedule_to_json(schedule: CycleSchedule, timing: CycleTiming | None = None) -> str:
    durations = {"none": 0.0}
    if timing is not None:
        durations.update(tau_h=timing.tau_h, tau_cz=timing.tau_cz, tau_shuttle=timing.tau_shuttle)
    steps = []
    for s in schedule.steps:
        rec = {"step": s.index, "duration": s.duration, "note": s.note,
               "actions": [{"kind": a.kind, "operands": [list(o) if isinstance(o, tuple) else o
                                                          for o in a.operands]}
                           for a in s.actions]}
        if timing is not None:
            rec["duration_us"] = durations[s.duration]
        steps.append(rec)
    doc = {"steps": steps}
    if timing is not None:
        doc["timing"] = timing_budget(timing)
    return json.dumps(doc, indent=2)
