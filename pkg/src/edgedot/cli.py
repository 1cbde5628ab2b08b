"""Command-line front end.

Usage::

    edgedot run <experiment> [--config FILE] [options] [--set KEY=VALUE ...]
    edgedot <experiment> [--config FILE] [options]
    edgedot validate FILE

Each run writes ``{experiment}-{pulse_id}-{timestamp}.csv`` plus a ``.json``
record (config echo, seed, software version, metric mode, wall time) into the
output directory: ``--output-dir``, else ``output_dir`` from the file, else
``$EDGEDOT_OUTPUT_DIR``, else the working directory.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import EXPERIMENTS, SCHEMAS, ConfigError, RunConfig, build_config, load_file

OUTPUT_ENV = "EDGEDOT_OUTPUT_DIR"


class RunFailure(RuntimeError):
    pass


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


class _Artifacts:
    """Collects output files and removes them all if the run fails."""

    def __init__(self, out_dir, experiment, pulse_id):
        self.out_dir = out_dir
        stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
        self.stem = os.path.join(out_dir, f"{experiment}-{pulse_id}-{stamp}")
        self.paths = []

    def path(self, suffix):
        p = self.stem + suffix
        self.paths.append(p)
        return p

    def write_csv(self, header, rows, suffix=".csv"):
        p = self.path(suffix)
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(x) for x in r])
        return p

    def write_json(self, doc, suffix=".json"):
        p = self.path(suffix)
        with open(p, "w", newline="\n") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        return p

    def cleanup(self):
        for p in self.paths:
            try:
                os.remove(p)
            except FileNotFoundError:
                pass


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


# ---------------------------------------------------------------- pulses

def _target(name):
    from .qcore import CZ, HADAMARD, I2, SX, SY

    sqrt_x = np.array([[1, -1j], [-1j, 1]], dtype=complex) / np.sqrt(2)
    table = {"hadamard": HADAMARD, "x": SX, "y": SY, "sqrt-x": sqrt_x, "identity": I2, "cz": CZ}
    return table[name]


def _grape_config(p, seed, two_qubit=False):
    from .grape import GrapeConfig, gauss_hermite_samples
    from .hamiltonians import BOHR_MHZ_PER_T

    carrier = 2.0 * BOHR_MHZ_PER_T
    fc = p.get("spectral_cutoff", 0.0)
    kw = dict(
        n_segments=p["n_segments"], duration=p["duration"], amp_limit=p["amp_limit"],
        detuning_samples=gauss_hermite_samples(p["detuning_sigma"], p["detuning_nodes"]),
        spectral_q=(carrier / (2 * fc)) if fc else None, spectral_weight=p["spectral_weight"],
        carrier_mhz=carrier, max_iters=p["max_iters"], tolerance=p["tolerance"], seed=seed,
        step_rule=p["step_rule"], step_size=p["step_size"], init=p["init"],
    )
    if two_qubit:
        kw.update(ej_limit=p["ej_limit"], freedom=p["freedom"], cz_weight=p["cz_weight"],
                  id_weight=p["id_weight"])
    return GrapeConfig(**kw)


def _default_grape_params(exp):
    out = {}
    for k, prm in SCHEMAS[exp].items():
        if prm.default is not None:
            out[k] = prm.convert(prm.default)
    return out


def resolve_pulse(name: str):
    """Envelope for a named reference pulse or an envelope CSV path.

    Named GRAPE pulses are the fixed reference presets (seed 0), so the run
    seed does not change them.
    """
    from .grape import (optimize_decoupled_cz, optimize_single_qubit, reference_cz_config,
                        reference_hadamard_config)
    from .pulses import (composite_square_hadamard, read_envelope, square_cz_envelope,
                         square_rotation)
    from .qcore import HADAMARD

    if name == "square-x":
        return square_rotation("x", np.pi)
    if name == "square-hadamard":
        return composite_square_hadamard()
    if name == "square-cz":
        return square_cz_envelope()
    if name == "grape-hadamard":
        res = optimize_single_qubit(HADAMARD, reference_hadamard_config())
        if not res.converged:
            raise RunFailure("reference GRAPE Hadamard did not converge")
        return res.envelope
    if name == "grape-cz":
        res = optimize_decoupled_cz(reference_cz_config())
        if not res.converged:
            raise RunFailure("reference GRAPE CZ did not converge")
        return res.envelope
    if os.path.exists(name):
        return read_envelope(name)
    raise ConfigError([f"pulse: unknown pulse {name!r} (square-x, square-hadamard, square-cz, "
                       "grape-hadamard, grape-cz, or an envelope CSV path)"])


def _pulse_id(name):
    if os.path.exists(name):
        return os.path.splitext(os.path.basename(name))[0]
    return name


# ---------------------------------------------------------------- experiments

def _write_envelope(art, env):
    """Envelope CSV in the pulses file format; header keys go into the record."""
    from .pulses import envelope_header, envelope_rows

    header, rows = envelope_rows(env)
    art.write_csv(header, rows)
    return envelope_header(env)


def _exp_grape_1q(cfg: RunConfig, art):
    from .grape import optimize_single_qubit

    p = cfg.parameters
    gc = _grape_config(p, cfg.seed)
    res = optimize_single_qubit(_target(p["target"]), gc)
    head = _write_envelope(art, res.envelope)
    return head, {"converged": res.converged, "iterations": res.iterations,
                 "objective_trace": res.objective_trace,
                 "final_infidelities": res.final_infidelities,
                 "detuning_samples": [list(s) for s in gc.detuning_samples]}


def _exp_grape_2q(cfg: RunConfig, art):
    from .grape import branch_infidelities, optimize_decoupled_cz

    p = cfg.parameters
    gc = _grape_config(p, cfg.seed, two_qubit=True)
    res = optimize_decoupled_cz(gc)
    head = _write_envelope(art, res.envelope)
    cz, ident = branch_infidelities(res.envelope, 0.0, 0.0, gc.freedom)
    return head, {"converged": res.converged, "iterations": res.iterations,
                 "objective_trace": res.objective_trace,
                 "branch_infidelity_cz": cz, "branch_infidelity_identity": ident}


def _exp_sweep(cfg: RunConfig, art):
    from .analysis import cz_detuning_sweep, detuning_sweep, square_cz_correction, window_edges
    from .hamiltonians import StarkCalibration

    p = cfg.parameters
    env = resolve_pulse(p["pulse"])
    cal = StarkCalibration(dg_dv=p["dg_dv"], b0=p["b0"])
    grid = np.linspace(p["g_min"], p["g_max"], p["n_points"])
    if env.ej is None:
        if p["target"] == "cz":
            raise ConfigError(["target: cz needs a two-qubit pulse"])
        sw = detuning_sweep(env, _target(p["target"]), grid, cal, p["metric"], cfg.threads)
        art.write_csv(["delta_g", "infidelity"], zip(sw.axis, sw.values))
        lo, hi = window_edges(sw, p["threshold"])
        return None, {"window": [lo, hi], **sw.metadata}
    if p["target"] != "cz":
        raise ConfigError([f"target: two-qubit pulses are scored against cz, got {p['target']}"])
    corr = square_cz_correction(env) if env.meta.get("pulse_id") == "square-cz" else None
    cz, ident = cz_detuning_sweep(env, grid, cal, p["qubit"], p["metric"], corr, cfg.threads)
    art.write_csv(["delta_g", "infidelity_cz", "infidelity_identity"],
                  zip(cz.axis, cz.values, ident.values))
    return None, {"window_cz": list(window_edges(cz, p["threshold"])),
                  "window_identity": list(window_edges(ident, p["threshold"])), **cz.metadata}


def _exp_crosstalk(cfg: RunConfig, art):
    from .analysis import am_crosstalk_envelope

    p = cfg.parameters
    env = resolve_pulse(p["pulse"])
    grid = np.linspace(p["f_am_min"], p["f_am_max"], p["n_points"])
    ce = am_crosstalk_envelope(env, _target(p["target"]), p["n_bands"], grid, p["threshold"],
                               threads=cfg.threads)
    rows = []
    for j, f in enumerate(ce.omega_am_axis):
        for b in range(ce.per_band_infidelity.shape[0]):
            rows.append((f, b, ce.band_frequencies[b, j], ce.per_band_infidelity[b, j],
                         ce.per_band_max_infidelity[b, j]))
    art.write_csv(["f_am_MHz", "band", "band_offset_MHz", "infidelity", "max_envelope"], rows)
    return None, {"threshold_f_am_MHz": ce.threshold_omega, **ce.metadata}


def _exp_filter(cfg: RunConfig, art):
    from .analysis import fid_filter_function, filter_function

    p = cfg.parameters
    env = resolve_pulse(p["pulse"])
    f = np.geomspace(p["f_min"], p["f_max"], p["n_points"])
    ff = filter_function(env, 2 * np.pi * f)
    fid = fid_filter_function(ff.axis, env.duration)
    art.write_csv(["f_MHz", "omega_rad_per_us", "F", "F_fid"], zip(ff.axis / (2 * np.pi), ff.axis,
                                                                ff.values, fid))
    return None, ff.metadata


def _exp_spectrum(cfg: RunConfig, art):
    from .pulses import AmConfig, PulseEnvelope, am_bands, am_modulate, envelope_spectrum

    p = cfg.parameters
    env = resolve_pulse(p["pulse"])
    if env.ej is not None:
        raise ConfigError(["pulse: spectrum needs a single-qubit pulse"])
    am = AmConfig(2 * np.pi * p["f_am"], p["n_bands"])
    nominal = [nu / (2 * np.pi) for nu, _ in am_bands(am, env.duration)]
    if p["probe"]:
        n = int(np.ceil(max(env.duration, 60.0 / max(p["f_am"] / 2, 1e-9)) / env.dt))
        env = PulseEnvelope(env.dt, np.ones(n), np.zeros(n), amp_limit=1.0)
    peaks = envelope_spectrum(am_modulate(env, am), threshold=p["threshold"])
    art.write_csv(["frequency_MHz", "magnitude"], peaks)
    return None, {"nominal_bands_MHz": nominal, "n_peaks": len(peaks)}


def _exp_surface(cfg: RunConfig, art):
    from .qcore import SX, SZ
    from .surface_cell import (CycleTiming, PatchConfig, SpinRegister, build_schedule,
                               cycle_time, run_cycles, schedule_to_json, timing_budget)

    p = cfg.parameters
    timing = CycleTiming(p["tau_h"], p["tau_cz"], p["tau_shuttle"], p["tau_init"], p["tau_meas"])
    patch = PatchConfig(step1_hadamard=p["step1_hadamard"], shuttle_phase=p["shuttle_phase"])
    n = patch.n_spins
    amps = np.zeros(2**n, dtype=complex)
    if p["state"] == "zero":
        amps[0] = 1.0
    elif p["state"] == "ghz":
        amps[0] = amps[0b1111 << (n - 4)] = 1 / np.sqrt(2)
    else:
        rng = np.random.default_rng(cfg.seed)
        amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        amps /= np.linalg.norm(amps)
    between = None
    if p["inject"] != "none":
        op = SZ if p["inject"] == "z1" else SX

        def between(c, reg):
            if c == 1:
                reg.apply(op, [patch.spins["D1"]])

    hist, _ = run_cycles(SpinRegister(n, amps), p["n_cycles"], patch, cfg.seed, between)
    art.write_csv(["cycle", "x", "z"], [(i, x, z) for i, (x, z) in enumerate(hist)])
    sched = json.loads(schedule_to_json(build_schedule(), timing))
    return None, {"total_us": cycle_time(timing), "budget": timing_budget(timing),
                  "schedule": sched["steps"], "syndromes": hist}


def _exp_trim(cfg: RunConfig, art):
    from .hamiltonians import StarkCalibration
    from .trimmer import DotVoltageWindow, TrimmerDevice, trim_plan

    p = cfg.parameters
    if p["population_file"]:
        try:
            g = np.loadtxt(p["population_file"], delimiter=",", ndmin=1)
        except (OSError, ValueError) as exc:
            raise RunFailure(f"cannot read population file: {exc}") from exc
        source = p["population_file"]
    else:
        g = np.random.default_rng(cfg.seed).normal(0.0, p["population_sigma"], p["population_size"])
        source = {"distribution": "normal", "sigma": p["population_sigma"],
                  "size": p["population_size"], "seed": cfg.seed}
    plan = trim_plan(g, p["sidebands"], p["max_shift"],
                     StarkCalibration(dg_dv=p["dg_dv"], b0=p["b0"]),
                     DotVoltageWindow(p["v_1e"], p["v_2e"], p["v_dd"]),
                     TrimmerDevice(r_d=p["r_d"], r_max=p["r_max"]), p["v_baseline"],
                     direct=p["direct"])
    rows = [(a.qubit, a.band_index, a.delta_g, a.delta_v, a.v_qd,
             "" if a.r_ch is None else a.r_ch, a.status) for a in plan.rows()]
    art.write_csv(["qubit", "band_index", "delta_g", "delta_v_V", "v_qd_V", "r_ch_ohm", "status"],
                  rows)
    reasons = {}
    for _, r, _ in plan.failures:
        reasons[r] = reasons.get(r, 0) + 1
    return None, {"n_failures": plan.n_failures, "failure_reasons": reasons,
                  "population": source, **plan.metadata}


_RUNNERS = {
    "grape-1q": (_exp_grape_1q, lambda p: f"grape-{p['target']}"),
    "grape-2q": (_exp_grape_2q, lambda p: "grape-cz"),
    "sweep-detuning": (_exp_sweep, lambda p: _pulse_id(p["pulse"])),
    "am-crosstalk": (_exp_crosstalk, lambda p: _pulse_id(p["pulse"])),
    "filter-function": (_exp_filter, lambda p: _pulse_id(p["pulse"])),
    "spectrum": (_exp_spectrum, lambda p: _pulse_id(p["pulse"])),
    "surface-cycle": (_exp_surface, lambda p: "cycle"),
    "trim-plan": (_exp_trim, lambda p: "plan"),
}

_METRIC = {"sweep-detuning": "metric", "grape-2q": "freedom"}


def run(cfg: RunConfig, log=sys.stderr) -> int:
    """Execute one experiment; returns the process exit code."""
    runner, pid = _RUNNERS[cfg.experiment]
    try:
        os.makedirs(cfg.output_dir, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory {cfg.output_dir}: {exc}", file=log)
        return 1
    art = _Artifacts(cfg.output_dir, cfg.experiment, pid(cfg.parameters))
    t0 = time.perf_counter()
    try:
        head, extra = runner(cfg, art)
        metric_key = _METRIC.get(cfg.experiment)
        doc = dict(head or {})
        doc.update({
            "experiment": cfg.experiment,
            "version": __version__,
            "seed": cfg.seed,
            "threads": cfg.threads,
            "metric": cfg.parameters.get(metric_key, "global_phase") if metric_key else "global_phase",
            "config": cfg.echo(),
            "wall_time_s": time.perf_counter() - t0,
            "csv": os.path.basename(art.stem + ".csv"),
            "results": extra,
        })
        art.write_json(doc)
    except ConfigError as exc:
        art.cleanup()
        for e in exc.errors:
            print(f"error: {e}", file=log)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and clean up
        art.cleanup()
        print(f"error: {cfg.experiment} failed: {type(exc).__name__}: {exc}", file=log)
        return 1
    print(art.stem + ".csv")
    return 0


# ---------------------------------------------------------------- argparse

def _flag(name):
    return "--" + name.replace("_", "-")


def _add_experiment_args(sp, exp):
    sp.add_argument("--config", help="TOML configuration file")
    sp.add_argument("--output-dir", dest="output_dir")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override any parameter")
    for key, prm in SCHEMAS[exp].items():
        unit = ""
        from .config import UNITS

        if prm.kind in UNITS:
            unit = f" [{UNITS[prm.kind][0]} if no unit given]"
        sp.add_argument(_flag(key), dest=f"p_{key}", default=None,
                        help=(prm.help or key) + unit)


def build_parser():
    parser = argparse.ArgumentParser(prog="edgedot", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run an experiment")
    rsub = runp.add_subparsers(dest="experiment", required=True)
    for exp in EXPERIMENTS:
        _add_experiment_args(rsub.add_parser(exp), exp)
        _add_experiment_args(sub.add_parser(exp, help=f"run {exp}"), exp)
    v = sub.add_parser("validate", help="check a configuration file without running it")
    v.add_argument("file")
    return parser


def _overrides(ns):
    out = {}
    for k, v in vars(ns).items():
        if k.startswith("p_") and v is not None:
            out[k[2:]] = v
    for item in ns.set:
        if "=" not in item:
            raise ConfigError([f"--set {item!r}: expected KEY=VALUE"])
        k, v = item.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    for k in ("seed", "threads", "output_dir"):
        if getattr(ns, k, None) is not None:
            out[k] = getattr(ns, k)
    return out


def _default_out():
    return os.environ.get(OUTPUT_ENV) or "."


def validate_file(path) -> list:
    """All configuration errors in ``path`` (empty when valid)."""
    try:
        doc = load_file(path)
        build_config(doc, default_output_dir=_default_out())
    except ConfigError as exc:
        return exc.errors
    return []


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.command == "validate":
        errors = validate_file(ns.file)
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        if not errors:
            print(f"{ns.file}: ok")
        return 2 if errors else 0
    exp = ns.experiment if ns.command == "run" else ns.command
    try:
        doc = load_file(ns.config) if ns.config else {}
        cfg = build_config(doc, _overrides(ns), experiment=exp, default_output_dir=_default_out())
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
