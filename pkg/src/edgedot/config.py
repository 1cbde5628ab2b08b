"""Run configuration: unit-bearing quantities and per-experiment schemas.

Configuration files are TOML. Physical quantities are strings with an
explicit unit, e.g. ``"6 us"``, ``"4 MHz"``, ``"0.5 V"``, ``"1e5 Ohm"``.
Values given on the command line may omit the unit, in which case the
quantity's canonical unit is assumed.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

__all__ = [
    "ConfigError",
    "UNITS",
    "parse_quantity",
    "Param",
    "SCHEMAS",
    "EXPERIMENTS",
    "RunConfig",
    "load_file",
    "build_config",
]


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# quantity -> (canonical unit, {suffix: factor to canonical})
UNITS = {
    "time": ("us", {"s": 1e6, "ms": 1e3, "us": 1.0, "ns": 1e-3}),
    "frequency": ("MHz", {"Hz": 1e-6, "kHz": 1e-3, "MHz": 1.0, "GHz": 1e3}),
    "rate": ("rad/us", {"rad/us": 1.0, "rad/ns": 1e3, "rad/s": 1e-6}),
    "voltage": ("V", {"V": 1.0, "mV": 1e-3, "uV": 1e-6}),
    "resistance": ("Ohm", {"Ohm": 1.0, "kOhm": 1e3, "MOhm": 1e6, "GOhm": 1e9}),
    "field": ("T", {"T": 1.0, "mT": 1e-3}),
    "per_volt": ("1/V", {"1/V": 1.0, "1/mV": 1e3}),
}

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QTY = re.compile(rf"^\s*({_NUM})\s*([A-Za-z/0-9]+)?\s*$")


def parse_quantity(value, kind: str, allow_bare: bool = False) -> float:
    """Convert ``value`` to the canonical unit of ``kind``.

    Raises ``ValueError`` for unknown or missing units.
    """
    unit, table = UNITS[kind]
    if isinstance(value, bool):
        raise ValueError("expected a quantity, got a boolean")
    if isinstance(value, (int, float)):
        if allow_bare:
            return float(value)
        raise ValueError(f"missing unit (expected e.g. '{value} {unit}')")
    m = _QTY.match(str(value))
    if not m:
        raise ValueError(f"cannot parse quantity {value!r}")
    num, suffix = float(m.group(1)), m.group(2)
    if suffix is None:
        if allow_bare:
            return num
        raise ValueError(f"missing unit (expected e.g. '{value} {unit}')")
    if suffix not in table:
        raise ValueError(f"unit {suffix!r} is not a {kind} unit ({', '.join(table)})")
    return num * table[suffix]


@dataclass(frozen=True)
class Param:
    kind: str  # a UNITS key, or int, float, str, bool, float_list, choice
    default: object = None
    required: bool = False
    choices: tuple = ()
    help: str = ""

    def convert(self, value, allow_bare=False):
        if self.kind in UNITS:
            return parse_quantity(value, self.kind, allow_bare)
        if self.kind == "int":
            if isinstance(value, bool):
                raise ValueError("expected an integer")
            if isinstance(value, str):
                value = value.strip()
                if not re.fullmatch(r"[-+]?\d+", value):
                    raise ValueError(f"expected an integer, got {value!r}")
                return int(value)
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"expected an integer, got {value}")
            return int(value)
        if self.kind == "float":
            if isinstance(value, bool):
                raise ValueError("expected a number")
            out = float(value)
            if not math.isfinite(out):
                raise ValueError("expected a finite number")
            return out
        if self.kind == "bool":
            if isinstance(value, bool):
                return value
            s = str(value).strip().lower()
            if s in ("true", "1", "yes", "on"):
                return True
            if s in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"expected true/false, got {value!r}")
        if self.kind == "float_list":
            if isinstance(value, str) and value.strip()[:1] in "[{":
                # inline TOML array or table from the command line
                try:
                    value = _toml().loads(f"v = {value}")["v"]
                except Exception as exc:
                    raise ValueError(f"cannot parse {value!r}: {exc}") from exc
            if isinstance(value, dict):
                # evenly spaced: {n = 100, half_span = 1.5e-2}
                extra = set(value) - {"n", "half_span", "center"}
                if extra or "n" not in value or "half_span" not in value:
                    raise ValueError("band table needs n and half_span (optional center)")
                n = int(value["n"])
                if n < 1:
                    raise ValueError("n must be >= 1")
                c, h = float(value.get("center", 0.0)), float(value["half_span"])
                if n == 1:
                    return [c]
                return [c - h + 2 * h * j / (n - 1) for j in range(n)]
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            if not isinstance(value, (list, tuple)):
                raise ValueError("expected a list of numbers")
            return [float(v) for v in value]
        if self.kind == "choice":
            s = str(value)
            if s not in self.choices:
                raise ValueError(f"expected one of {', '.join(self.choices)}, got {s!r}")
            return s
        if self.kind == "str":
            return str(value)
        raise AssertionError(self.kind)


_PULSE_HELP = ("square-x, square-hadamard, square-cz, grape-hadamard, grape-cz, "
               "or a path to an envelope CSV")
_TARGETS = ("hadamard", "x", "y", "sqrt-x", "identity")

_GRAPE_COMMON = {
    "duration": Param("time", "6 us"),
    "n_segments": Param("int", 600),
    "amp_limit": Param("rate", f"{math.pi / 2!r} rad/us"),
    "detuning_sigma": Param("rate", "0.15 rad/us", help="Gauss-Hermite training width"),
    "detuning_nodes": Param("int", 5),
    "spectral_cutoff": Param("frequency", "1 MHz", help="low-pass corner of the spectral penalty; 0 disables"),
    "spectral_weight": Param("float", 1.0),
    "max_iters": Param("int", 5000),
    "tolerance": Param("float", 1e-4),
    "step_rule": Param("choice", "lbfgs", choices=("fixed", "backtracking", "lbfgs")),
    "step_size": Param("float", 0.5),
    "init": Param("choice", "smooth", choices=("smooth", "random", "zeros")),
}

SCHEMAS = {
    "grape-1q": {"target": Param("choice", "hadamard", choices=_TARGETS), **_GRAPE_COMMON},
    "grape-2q": {
        **_GRAPE_COMMON,
        "duration": Param("time", "4 us"),
        "n_segments": Param("int", 400),
        "detuning_sigma": Param("rate", "0.05 rad/us", help="Gauss-Hermite training width"),
        "detuning_nodes": Param("int", 3),
        "spectral_cutoff": Param("frequency", "0 MHz", help="low-pass corner of the spectral penalty; 0 disables"),
        "ej_limit": Param("rate", "1 rad/us"),
        "freedom": Param("choice", "local_z_and_global", choices=("global_phase", "local_z_and_global")),
        "cz_weight": Param("float", 0.5),
        "id_weight": Param("float", 0.5),
    },
    "sweep-detuning": {
        "pulse": Param("str", "grape-hadamard", help=_PULSE_HELP),
        "target": Param("choice", "hadamard", choices=_TARGETS + ("cz",)),
        "g_min": Param("float", -2e-5),
        "g_max": Param("float", 2e-5),
        "n_points": Param("int", 201),
        "b0": Param("field", "1 T"),
        "dg_dv": Param("per_volt", "0.002 1/V"),
        "metric": Param("choice", "global_phase", choices=("global_phase", "local_z_and_global")),
        "qubit": Param("int", 1),
        "threshold": Param("float", 1e-3),
    },
    "am-crosstalk": {
        "pulse": Param("str", "grape-hadamard", help=_PULSE_HELP),
        "target": Param("choice", "hadamard", choices=_TARGETS),
        "n_bands": Param("int", 10),
        "f_am_min": Param("frequency", "1 MHz"),
        "f_am_max": Param("frequency", "100 MHz"),
        "n_points": Param("int", 100),
        "threshold": Param("float", 1e-3),
    },
    "filter-function": {
        "pulse": Param("str", "grape-hadamard", help=_PULSE_HELP),
        "f_min": Param("frequency", "0.001 MHz"),
        "f_max": Param("frequency", "10 MHz"),
        "n_points": Param("int", 200),
    },
    "spectrum": {
        "pulse": Param("str", "grape-hadamard", help=_PULSE_HELP),
        "n_bands": Param("int", 10),
        "f_am": Param("frequency", "4 MHz"),
        "threshold": Param("float", 0.1),
        "probe": Param("bool", False, help="use a long constant envelope instead of the pulse"),
    },
    "surface-cycle": {
        "tau_h": Param("time", "6 us"),
        "tau_cz": Param("time", "4 us"),
        "tau_shuttle": Param("time", "0 us"),
        "tau_init": Param("time", "0 us"),
        "tau_meas": Param("time", "5.6 us"),
        "n_cycles": Param("int", 2),
        "state": Param("choice", "ghz", choices=("ghz", "zero", "random")),
        "step1_hadamard": Param("bool", False),
        "shuttle_phase": Param("float", 0.0),
        "inject": Param("choice", "none", choices=("none", "z1", "x1")),
    },
    "trim-plan": {
        "sidebands": Param("float_list", required=True, help="band positions in g units"),
        "max_shift": Param("float", 4.5e-4),
        "b0": Param("field", "1 T"),
        "dg_dv": Param("per_volt", "0.002 1/V"),
        "v_1e": Param("voltage", "1.0 V"),
        "v_2e": Param("voltage", "1.5 V"),
        "v_dd": Param("voltage", "1.5 V"),
        "v_baseline": Param("voltage", "1.25 V"),
        "r_d": Param("resistance", "1e5 Ohm"),
        "r_max": Param("resistance", "1e12 Ohm"),
        "direct": Param("bool", False),
        "population_size": Param("int", 1000),
        "population_sigma": Param("float", 5e-3),
        "population_file": Param("str", ""),
    },
}

EXPERIMENTS = tuple(SCHEMAS)
_TOP_KEYS = ("experiment", "seed", "threads", "output_dir", "parameters")


@dataclass
class RunConfig:
    experiment: str
    parameters: dict
    output_dir: str
    seed: int = 0
    threads: int = 1
    raw: dict = field(default_factory=dict)

    def echo(self):
        return {"experiment": self.experiment, "seed": self.seed, "threads": self.threads,
                "output_dir": self.output_dir, "parameters": self.raw}


def _toml():
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    return tomllib


def load_file(path) -> dict:
    tomllib = _toml()
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path}: {exc.strerror}"]) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"config file {path} is not valid TOML: {exc}"]) from exc


def build_config(doc: dict, overrides: dict | None = None, experiment: str | None = None,
                 default_output_dir: str = ".") -> RunConfig:
    """Validate a parsed file plus command-line overrides.

    All problems are collected and raised together as one ``ConfigError``.
    Overrides come from the command line and may use bare numbers.
    """
    overrides = dict(overrides or {})
    errors = []
    for k in doc:
        if k not in _TOP_KEYS:
            errors.append(f"{k}: unknown top-level key (allowed: {', '.join(_TOP_KEYS)})")
    exp = experiment or doc.get("experiment")
    if doc.get("experiment") and experiment and doc["experiment"] != experiment:
        errors.append(f"experiment: file says {doc['experiment']!r} but {experiment!r} was requested")
    if exp is None:
        raise ConfigError(errors + ["experiment: missing (allowed: " + ", ".join(EXPERIMENTS) + ")"])
    if exp not in SCHEMAS:
        raise ConfigError(errors + [f"experiment: unknown {exp!r} (allowed: {', '.join(EXPERIMENTS)})"])
    schema = SCHEMAS[exp]

    def top(key, conv, default):
        src = overrides.pop(key, None)
        val = src if src is not None else doc.get(key, default)
        try:
            return conv(val)
        except (TypeError, ValueError) as exc:
            errors.append(f"{key}: {exc}")
            return default

    def as_int(v):
        if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
            raise ValueError(f"expected an integer, got {v!r}")
        return int(v)

    seed = top("seed", as_int, 0)
    threads = top("threads", as_int, 1)
    if isinstance(threads, int) and threads < 1:
        errors.append("threads: must be >= 1")
    output_dir = top("output_dir", str, default_output_dir)

    params_in = doc.get("parameters", {})
    if not isinstance(params_in, dict):
        errors.append("parameters: must be a table")
        params_in = {}
    for k in params_in:
        if k not in schema:
            errors.append(f"{k}: unknown parameter for {exp} (allowed: {', '.join(schema)})")
    for k in overrides:
        if k not in schema:
            errors.append(f"{k}: unknown parameter for {exp} (allowed: {', '.join(schema)})")
    params, raw = {}, {}
    for k, p in schema.items():
        if k in overrides and overrides[k] is not None:
            val, bare = overrides[k], True
        elif k in params_in:
            val, bare = params_in[k], False
        elif p.required:
            errors.append(f"{k}: required for {exp}")
            continue
        else:
            val, bare = p.default, False
        if val is None:
            params[k] = raw[k] = None
            continue
        try:
            params[k] = p.convert(val, allow_bare=bare)
            raw[k] = val
        except (TypeError, ValueError) as exc:
            errors.append(f"{k}: {exc}")
    errors.extend(_semantic_checks(exp, params))
    if errors:
        raise ConfigError(errors)
    return RunConfig(exp, params, output_dir, seed, threads, raw)


def _semantic_checks(exp, p):
    errs = []

    def positive(*keys):
        for k in keys:
            if k in p and p[k] is not None and not p[k] > 0:
                errs.append(f"{k}: must be positive")

    def non_negative(*keys):
        for k in keys:
            if k in p and p[k] is not None and p[k] < 0:
                errs.append(f"{k}: must be non-negative")

    if exp in ("grape-1q", "grape-2q"):
        positive("duration", "amp_limit", "max_iters", "tolerance")
        non_negative("detuning_sigma", "spectral_cutoff", "spectral_weight")
        if p.get("n_segments", 2) < 2:
            errs.append("n_segments: must be >= 2")
        if p.get("detuning_nodes", 1) < 1:
            errs.append("detuning_nodes: must be >= 1")
    if exp == "grape-2q":
        positive("ej_limit")
    if exp == "sweep-detuning":
        positive("b0", "n_points")
        if p.get("g_min", 0) >= p.get("g_max", 1):
            errs.append("g_max: must exceed g_min")
        if p.get("qubit") not in (1, 2):
            errs.append("qubit: must be 1 or 2")
    if exp == "am-crosstalk":
        positive("f_am_min", "f_am_max", "n_points", "n_bands")
        if p.get("f_am_min", 0) >= p.get("f_am_max", 1):
            errs.append("f_am_max: must exceed f_am_min")
    if exp == "filter-function":
        positive("f_min", "f_max", "n_points")
        if p.get("f_min", 0) >= p.get("f_max", 1):
            errs.append("f_max: must exceed f_min")
    if exp == "spectrum":
        positive("n_bands", "f_am")
    if exp == "surface-cycle":
        non_negative("tau_h", "tau_cz", "tau_shuttle", "tau_init", "tau_meas")
        if p.get("n_cycles", 1) < 1:
            errs.append("n_cycles: must be >= 1")
    if exp == "trim-plan":
        non_negative("max_shift")
        positive("b0", "r_d", "r_max", "population_sigma")
        sb = p.get("sidebands")
        if sb is not None:
            if not sb:
                errs.append("sidebands: must not be empty")
            elif any(b > a for a, b in zip(sb[1:], sb)):
                errs.append("sidebands: must be sorted ascending")
        if p.get("population_size", 1) < 1:
            errs.append("population_size: must be >= 1")
        v1, v2, vdd = p.get("v_1e"), p.get("v_2e"), p.get("v_dd")
        if None not in (v1, v2, vdd) and not (0 < v1 < v2 <= vdd):
            errs.append("v_1e: need 0 < v_1e < v_2e <= v_dd")
    return errs
