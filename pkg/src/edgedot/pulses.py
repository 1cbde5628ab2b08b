"""Pulse envelopes, square-pulse references and amplitude modulation."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .qcore import DomainError

__all__ = [
    "DEFAULT_DT",
    "PI_HALF_AMP",
    "PulseEnvelope",
    "AmConfig",
    "square_rotation",
    "composite_square_hadamard",
    "square_cz_envelope",
    "am_factor",
    "am_bands",
    "am_modulate",
    "envelope_spectrum",
    "envelope_rows",
    "envelope_header",
    "write_envelope",
    "read_envelope",
]

#: Default sample spacing, us (10 ns).
DEFAULT_DT = 0.01
#: I/Q amplitude giving a pi rotation in 1 us, rad/us.
PI_HALF_AMP = np.pi / 2

_AMP_TOL = 1e-12


@dataclass(frozen=True)
class PulseEnvelope:
    """Piecewise-constant control samples.

    ``i``, ``q`` and the optional ``ej`` channel hold one value per segment
    of length ``dt`` (us), in rad/us.
    """

    dt: float
    i: np.ndarray
    q: np.ndarray
    ej: np.ndarray | None = None
    amp_limit: float = PI_HALF_AMP
    ej_limit: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        i = np.array(self.i, dtype=float).reshape(-1)
        q = np.array(self.q, dtype=float).reshape(-1)
        if i.shape != q.shape:
            raise DomainError("I and Q lengths differ")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        peak = max(np.max(np.abs(i), initial=0.0), np.max(np.abs(q), initial=0.0))
        if peak > self.amp_limit + _AMP_TOL:
            raise DomainError(f"I/Q amplitude {peak:.6g} exceeds limit {self.amp_limit:.6g}")
        object.__setattr__(self, "i", i)
        object.__setattr__(self, "q", q)
        if self.ej is not None:
            ej = np.array(self.ej, dtype=float).reshape(-1)
            if ej.shape != i.shape:
                raise DomainError("E_J length differs from I/Q")
            if self.ej_limit is not None and np.max(np.abs(ej), initial=0.0) > self.ej_limit + _AMP_TOL:
                raise DomainError("E_J exceeds ej_limit")
            object.__setattr__(self, "ej", ej)

    def __len__(self):
        return len(self.i)

    @property
    def duration(self):
        return len(self.i) * self.dt

    @property
    def times(self):
        """Segment start times, us."""
        return np.arange(len(self.i)) * self.dt

    @property
    def midpoints(self):
        return (np.arange(len(self.i)) + 0.5) * self.dt

    @property
    def baseband(self):
        return self.i + 1j * self.q

    def without_exchange(self):
        return replace(self, ej=None, ej_limit=None)

    def with_exchange(self, ej, ej_limit=None):
        return replace(self, ej=ej, ej_limit=ej_limit)

    def subdivide(self, factor: int):
        """Same pulse sampled ``factor`` times finer."""
        factor = int(factor)
        if factor < 1:
            raise DomainError("factor must be >= 1")
        if factor == 1:
            return self
        ej = None if self.ej is None else np.repeat(self.ej, factor)
        return replace(self, dt=self.dt / factor, i=np.repeat(self.i, factor),
                       q=np.repeat(self.q, factor), ej=ej)

    def then(self, other: "PulseEnvelope"):
        """Concatenate ``other`` after this envelope (same dt)."""
        if not math.isclose(self.dt, other.dt, rel_tol=1e-12):
            raise DomainError("cannot concatenate envelopes with different dt")
        if (self.ej is None) != (other.ej is None):
            raise DomainError("cannot concatenate envelopes with and without E_J")
        ej = None if self.ej is None else np.concatenate([self.ej, other.ej])
        return PulseEnvelope(
            self.dt, np.concatenate([self.i, other.i]), np.concatenate([self.q, other.q]),
            ej, max(self.amp_limit, other.amp_limit), self.ej_limit,
        )


@dataclass(frozen=True)
class AmConfig:
    omega_am: float
    n_bands: int

    def __post_init__(self):
        if not self.omega_am > 0:
            raise DomainError("omega_am must be positive")
        if int(self.n_bands) != self.n_bands or self.n_bands < 1:
            raise DomainError(f"n_bands must be an integer >= 1, got {self.n_bands}")


def square_rotation(axis: str, angle: float, amp: float = PI_HALF_AMP,
                    dt: float = DEFAULT_DT, amp_limit: float | None = None,
                    rel_tol: float = 0.05) -> PulseEnvelope:
    """Constant pulse rotating by ``angle`` about x or y.

    The ideal duration ``|angle| / (2 amp)`` is rounded up to whole samples and
    the amplitude is rescaled so the pulse area is exact. Raises if rounding
    stretches the pulse by more than ``rel_tol``.
    """
    amp_limit = amp if amp_limit is None else amp_limit
    if axis not in ("x", "y"):
        raise DomainError(f"axis must be 'x' or 'y', got {axis!r}")
    if angle == 0:
        raise DomainError("angle must be non-zero")
    if not 0 < amp <= amp_limit + _AMP_TOL:
        raise DomainError("amp must be positive and within amp_limit")
    ideal = abs(angle) / (2 * amp)
    n = max(1, math.ceil(ideal / dt - 1e-9))
    if n * dt - ideal > rel_tol * ideal:
        raise DomainError(f"dt={dt} too coarse for a {ideal:.6g} us pulse")
    level = angle / (2 * n * dt)
    on = np.full(n, level)
    off = np.zeros(n)
    i, q = (on, off) if axis == "x" else (off, on)
    return PulseEnvelope(dt, i, q, amp_limit=amp_limit,
                         meta={"pulse_id": f"square-r{axis}"})


def composite_square_hadamard(amp: float = PI_HALF_AMP, dt: float = DEFAULT_DT) -> PulseEnvelope:
    """Ry(pi/2) followed by Rx(pi); equals H up to a global phase."""
    env = square_rotation("y", np.pi / 2, amp, dt).then(square_rotation("x", np.pi, amp, dt))
    return replace(env, meta={"pulse_id": "square-hadamard"})


def square_cz_envelope(tau_cz: float = 4.0, dt: float = DEFAULT_DT,
                       amp_limit: float = PI_HALF_AMP, area: float = np.pi / 2) -> PulseEnvelope:
    """Constant exchange pulse with ``int E_J dt = area`` and no drive."""
    if not tau_cz > 0:
        raise DomainError("tau_cz must be positive")
    n = max(1, round(tau_cz / dt))
    level = area / (n * dt)
    z = np.zeros(n)
    return PulseEnvelope(dt, z, z.copy(), np.full(n, level), amp_limit, abs(level),
                         meta={"pulse_id": "square-cz"})


def am_factor(cfg: AmConfig, t, tau: float):
    """Real modulation envelope A_AM(t) with per-band phase ``n * omega_am * tau / 2``."""
    t = np.asarray(t, dtype=float)
    w = cfg.omega_am
    phi = w * tau / 2
    n_bands = int(cfg.n_bands)
    if n_bands % 2:
        out = np.ones_like(t)
        for n in range(1, (n_bands - 1) // 2 + 1):
            out = out + 2 * np.cos(n * w * t / 2 - n * phi)
    else:
        out = np.zeros_like(t)
        for n in range(1, n_bands // 2 + 1):
            out = out + 2 * np.cos((2 * n - 1) * w * t / 4 - n * phi)
    return out


def am_bands(cfg: AmConfig, tau: float):
    """Exponential components of A_AM as ``(nu, psi)`` pairs, sorted by ``nu``.

    A_AM(t) equals ``sum(exp(1j * (nu * t - psi)))`` over the returned pairs;
    ``nu`` is an angular frequency in rad/us.
    """
    w = cfg.omega_am
    phi = w * tau / 2
    n_bands = int(cfg.n_bands)
    out = []
    if n_bands % 2:
        out.append((0.0, 0.0))
        for n in range(1, (n_bands - 1) // 2 + 1):
            out += [(n * w / 2, n * phi), (-n * w / 2, -n * phi)]
    else:
        for n in range(1, n_bands // 2 + 1):
            nu = (2 * n - 1) * w / 4
            out += [(nu, n * phi), (-nu, -n * phi)]
    return sorted(out)


def am_modulate(env: PulseEnvelope, cfg: AmConfig) -> PulseEnvelope:
    """Multiply I and Q by A_AM sampled at segment midpoints."""
    if env.ej is not None:
        raise DomainError("cannot amplitude-modulate an envelope with an exchange channel")
    if int(cfg.n_bands) == 1:
        return replace(env, meta={**env.meta, "am": {"omega_am": cfg.omega_am, "n_bands": 1}})
    a = am_factor(cfg, env.midpoints, env.duration)
    return PulseEnvelope(env.dt, a * env.i, a * env.q, None, env.amp_limit * int(cfg.n_bands),
                         meta={**env.meta, "am": {"omega_am": cfg.omega_am, "n_bands": int(cfg.n_bands)}})


def _dtft_mag(x, dt, f):
    k = np.arange(len(x))
    return np.abs(np.sum(x * np.exp(-2j * np.pi * f * k * dt)))


def envelope_spectrum(env: PulseEnvelope, threshold: float = 0.1, pad: int = 8,
                      refine: bool = True):
    """Peaks of the Hann-windowed spectrum of ``I + iQ``.

    Returns a list of ``(offset_MHz, magnitude)`` for local maxima whose
    magnitude is at least ``threshold`` times the largest, sorted by
    frequency. With ``refine`` the peak positions are polished by maximizing
    the windowed DTFT between neighbouring FFT bins.
    """
    from scipy.optimize import minimize_scalar

    x = env.baseband
    n = len(x)
    if n < 8:
        raise DomainError("spectrum needs at least 8 samples")
    xw = x * np.hanning(n)
    m = int(pad) * n
    amp = np.fft.fftshift(np.abs(np.fft.fft(xw, m)))
    freqs = np.fft.fftshift(np.fft.fftfreq(m, env.dt))
    top = amp.max()
    if top == 0:
        return []
    left = np.roll(amp, 1)
    right = np.roll(amp, -1)
    idx = np.nonzero((amp >= left) & (amp > right) & (amp >= threshold * top))[0]
    df = freqs[1] - freqs[0]
    peaks = []
    for j in idx:
        f, mag = freqs[j], amp[j]
        if refine:
            res = minimize_scalar(lambda v: -_dtft_mag(xw, env.dt, v),
                                  bounds=(f - df, f + df), method="bounded",
                                  options={"xatol": 1e-12 * max(1.0, abs(f))})
            if -res.fun >= mag:
                f, mag = float(res.x), float(-res.fun)
        peaks.append((float(f), float(mag)))
    return sorted(peaks)


def _fmt(x):
    return format(float(x), ".17g")


def envelope_rows(env: PulseEnvelope):
    """CSV header and rows (t_us, I, Q, EJ) as full-precision strings."""
    ej = env.ej if env.ej is not None else [None] * len(env)
    rows = [[_fmt(t), _fmt(i), _fmt(q), "" if e is None else _fmt(e)]
            for t, i, q, e in zip(env.times, env.i, env.q, ej)]
    return ["t_us", "I", "Q", "EJ"], rows


def envelope_header(env: PulseEnvelope, provenance: dict | None = None) -> dict:
    return {
        "dt_us": _fmt(env.dt),
        "n_samples": len(env),
        "amp_limit": _fmt(env.amp_limit),
        "ej_limit": None if env.ej_limit is None else _fmt(env.ej_limit),
        "has_ej": env.ej is not None,
        "units": {"t": "us", "I": "rad/us", "Q": "rad/us", "EJ": "rad/us"},
        "provenance": {**env.meta, **(provenance or {})},
    }


def write_envelope(env: PulseEnvelope, path, provenance: dict | None = None):
    """Write ``path`` (CSV: t_us, I, Q, EJ) and a JSON header next to it."""
    path = Path(path)
    header_row, rows = envelope_rows(env)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header_row)
        w.writerows(rows)
    header = envelope_header(env, provenance)
    path.with_suffix(".json").write_text(json.dumps(header, indent=2, sort_keys=True, default=str) + "\n")
    return path


def read_envelope(path) -> PulseEnvelope:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    i, q, ej = [], [], []
    with open(path, newline="") as fh:
        rows = csv.DictReader(fh)
        for row in rows:
            i.append(float(row["I"]))
            q.append(float(row["Q"]))
            if header["has_ej"]:
                ej.append(float(row["EJ"]))
    ej_limit = header.get("ej_limit")
    return PulseEnvelope(
        float(header["dt_us"]), np.array(i), np.array(q),
        np.array(ej) if header["has_ej"] else None,
        float(header["amp_limit"]), None if ej_limit is None else float(ej_limit),
        meta=header.get("provenance", {}),
    )
