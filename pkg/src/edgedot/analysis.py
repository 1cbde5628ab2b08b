"""Evaluation campaigns: detuning sweeps, AM cross-talk and filter functions."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .grape import branch_infidelities, decoupled_cz_unitaries
from .hamiltonians import (StarkCalibration, frequency_to_detuning,
                           g_shift_to_detuning)
from .pulses import AmConfig, PulseEnvelope, am_bands, am_modulate, envelope_spectrum
from .qcore import (CZ, I2, SX, SY, SZ, DomainError, best_local_z, chain_product,
                    expm_segments, gate_fidelity, kron, local_z)

__all__ = [
    "SweepResult",
    "CrosstalkEnvelope",
    "detuning_sweep",
    "cz_detuning_sweep",
    "square_cz_correction",
    "window_edges",
    "window_width",
    "am_crosstalk_envelope",
    "band_frame_unitary",
    "filter_function",
    "fid_filter_function",
]


@dataclass
class SweepResult:
    axis: np.ndarray
    values: np.ndarray
    units: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.axis.shape[0] != self.values.shape[0]:
            raise DomainError("axis and values lengths differ")
        if np.any(np.diff(self.axis) <= 0):
            raise DomainError("axis must be strictly increasing")


@dataclass
class CrosstalkEnvelope:
    """Per-band infidelity over a grid of modulation spacings.

    ``omega_am_axis`` holds ``omega_am / 2pi`` in MHz. ``per_band_infidelity``
    is the raw [band x omega] matrix; ``per_band_max_infidelity`` is its upper
    envelope, the largest infidelity at this or any larger spacing.
    """

    omega_am_axis: np.ndarray
    per_band_infidelity: np.ndarray
    per_band_max_infidelity: np.ndarray
    band_frequencies: np.ndarray
    threshold_omega: float | None
    threshold: float
    metadata: dict = field(default_factory=dict)


def _run_map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _single_h(env, delta):
    h = env.i[:, None, None] * SX + env.q[:, None, None] * SY + delta * SZ
    return chain_product(expm_segments(h, env.dt))


def detuning_sweep(env: PulseEnvelope, target, grid, cal: StarkCalibration | None = None,
                   metric: str = "global_phase", threads: int = 1) -> SweepResult:
    """Infidelity versus g-factor offset for a single-qubit pulse.

    Each ``delta_g`` in ``grid`` is converted to a sigma_z coefficient via the
    Zeeman shift at ``cal.b0`` and the pulse is propagated at that detuning.
    """
    cal = cal or StarkCalibration()
    grid = np.unique(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise DomainError("grid must not be empty")
    if env.ej is not None:
        raise DomainError("detuning_sweep expects a single-qubit envelope")
    target = np.asarray(target, dtype=complex)

    def one(dg):
        u = _single_h(env, float(g_shift_to_detuning(dg, cal)))
        return 1.0 - gate_fidelity(u, target, metric)

    vals = np.clip(_run_map(one, grid, threads), 0.0, 1.0)
    return SweepResult(grid, vals, "delta_g", {
        "pulse_id": env.meta.get("pulse_id", "custom"), "metric": metric,
        "b0_T": cal.b0, "quantity": "infidelity"})


def square_cz_correction(env: PulseEnvelope):
    """Virtual-Z correction making a bare exchange pulse a CZ at zero detuning."""
    u_cz, _ = decoupled_cz_unitaries(env)
    a, b = best_local_z(u_cz, CZ)
    return local_z(a, b)


def cz_detuning_sweep(env: PulseEnvelope, grid, cal: StarkCalibration | None = None,
                      qubit: int = 1, metric: str = "global_phase",
                      cz_correction=None, threads: int = 1):
    """Both branch infidelities versus a g-factor offset on one qubit.

    Returns ``(cz_sweep, identity_sweep)``.
    """
    cal = cal or StarkCalibration()
    grid = np.unique(np.asarray(grid, dtype=float))
    if qubit not in (1, 2):
        raise DomainError("qubit must be 1 or 2")

    def one(dg):
        d = float(g_shift_to_detuning(dg, cal))
        d1, d2 = (d, 0.0) if qubit == 1 else (0.0, d)
        return branch_infidelities(env, d1, d2, metric, cz_correction)

    pairs = np.clip(np.array(_run_map(one, grid, threads)), 0.0, 1.0)
    meta = {"pulse_id": env.meta.get("pulse_id", "custom"), "metric": metric,
            "qubit": qubit, "b0_T": cal.b0, "quantity": "infidelity",
            "corrected": cz_correction is not None}
    return (SweepResult(grid, pairs[:, 0], "delta_g", {**meta, "branch": "cz"}),
            SweepResult(grid, pairs[:, 1], "delta_g", {**meta, "branch": "identity"}))


def window_edges(sweep: SweepResult, threshold: float = 1e-3):
    """Edges ``(lo, hi)`` of the contiguous region around zero below ``threshold``.

    Crossings are located by linear interpolation of log10(infidelity)
    between grid points. Returns ``(0.0, 0.0)`` if the zero point itself is
    above threshold; an edge that never crosses is the grid end.
    """
    x, y = sweep.axis, sweep.values
    j0 = int(np.argmin(np.abs(x)))
    if y[j0] >= threshold:
        return 0.0, 0.0
    ly = np.log10(np.maximum(y, 1e-300))
    lt = np.log10(threshold)

    def walk(step):
        j = j0
        while 0 <= j + step < len(x):
            if y[j + step] >= threshold:
                a, b = ly[j], ly[j + step]
                frac = (lt - a) / (b - a) if b != a else 0.0
                return x[j] + frac * (x[j + step] - x[j])
            j += step
        return x[j]

    return float(walk(-1)), float(walk(1))


def window_width(sweep: SweepResult, threshold: float = 1e-3) -> float:
    lo, hi = window_edges(sweep, threshold)
    return hi - lo


def band_frame_unitary(u, nu, psi, tau):
    """Map a rotating-frame propagator into the frame locked to one AM band.

    A band contributes ``exp(1j * (nu t - psi))`` to the complex baseband. In
    the frame ``W(t) = exp(-i (nu t - psi) sz / 2)`` that follows this tone,
    an isolated band drives exactly the base envelope.
    """
    w_end = np.diag(np.exp(np.array([-0.5j, 0.5j]) * (nu * tau - psi)))
    w_start = np.diag(np.exp(np.array([-0.5j, 0.5j]) * (-psi)))
    return np.conj(w_end) @ u @ w_start


def _measured_bands(cfg: AmConfig, dt: float, tau: float):
    """Band offsets (MHz) read off the spectrum of a long modulated probe."""
    nominal = np.array([nu for nu, _ in am_bands(cfg, tau)]) / (2 * np.pi)
    spacing = np.min(np.diff(nominal)) if len(nominal) > 1 else 1.0
    fmax = np.max(np.abs(nominal))
    nyq = 0.5 / dt
    if fmax >= nyq:
        raise DomainError(f"band at {fmax:.4g} MHz beyond Nyquist {nyq:.4g} MHz; reduce dt")
    length = max(tau, 60.0 / spacing)
    n = int(np.ceil(length / dt))
    probe = PulseEnvelope(dt, np.ones(n), np.zeros(n), amp_limit=1.0)
    mod = am_modulate(probe, cfg)
    peaks = envelope_spectrum(mod, threshold=0.1)
    freqs = np.array([f for f, _ in peaks])
    if len(freqs) != len(nominal):
        raise DomainError(f"resolved {len(freqs)} spectral peaks, expected {len(nominal)}")
    tol = max(0.25 * spacing, 2.0 / (n * dt))
    if np.max(np.abs(freqs - nominal)) > tol:
        raise DomainError("spectral peaks do not match the modulation bands")
    return freqs


def am_crosstalk_envelope(base_env: PulseEnvelope, target, n_bands: int, omega_am_mhz,
                          threshold: float = 1e-3, samples_per_period: int = 64,
                          threads: int = 1) -> CrosstalkEnvelope:
    """Per-band gate infidelity under simultaneous N-band amplitude modulation.

    For each spacing ``omega_am / 2pi`` in ``omega_am_mhz`` the base pulse is
    modulated, each band's offset is measured from the spectrum, and a qubit
    sitting on that band is propagated under the full modulated drive. The
    result is compared to ``target`` in the frame locked to the band's tone.

    The modulation is evaluated on a sub-grid of the base envelope so that
    the highest band gets at least ``samples_per_period`` samples per cycle.
    """
    if base_env.ej is not None:
        raise DomainError("cross-talk analysis expects a single-qubit envelope")
    target = np.asarray(target, dtype=complex)
    axis = np.unique(np.asarray(omega_am_mhz, dtype=float))
    tau = base_env.duration

    def one(f_am):
        cfg = AmConfig(2 * np.pi * f_am, int(n_bands))
        bands = am_bands(cfg, tau)
        fmax = max(abs(nu) for nu, _ in bands) / (2 * np.pi)
        sub = max(1, int(np.ceil(base_env.dt * samples_per_period * fmax)))
        fine = base_env.subdivide(sub)
        measured = _measured_bands(cfg, fine.dt, tau)
        mod = am_modulate(fine, cfg)
        drive = mod.i[:, None, None] * SX + mod.q[:, None, None] * SY
        deltas = frequency_to_detuning(measured)
        h = drive[None] + deltas[:, None, None, None] * SZ
        us = chain_product(expm_segments(h, fine.dt))
        infs = []
        for u, (nu, psi), f_meas in zip(us, bands, measured):
            # frame follows the measured tone; phase from the modulation law
            ub = band_frame_unitary(u, 2 * np.pi * f_meas, psi, tau)
            infs.append(1.0 - gate_fidelity(ub, target))
        return np.clip(infs, 0.0, 1.0), measured, sub

    out = _run_map(one, axis, threads)
    raw = np.array([o[0] for o in out]).T  # (band, omega)
    freqs = np.array([o[1] for o in out]).T
    env_max = np.maximum.accumulate(raw[:, ::-1], axis=1)[:, ::-1]
    ok = np.all(env_max < threshold, axis=0)
    thr = float(axis[np.argmax(ok)]) if ok.any() else None
    meta = {"pulse_id": base_env.meta.get("pulse_id", "custom"), "metric": "global_phase",
            "n_bands": int(n_bands), "frame": "band-locked",
            "subdivision": [int(o[2]) for o in out],
            "nominal_spacing_MHz": (axis / 2).tolist()}
    return CrosstalkEnvelope(axis, raw, env_max, freqs, thr, threshold, meta)


def _noise_op_and_basis(d):
    paulis = [I2, SX, SY, SZ]
    if d == 2:
        return SZ, [SX, SY, SZ]
    if d == 4:
        basis = [kron(a, b) for a in paulis for b in paulis][1:]
        return kron(SZ, I2), basis
    raise DomainError("filter_function supports one or two qubits")


def _segment_hamiltonians(env: PulseEnvelope):
    if env.ej is None:
        return env.i[:, None, None] * SX + env.q[:, None, None] * SY
    from .hamiltonians import EXCHANGE_OP

    xx, yy = kron(SX, I2) + kron(I2, SX), kron(SY, I2) + kron(I2, SY)
    return (env.i[:, None, None] * xx + env.q[:, None, None] * yy
            + env.ej[:, None, None] * EXCHANGE_OP)


def _phase_integral(x, dt):
    """Integral of exp(i x s) for s in [0, dt], elementwise."""
    small = np.abs(x * dt) < 1e-6
    xs = np.where(small, 1.0, x)
    exact = (np.exp(1j * xs * dt) - 1.0) / (1j * xs)
    series = dt * (1 + 0.5j * x * dt - (x * dt) ** 2 / 6)
    return np.where(small, series, exact)


def filter_function(env: PulseEnvelope, omega_grid) -> SweepResult:
    """First-order dephasing filter function of a control pulse.

    ``F(w) = sum_k |int_0^tau exp(i w t) R_k(t) dt|^2`` with
    ``R_k(t) = Tr(U(t)^dag N U(t) P_k) / d`` for the noise operator ``N``
    (sigma_z on qubit 1) and Pauli basis ``P_k``. Within each segment the
    control propagator is diagonalized, so the time integral is exact and
    independent of how finely the envelope is sampled.

    ``omega_grid`` is in rad/us.
    """
    omega = np.unique(np.asarray(omega_grid, dtype=float))
    h = _segment_hamiltonians(env)
    d = h.shape[-1]
    noise, basis = _noise_op_and_basis(d)
    basis = np.stack(basis)
    dt = env.dt
    w, v = np.linalg.eigh(h)
    vh = np.conj(np.swapaxes(v, -1, -2))
    uk = (v * np.exp(-1j * w * dt)[..., None, :]) @ vh
    # U(t) at each segment start
    starts = np.empty_like(uk)
    acc = np.eye(d, dtype=complex)
    for k in range(len(uk)):
        starts[k] = acc
        acc = uk[k] @ acc
    t0 = np.arange(len(uk)) * dt
    # Inside segment k: U(t0+s) = V e^{-i w s} V^dag U_k.
    # R_k(s) = sum_ab Nt_ab e^{i (w_a - w_b) s} Pt_ba / d with
    # Nt = V^dag N V and Pt = V^dag U_k P U_k^dag V.
    nt = vh @ noise @ v  # (K, d, d)
    pt = np.einsum("kai,kij,pjl,kml,kmb->kpab", vh, starts, basis, np.conj(starts), v,
                   optimize=True)
    coeff = nt[:, None, :, :] * np.swapaxes(pt, -1, -2) / d  # (K, P, a, b)
    freq = w[:, :, None] - w[:, None, :]  # (K, a, b)
    out = np.empty(len(omega))
    for j, om in enumerate(omega):
        phase = np.exp(1j * om * t0)[:, None, None] * _phase_integral(om + freq, dt)
        amp = np.einsum("kpab,kab->p", coeff, phase)
        out[j] = float(np.sum(np.abs(amp) ** 2))
    return SweepResult(omega, out, "rad/us", {"pulse_id": env.meta.get("pulse_id", "custom"),
                                              "quantity": "filter_function",
                                              "noise_operator": "sz_1"})


def fid_filter_function(omega, tau):
    """Closed form ``4 sin^2(w tau / 2) / w^2`` (``tau^2`` at ``w = 0``)."""
    omega = np.asarray(omega, dtype=float)
    safe = np.where(omega == 0, 1.0, omega)
    return np.where(omega == 0, tau**2, 4 * np.sin(safe * tau / 2) ** 2 / safe**2)
