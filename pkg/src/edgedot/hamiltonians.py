"""Control Hamiltonians for global ESR driving and mediated exchange.

Coefficients are used exactly as written in the rotating-frame models: a
constant in-phase amplitude ``I`` held for a time ``t`` rotates the spin by
``2 I t`` about x, and a detuning term ``dw * sigma_z`` corresponds to a
Larmor offset of ``2 dw`` rad/us, i.e. ``dw = pi * df`` for ``df`` in MHz.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .qcore import I2, SX, SY, SZ, DomainError, SegmentedHamiltonian, kron

__all__ = [
    "BOHR_MHZ_PER_T",
    "UEV_TO_RAD_PER_US",
    "EXCHANGE_OP",
    "ExchangeValidityWarning",
    "SingleQubitFrame",
    "TwoQubitFrame",
    "MediatorParams",
    "StarkCalibration",
    "build_single_qubit_h",
    "build_two_qubit_h",
    "mediated_exchange",
    "exchange_vs_mediator_voltage",
    "g_shift_to_frequency",
    "frequency_to_g_shift",
    "g_shift_to_voltage",
    "voltage_to_g_shift",
    "frequency_to_detuning",
    "detuning_to_frequency",
    "g_shift_to_detuning",
    "detuning_to_g_shift",
]

#: mu_B / h in MHz per tesla.
BOHR_MHZ_PER_T = constants.physical_constants["Bohr magneton in Hz/T"][0] * 1e-6
#: 1 ueV expressed as an angular frequency in rad/us.
UEV_TO_RAD_PER_US = constants.e * 1e-6 / constants.hbar * 1e-6

#: Exchange generator diag(0, -1, -1, 0) = (ZZ - I) / 2.
EXCHANGE_OP = np.diag([0.0, -1.0, -1.0, 0.0]).astype(complex)

_X1, _X2 = kron(SX, I2), kron(I2, SX)
_Y1, _Y2 = kron(SY, I2), kron(I2, SY)
_Z1, _Z2 = kron(SZ, I2), kron(I2, SZ)


class ExchangeValidityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SingleQubitFrame:
    delta_omega: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.delta_omega):
            raise DomainError("delta_omega must be finite")


@dataclass(frozen=True)
class TwoQubitFrame:
    delta_omega_1: float = 0.0
    delta_omega_2: float = 0.0
    # Zeeman energy at 1 T for g = 2, rad/us
    e_z: float = 2 * np.pi * 2.0 * BOHR_MHZ_PER_T

    def __post_init__(self):
        if not (np.isfinite(self.delta_omega_1) and np.isfinite(self.delta_omega_2)):
            raise DomainError("detunings must be finite")
        if not self.e_z > 0:
            raise DomainError("e_z must be positive")


@dataclass(frozen=True)
class MediatorParams:
    """Tunnel couplings and detunings (all in ueV)."""

    t_dm: float
    t_am: float
    eps_dm: float
    eps_am: float
    delta_m: float


@dataclass(frozen=True)
class StarkCalibration:
    dg_dv: float = 0.002
    b0: float = 1.0
    g_ref: float = 2.0

    def __post_init__(self):
        if not self.b0 > 0:
            raise DomainError("b0 must be positive")
        if self.dg_dv == 0:
            raise DomainError("dg_dv must be non-zero")


def build_single_qubit_h(envelope, frame: SingleQubitFrame) -> SegmentedHamiltonian:
    """Segments ``I[k] sx + Q[k] sy + dw sz``."""
    if envelope.ej is not None:
        raise DomainError("single-qubit Hamiltonian got an exchange channel")
    i = np.asarray(envelope.i, dtype=float)[:, None, None]
    q = np.asarray(envelope.q, dtype=float)[:, None, None]
    segs = i * SX + q * SY + frame.delta_omega * SZ
    return SegmentedHamiltonian(envelope.dt, segs)


def build_two_qubit_h(envelope, frame: TwoQubitFrame, *, strict: bool = True,
                      validity_factor: float = 10.0) -> SegmentedHamiltonian:
    """Two spins under a shared I/Q drive plus exchange.

    ``max|E_J| > e_z / validity_factor`` raises in strict mode and warns
    otherwise.
    """
    n = len(envelope.i)
    ej = np.zeros(n) if envelope.ej is None else np.asarray(envelope.ej, dtype=float)
    cap = frame.e_z / validity_factor
    if n and np.max(np.abs(ej)) > cap:
        msg = f"max|E_J| = {np.max(np.abs(ej)):.6g} exceeds E_Z/{validity_factor:g} = {cap:.6g}"
        if strict:
            raise DomainError(msg)
        warnings.warn(msg, ExchangeValidityWarning, stacklevel=2)
    i = np.asarray(envelope.i, dtype=float)[:, None, None]
    q = np.asarray(envelope.q, dtype=float)[:, None, None]
    static = frame.delta_omega_1 * _Z1 + frame.delta_omega_2 * _Z2
    segs = i * (_X1 + _X2) + q * (_Y1 + _Y2) + ej[:, None, None] * EXCHANGE_OP + static
    return SegmentedHamiltonian(envelope.dt, segs)


def mediated_exchange(p: MediatorParams) -> float:
    """Mediator-assisted exchange ``t_dm^2 t_am^2 / (eps_dm eps_am delta_m)`` in ueV."""
    for name in ("eps_dm", "eps_am", "delta_m"):
        if not getattr(p, name) > 0:
            raise DomainError(f"{name} must be positive, got {getattr(p, name)}")
    return p.t_dm**2 * p.t_am**2 / (p.eps_dm * p.eps_am * p.delta_m)


def exchange_vs_mediator_voltage(v_m, j_ref, v_ref):
    """Inverse-square scaling of the exchange with the mediator gate voltage."""
    v_m = np.asarray(v_m, dtype=float)
    if np.any(v_m <= 0) or not v_ref > 0:
        raise DomainError("voltages must be positive")
    out = j_ref * (v_ref / v_m) ** 2
    return float(out) if out.ndim == 0 else out


def g_shift_to_frequency(delta_g, cal: StarkCalibration):
    """Zeeman frequency shift in MHz: ``delta_g * mu_B * B0 / h``."""
    return np.multiply(delta_g, BOHR_MHZ_PER_T * cal.b0)


def frequency_to_g_shift(df_mhz, cal: StarkCalibration):
    return np.divide(df_mhz, BOHR_MHZ_PER_T * cal.b0)


def g_shift_to_voltage(delta_g, cal: StarkCalibration):
    """Gate-voltage change (V) producing ``delta_g`` via the Stark slope."""
    return np.divide(delta_g, cal.dg_dv)


def voltage_to_g_shift(delta_v, cal: StarkCalibration):
    return np.multiply(delta_v, cal.dg_dv)


def frequency_to_detuning(df_mhz):
    """Larmor offset in MHz -> sigma_z coefficient in rad/us."""
    return np.multiply(df_mhz, np.pi)


def detuning_to_frequency(delta_omega):
    return np.divide(delta_omega, np.pi)


def g_shift_to_detuning(delta_g, cal: StarkCalibration):
    return frequency_to_detuning(g_shift_to_frequency(delta_g, cal))


def detuning_to_g_shift(delta_omega, cal: StarkCalibration):
    return frequency_to_g_shift(detuning_to_frequency(delta_omega), cal)
