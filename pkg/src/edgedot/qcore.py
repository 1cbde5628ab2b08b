"""Small dense-matrix quantum dynamics: propagators and gate fidelities.

Units follow the rest of the package: hbar = 1, Hamiltonian coefficients in
rad/us, time in us.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DomainError",
    "I2",
    "SX",
    "SY",
    "SZ",
    "HADAMARD",
    "CZ",
    "CNOT",
    "SegmentedHamiltonian",
    "kron",
    "is_hermitian",
    "is_unitary",
    "expm_segments",
    "chain_product",
    "propagate",
    "gate_fidelity",
    "best_local_z",
    "local_z",
]


class DomainError(ValueError):
    """Input outside the domain of an operation."""


I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10


def kron(*ops):
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def _scale(a):
    return max(1.0, float(np.max(np.abs(a), initial=0.0)))


def is_hermitian(h, tol=HERMITIAN_TOL):
    h = np.asarray(h)
    dev = np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))), initial=0.0)
    return dev <= tol * _scale(h)


def is_unitary(u, tol=UNITARY_TOL):
    u = np.asarray(u)
    d = u.shape[-1]
    prod = np.conj(np.swapaxes(u, -1, -2)) @ u
    return np.max(np.abs(prod - np.eye(d)), initial=0.0) < tol


def _check_dim(d):
    if d < 2 or d & (d - 1):
        raise DomainError(f"dimension {d} is not a power of two >= 2")
    if d > 2**10:
        raise DomainError(f"dimension {d} exceeds 2**10")


@dataclass(frozen=True)
class SegmentedHamiltonian:
    """Piecewise-constant Hamiltonian.

    Attributes
    ----------
    dt : float
        Duration of each segment in us.
    segments : ndarray, shape (K, d, d)
        Hermitian generator for each segment, rad/us.
    """

    dt: float
    segments: np.ndarray

    def __post_init__(self):
        segs = np.asarray(self.segments, dtype=complex)
        if segs.ndim != 3 or segs.shape[1] != segs.shape[2]:
            raise DomainError("segments must have shape (K, d, d)")
        _check_dim(segs.shape[1])
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if len(segs) and not is_hermitian(segs):
            raise DomainError("non-Hermitian segment")
        object.__setattr__(self, "segments", segs)

    @property
    def dim(self):
        return self.segments.shape[1]

    @property
    def duration(self):
        return len(self.segments) * self.dt


def _expm_2x2(h, dt):
    # h = a0 I + a.sigma  ->  exp(-i h dt) in closed form
    a0 = 0.5 * np.real(h[..., 0, 0] + h[..., 1, 1])
    ax = np.real(h[..., 0, 1] + h[..., 1, 0]) * 0.5
    ay = np.real(1j * (h[..., 0, 1] - h[..., 1, 0])) * 0.5
    az = 0.5 * np.real(h[..., 0, 0] - h[..., 1, 1])
    norm = np.sqrt(ax * ax + ay * ay + az * az)
    theta = norm * dt
    c = np.cos(theta)
    # sin(theta)/norm, finite as norm -> 0
    s = dt * np.sinc(theta / np.pi)
    phase = np.exp(-1j * a0 * dt)
    out = np.empty(h.shape, dtype=complex)
    out[..., 0, 0] = c - 1j * s * az
    out[..., 1, 1] = c + 1j * s * az
    out[..., 0, 1] = -1j * s * (ax - 1j * ay)
    out[..., 1, 0] = -1j * s * (ax + 1j * ay)
    return out * phase[..., None, None]


def expm_segments(h, dt):
    """Return exp(-i h dt) for a stack of Hermitian matrices."""
    h = np.asarray(h, dtype=complex)
    if h.shape[-1] == 2:
        return _expm_2x2(h, dt)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * dt)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def chain_product(us):
    """Time-ordered product ``us[-1] @ ... @ us[0]`` along axis -3.

    Uses a pairwise tree so long chains stay vectorized. Leading batch axes
    are preserved.
    """
    us = np.asarray(us)
    if us.shape[-3] == 0:
        d = us.shape[-1]
        return np.broadcast_to(np.eye(d, dtype=complex), us.shape[:-3] + (d, d)).copy()
    while us.shape[-3] > 1:
        if us.shape[-3] % 2:
            last = us[..., -1:, :, :]
            us = np.concatenate(
                [us[..., 1:-1:2, :, :] @ us[..., 0:-1:2, :, :], last], axis=-3
            )
        else:
            us = us[..., 1::2, :, :] @ us[..., 0::2, :, :]
    return us[..., 0, :, :]


def propagate(h: SegmentedHamiltonian, dim: int | None = None) -> np.ndarray:
    """Time-ordered propagator of a piecewise-constant Hamiltonian.

    The earliest segment acts first (rightmost factor). An empty segment list
    gives the identity of dimension ``dim`` (or of ``h.dim``).
    """
    if len(h.segments) == 0:
        d = dim if dim is not None else h.dim
        return np.eye(d, dtype=complex)
    return chain_product(expm_segments(h.segments, h.dt))


def _overlap_fidelity(u, target):
    d = target.shape[-1]
    g = np.trace(np.conj(target.T) @ u, axis1=-2, axis2=-1)
    return np.abs(g) ** 2 / d**2


def local_z(alpha, beta):
    """diag(1, e^{i alpha}) (x) diag(1, e^{i beta})."""
    return np.diag(
        [1.0, np.exp(1j * beta), np.exp(1j * alpha), np.exp(1j * (alpha + beta))]
    )


def best_local_z(u, target):
    """Phases (alpha, beta) maximizing |Tr(target^dag local_z(a,b) u)|.

    The overlap is a trigonometric polynomial ``c0 + c1 e^{ib} + c2 e^{ia} +
    c3 e^{i(a+b)}`` in the phases. A dense grid picks the basin; exact
    coordinate updates and Newton steps on the analytic Hessian then polish
    the maximum to machine precision, so the result is a smooth function of
    ``u``.
    """
    m = np.conj(np.asarray(target).T)
    # Tr(m D u) = sum_j D_jj (u m)_jj
    c = np.diagonal(np.asarray(u) @ m)

    def parts(a, b):
        ea, eb, eab = np.exp(1j * a), np.exp(1j * b), np.exp(1j * (a + b))
        g = c[0] + c[1] * eb + c[2] * ea + c[3] * eab
        ha = c[2] * ea + c[3] * eab
        hb = c[1] * eb + c[3] * eab
        return g, ha, hb, c[3] * eab

    grid = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    aa, bb = np.meshgrid(grid, grid, indexing="ij")
    vals = np.abs(
        c[0] + c[1] * np.exp(1j * bb) + c[2] * np.exp(1j * aa) + c[3] * np.exp(1j * (aa + bb))
    )
    i, j = np.unravel_index(np.argmax(vals), vals.shape)
    a, b = grid[i], grid[j]
    for _ in range(4):
        # each phase in closed form with the other held fixed
        x, y = c[0] + c[1] * np.exp(1j * b), c[2] + c[3] * np.exp(1j * b)
        if abs(x) > 0 and abs(y) > 0:
            a = np.angle(x) - np.angle(y)
        x, y = c[0] + c[2] * np.exp(1j * a), c[1] + c[3] * np.exp(1j * a)
        if abs(x) > 0 and abs(y) > 0:
            b = np.angle(x) - np.angle(y)
    f = abs(parts(a, b)[0]) ** 2
    for _ in range(50):
        g, ha, hb, hab = parts(a, b)
        ga, gb = 1j * ha, 1j * hb
        grad = 2 * np.real(np.conj(g) * np.array([ga, gb]))
        hess = 2 * np.real(np.array([
            [np.conj(ga) * ga - np.conj(g) * ha, np.conj(ga) * gb - np.conj(g) * hab],
            [np.conj(gb) * ga - np.conj(g) * hab, np.conj(gb) * gb - np.conj(g) * hb],
        ]))
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        na, nb = a + step[0], b + step[1]
        nf = abs(parts(na, nb)[0]) ** 2
        if nf < f:
            break
        done = np.max(np.abs(step)) < 1e-15
        a, b, f = na, nb, nf
        if done:
            break
    return float(np.mod(a, 2 * np.pi)), float(np.mod(b, 2 * np.pi))


def gate_fidelity(u, target, freedom: str = "global_phase") -> float:
    """Overlap fidelity ``|Tr(target^dag u)|^2 / d^2``.

    Parameters
    ----------
    u, target : ndarray
        Unitaries of equal dimension.
    freedom : {"global_phase", "local_z_and_global"}
        ``local_z_and_global`` (two-qubit only) additionally maximizes over
        single-qubit Z phases applied after ``u``.
    """
    u = np.asarray(u, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if u.shape != target.shape or u.ndim != 2:
        raise DomainError(f"shape mismatch: {u.shape} vs {target.shape}")
    if freedom == "global_phase":
        return float(min(1.0, _overlap_fidelity(u, target)))
    if freedom == "local_z_and_global":
        if u.shape[0] != 4:
            raise DomainError("local_z_and_global needs two-qubit gates")
        a, b = best_local_z(u, target)
        f = _overlap_fidelity(local_z(a, b) @ u, target)
        return float(min(1.0, max(f, _overlap_fidelity(u, target))))
    raise DomainError(f"unknown freedom {freedom!r}")
