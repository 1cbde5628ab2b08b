"""Independent reference implementations used only by the tests.

These deliberately take the slow, obvious route (scipy.linalg.expm, explicit
loops, numerical quadrature) so they share no code paths with the package.
"""
import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def propagate_expm(segments, dt):
    u = np.eye(segments.shape[-1], dtype=complex)
    for h in segments:
        u = expm(-1j * h * dt) @ u
    return u


def single_qubit_segments(i, q, delta=0.0):
    return np.array([a * X + b * Y + delta * Z for a, b in zip(i, q)])


def two_qubit_segments(i, q, ej, d1=0.0, d2=0.0):
    x = np.kron(X, I2) + np.kron(I2, X)
    y = np.kron(Y, I2) + np.kron(I2, Y)
    zz = np.kron(Z, Z)
    z1, z2 = np.kron(Z, I2), np.kron(I2, Z)
    out = []
    for a, b, e in zip(i, q, ej):
        out.append(a * x + b * y + e * (zz - np.eye(4)) / 2 + d1 * z1 + d2 * z2)
    return np.array(out)


def fidelity_loop(u, t):
    d = u.shape[0]
    s = 0j
    for a in range(d):
        for b in range(d):
            s += np.conj(t[a, b]) * u[a, b]
    return abs(s) ** 2 / d**2


def best_local_z_brute(u, t, n=720):
    """Fidelity maximized over Z phases on a dense grid (no polishing)."""
    best = 0.0
    grid = np.linspace(0, 2 * np.pi, n, endpoint=False)
    for a in grid[:: max(1, n // 180)]:
        for b in grid[:: max(1, n // 180)]:
            dz = np.diag([1, np.exp(1j * b), np.exp(1j * a), np.exp(1j * (a + b))])
            best = max(best, fidelity_loop(dz @ u, t))
    return best


def fid_closed_form(omega, tau):
    omega = np.asarray(omega, dtype=float)
    return 4 * np.sin(omega * tau / 2) ** 2 / omega**2


def filter_function_quad(i, q, dt, omega, noise=Z, sub=64):
    """First-order filter function by brute-force time sampling.

    Propagators are built by explicit expm on a fine sub-grid, and the
    Fourier integral of each R_k(t) is done by the composite midpoint rule.
    """
    paulis = [X, Y, Z]
    d = 2
    ts, rs = [], []
    u = np.eye(d, dtype=complex)
    h_dt = dt / sub
    t = 0.0
    for a, b in zip(i, q):
        step = expm(-1j * (a * X + b * Y) * h_dt / 2)
        for _ in range(sub):
            u_mid = step @ u
            ts.append(t + h_dt / 2)
            rs.append([np.trace(u_mid.conj().T @ noise @ u_mid @ p).real / d for p in paulis])
            u = step @ u_mid
            t += h_dt
    ts, rs = np.array(ts), np.array(rs)
    out = []
    for w in np.atleast_1d(omega):
        ph = np.exp(1j * w * ts) * h_dt
        out.append(float(np.sum(np.abs(ph @ rs) ** 2)))
    return np.array(out)


def singlet():
    return np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def pauli_string(ops, n, support):
    full = [I2] * n
    for o, s in zip(ops, support):
        full[s] = o
    out = np.array([[1.0 + 0j]])
    for f in full:
        out = np.kron(out, f)
    return out


def stabilizer_eigenstate(n, data, xsign=1, zsign=1, seed=0):
    """Project a random state onto a joint XXXX/ZZZZ eigenspace on ``data``.

    The remaining spins are left in a random product state; the result is
    normalized.
    """
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    xs = pauli_string([X] * 4, n, data)
    zs = pauli_string([Z] * 4, n, data)
    p = (np.eye(2**n) + xsign * xs) / 2 @ ((np.eye(2**n) + zsign * zs) / 2)
    psi = p @ psi
    return psi / np.linalg.norm(psi)


def divider(v_dd, r_ch, r_d):
    # current through the series pair, times the downstream resistance
    current = v_dd / (r_ch + r_d)
    return current * r_d


def mediated_exchange_direct(t_dm, t_am, eps_dm, eps_am, delta_m):
    return (t_dm * t_dm) * (t_am * t_am) / eps_dm / eps_am / delta_m
