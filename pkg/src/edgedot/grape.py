"""Gradient-based pulse engineering for the global-drive gate set.

The single-qubit problem shapes shared I/Q envelopes; the two-qubit problem
adds a non-negative exchange channel and asks that the same I/Q drive give a
CZ where exchange is on and the identity where it is off.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .hamiltonians import EXCHANGE_OP, BOHR_MHZ_PER_T
from .pulses import PI_HALF_AMP, PulseEnvelope
from .qcore import (CZ, I2, SX, SY, SZ, DomainError, best_local_z, chain_product,
                    expm_segments, kron, local_z)

__all__ = [
    "GrapeConfig",
    "OptimizationResult",
    "gauss_hermite_samples",
    "uniform_samples",
    "objective_and_gradient",
    "optimize_single_qubit",
    "optimize_decoupled_cz",
    "reference_cz_config",
    "single_qubit_unitary",
    "decoupled_cz_unitaries",
    "branch_infidelities",
    "spectral_cutoff",
    "spectral_q_for_cutoff",
    "reference_hadamard_config",
]

_Z1, _Z2 = kron(SZ, I2), kron(I2, SZ)
_XX = kron(SX, I2) + kron(I2, SX)
_YY = kron(SY, I2) + kron(I2, SY)
_I4 = np.eye(4, dtype=complex)


def gauss_hermite_samples(sigma: float, n: int = 5):
    """Quasi-static Gaussian detuning as ``((delta_omega, weight), ...)``."""
    if sigma == 0:
        return ((0.0, 1.0),)
    x, w = np.polynomial.hermite.hermgauss(n)
    nodes = np.sqrt(2.0) * sigma * x
    weights = w / np.sqrt(np.pi)
    nodes[np.abs(nodes) < 1e-15] = 0.0
    return tuple((float(a), float(b)) for a, b in zip(nodes, weights / weights.sum()))


def uniform_samples(span: float, n: int):
    """Equal-weight detunings spread evenly over ``[-span, span]``."""
    if n == 1 or span == 0:
        return ((0.0, 1.0),)
    nodes = np.linspace(-span, span, n)
    nodes[np.abs(nodes) < 1e-15] = 0.0
    return tuple((float(a), 1.0 / n) for a in nodes)


@dataclass(frozen=True)
class GrapeConfig:
    n_segments: int = 600
    duration: float = 6.0
    amp_limit: float = PI_HALF_AMP
    ej_limit: float | None = None
    detuning_samples: tuple = ((0.0, 1.0),)
    spectral_q: float | None = None
    spectral_weight: float = 1e-3
    carrier_mhz: float = 2.0 * BOHR_MHZ_PER_T
    max_iters: int = 5000
    tolerance: float = 1e-4
    seed: int = 0
    step_rule: str = "backtracking"
    step_size: float = 0.5
    init: str = "smooth"
    init_scale: float = 1.0
    init_knots: int = 24
    cz_weight: float = 0.5
    id_weight: float = 0.5
    freedom: str = "global_phase"

    def __post_init__(self):
        if int(self.n_segments) < 2:
            raise DomainError("n_segments must be >= 2")
        if not self.duration > 0:
            raise DomainError("duration must be positive")
        if int(self.max_iters) < 1:
            raise DomainError("max_iters must be >= 1")
        if not self.detuning_samples:
            raise DomainError("detuning_samples must not be empty")
        wsum = sum(w for _, w in self.detuning_samples)
        if abs(wsum - 1.0) > 1e-9:
            raise DomainError(f"detuning weights sum to {wsum}, expected 1")
        if self.step_rule not in ("fixed", "backtracking", "lbfgs"):
            raise DomainError(f"unknown step_rule {self.step_rule!r}")
        if self.init not in ("smooth", "random", "zeros"):
            raise DomainError(f"unknown init {self.init!r}")
        if self.freedom not in ("global_phase", "local_z_and_global"):
            raise DomainError(f"unknown freedom {self.freedom!r}")

    @property
    def dt(self):
        return self.duration / int(self.n_segments)


@dataclass
class OptimizationResult:
    envelope: PulseEnvelope
    objective_trace: list
    converged: bool
    final_infidelities: list
    iterations: int = 0
    wall_time: float = 0.0
    metric: str = "global_phase"
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class _Term:
    drift: np.ndarray
    target: np.ndarray
    weight: float
    mask: np.ndarray  # which controls act in this term
    relax: bool = False  # score up to local Z phases when the problem allows it


class _Problem:
    """Piecewise-constant control problem over a batch of terms."""

    def __init__(self, ctrl_ops, terms, dt, freedom="global_phase"):
        self.ctrl_ops = np.asarray(ctrl_ops, dtype=complex)  # (C, d, d)
        self.terms = terms
        self.dt = dt
        self.freedom = freedom
        self.drift = np.stack([t.drift for t in terms])  # (S, d, d)
        self.targets = np.stack([t.target for t in terms])
        self.weights = np.array([t.weight for t in terms])
        self.masks = np.stack([t.mask for t in terms]).astype(float)  # (S, C)
        self.d = self.ctrl_ops.shape[-1]

    def hamiltonians(self, u):
        # (S, K, d, d)
        amps = self.masks[:, :, None] * u[None, :, :]  # (S, C, K)
        h = np.einsum("sck,cij->skij", amps, self.ctrl_ops)
        return h + self.drift[:, None, :, :]

    def unitaries(self, u):
        return chain_product(expm_segments(self.hamiltonians(u), self.dt))

    def _targets_for(self, us):
        if self.freedom == "global_phase":
            return self.targets
        out = []
        for u, t, term in zip(us, self.targets, self.terms):
            if not term.relax:
                out.append(t)
                continue
            a, b = best_local_z(u, t)
            # F = |Tr(t^dag D u)|^2 = |Tr((D^dag t)^dag u)|^2
            out.append(np.conj(local_z(a, b)).T @ t)
        return np.stack(out)

    def infidelities(self, u):
        us = self.unitaries(u)
        tg = self._targets_for(us)
        g = np.einsum("sji,sji->s", np.conj(tg), us)
        return 1.0 - np.abs(g) ** 2 / self.d**2

    def objective(self, u):
        return float(np.dot(self.weights, self.infidelities(u)))

    def objective_and_gradient(self, u):
        h = self.hamiltonians(u)
        w, v = np.linalg.eigh(h)  # (S, K, d), (S, K, d, d)
        vh = np.conj(np.swapaxes(v, -1, -2))
        expw = np.exp(-1j * w * self.dt)
        uk = (v * expw[..., None, :]) @ vh
        n_s, n_k = uk.shape[:2]
        d = self.d
        # R_k = U_{k-1}...U_0,  L_k = T^dag U_{K-1}...U_{k+1}
        right = np.empty_like(uk)
        acc = np.broadcast_to(np.eye(d, dtype=complex), (n_s, d, d)).copy()
        for k in range(n_k):
            right[:, k] = acc
            acc = uk[:, k] @ acc
        total = acc
        tg = self._targets_for(total)
        tdag = np.conj(np.swapaxes(tg, -1, -2))
        left = np.empty_like(uk)
        acc = tdag.copy()
        for k in range(n_k - 1, -1, -1):
            left[:, k] = acc
            acc = acc @ uk[:, k]
        g = np.einsum("sii->s", acc)
        fid = np.abs(g) ** 2 / d**2
        m = right @ left  # dg = Tr(M_k dU_k)
        mt = vh @ m @ v
        # divided differences of exp(-i lambda dt)
        lam_a = w[..., :, None]
        lam_b = w[..., None, :]
        mid = 0.5 * (lam_a + lam_b)
        half = 0.5 * (lam_a - lam_b) * self.dt
        gmat = -1j * self.dt * np.exp(-1j * mid * self.dt) * np.sinc(half / np.pi)
        core = np.swapaxes(mt, -1, -2) * gmat  # (S, K, d, d)
        e = np.einsum("skai,cij,skjb->skcab", vh, self.ctrl_ops, v)
        dg = np.einsum("skab,skcab->skc", core, e)  # (S, K, C)
        dfid = 2 * np.real(np.conj(g)[:, None, None] * dg) / d**2
        dfid = dfid * self.masks[:, None, :]
        grad = -np.einsum("s,skc->ck", self.weights, dfid)
        obj = float(np.dot(self.weights, 1.0 - fid))
        return obj, grad, 1.0 - fid


def objective_and_gradient(envelope: PulseEnvelope, target, samples):
    """Weighted infidelity and its exact gradient for a fixed envelope.

    Single-qubit envelopes (no exchange channel) return a gradient of shape
    ``(S, 2, K)``: one ``(I, Q)`` gradient per detuning sample, each
    unweighted. The objective is the weighted mean infidelity.
    """
    target = np.asarray(target, dtype=complex)
    if envelope.ej is not None or target.shape != (2, 2):
        raise DomainError("objective_and_gradient expects a single-qubit envelope and 2x2 target")
    u = np.stack([envelope.i, envelope.q])
    per_sample = []
    total = 0.0
    for delta, weight in samples:
        prob = _Problem([SX, SY], [_Term(delta * SZ, target, 1.0, np.ones(2))], envelope.dt)
        obj, grad, _ = prob.objective_and_gradient(u)
        per_sample.append(grad)
        total += weight * obj
    return total, np.stack(per_sample)


def spectral_cutoff(cfg: GrapeConfig) -> float:
    """Low-pass corner ``f0 / (2 Q)`` in MHz for the spectral penalty."""
    return cfg.carrier_mhz / (2 * cfg.spectral_q)


def spectral_q_for_cutoff(cutoff_mhz: float, carrier_mhz: float = 2.0 * BOHR_MHZ_PER_T) -> float:
    """Quality factor whose corner ``carrier / (2 Q)`` sits at ``cutoff_mhz``."""
    if not cutoff_mhz > 0:
        raise DomainError("cutoff must be positive")
    return carrier_mhz / (2 * cutoff_mhz)


def reference_hadamard_config(seed: int = 0) -> GrapeConfig:
    """Settings of the reference robust Hadamard.

    600 segments over 6 us at the square-pulse amplitude cap, trained on
    five Gauss-Hermite detunings of width 0.15 rad/us, with a 1 MHz spectral
    penalty so the envelope stays smooth enough for band modulation.
    """
    return GrapeConfig(
        n_segments=600, duration=6.0, amp_limit=PI_HALF_AMP,
        detuning_samples=gauss_hermite_samples(0.15, 5),
        spectral_q=spectral_q_for_cutoff(1.0), spectral_weight=1.0,
        max_iters=5000, tolerance=1e-4, seed=seed, step_rule="lbfgs", init="smooth",
    )


def reference_cz_config(seed: int = 0) -> GrapeConfig:
    """Settings of the reference decoupled CZ / identity pair.

    400 segments over 4 us, exchange capped at 1 rad/us, trained on three
    Gauss-Hermite detunings of width 0.05 rad/us applied to each qubit. The
    CZ branch is scored up to local Z phases; the identity branch is exact.
    """
    return GrapeConfig(
        n_segments=400, duration=4.0, amp_limit=PI_HALF_AMP, ej_limit=1.0,
        detuning_samples=gauss_hermite_samples(0.05, 3), spectral_q=None,
        max_iters=5000, tolerance=1e-4, seed=seed, step_rule="lbfgs", init="smooth",
        freedom="local_z_and_global",
    )


def _spectral_penalty(u, cfg: GrapeConfig):
    """Power of I+iQ above the cutoff; returns (value, gradient on I/Q).

    The envelope is zero-padded to twice its length before the FFT so that
    switching on and off counts toward the out-of-band power. The value is
    the mean out-of-band power, ``sum |X_f|^2 / (n K)`` over masked bins.
    """
    c = u[0] + 1j * u[1]
    k = len(c)
    n = 2 * k
    mask = np.abs(np.fft.fftfreq(n, cfg.dt)) > spectral_cutoff(cfg)
    x = np.fft.fft(c, n)
    val = float(np.sum(np.abs(x[mask]) ** 2)) / (n * k)
    back = np.fft.ifft(np.where(mask, x, 0))[:k] / k
    grad = np.zeros((2, k))
    grad[0] = 2 * np.real(back)
    grad[1] = 2 * np.imag(back)
    return val, grad


def _initial_controls(cfg: GrapeConfig, n_ctrl: int):
    """Seeded starting envelopes, in units of ``amp_limit``.

    ``smooth`` draws uniform values on ``init_knots`` evenly spaced knots and
    interpolates linearly; per-segment white noise (``random``) carries little
    low-frequency weight when segments are short.
    """
    k = int(cfg.n_segments)
    rng = np.random.default_rng(cfg.seed)
    if cfg.init == "zeros":
        return np.zeros((n_ctrl, k))
    if cfg.init == "random":
        return rng.uniform(-cfg.init_scale, cfg.init_scale, size=(n_ctrl, k)) * cfg.amp_limit
    knots = rng.uniform(-cfg.init_scale, cfg.init_scale, size=(n_ctrl, cfg.init_knots))
    xk = np.linspace(0.0, 1.0, cfg.init_knots)
    x = (np.arange(k) + 0.5) / k
    return np.stack([np.interp(x, xk, row) for row in knots]) * cfg.amp_limit


def _min_rotation_angle(target):
    t = target / np.sqrt(np.linalg.det(target))
    return 2 * np.arccos(min(1.0, abs(np.trace(t)) / 2))


def _run(problem: _Problem, u0, lo, hi, cfg: GrapeConfig):
    use_spec = cfg.spectral_q is not None and problem.ctrl_ops.shape[0] >= 2

    def f_and_g(u):
        obj, grad, inf = problem.objective_and_gradient(u)
        if use_spec:
            pv, pg = _spectral_penalty(u, cfg)
            obj += cfg.spectral_weight * pv
            grad = grad.copy()
            grad[:2] += cfg.spectral_weight * pg
        return obj, grad

    def f_only(u):
        obj = problem.objective(u)
        if use_spec:
            obj += cfg.spectral_weight * _spectral_penalty(u, cfg)[0]
        return obj

    u = np.clip(u0, lo, hi)
    trace = []
    iters = 0
    if cfg.step_rule == "lbfgs":
        from scipy.optimize import minimize

        shape = u.shape
        obj0 = f_only(u)
        trace.append(obj0)
        if obj0 < cfg.tolerance:
            return u, trace, 0

        class _Done(Exception):
            pass

        state = {"u": u, "n": 0}

        def fun(x):
            obj, grad = f_and_g(x.reshape(shape))
            return obj, grad.ravel()

        def cb(xk):
            state["n"] += 1
            state["u"] = xk.reshape(shape).copy()
            val = f_only(state["u"])
            trace.append(val)
            if val < cfg.tolerance:
                raise _Done

        bounds = list(zip(np.broadcast_to(lo, shape).ravel(), np.broadcast_to(hi, shape).ravel()))
        try:
            res = minimize(fun, u.ravel(), jac=True, method="L-BFGS-B", bounds=bounds,
                           callback=cb, options={"maxiter": int(cfg.max_iters), "maxcor": 30,
                                                 "ftol": 1e-16, "gtol": 1e-14, "maxls": 40})
            state["u"] = res.x.reshape(shape)
        except _Done:
            pass
        return state["u"], trace, state["n"]

    obj, grad = f_and_g(u)
    trace.append(obj)
    step = cfg.step_size
    while iters < cfg.max_iters and obj >= cfg.tolerance:
        if cfg.step_rule == "fixed":
            u = np.clip(u - step * grad, lo, hi)
            obj, grad = f_and_g(u)
        else:
            for _ in range(60):
                trial = np.clip(u - step * grad, lo, hi)
                t_obj = f_only(trial)
                # Armijo on the projected step
                if t_obj <= obj - 1e-4 * np.sum(grad * (u - trial)):
                    break
                step *= 0.5
            else:
                break
            if t_obj > obj:
                break
            u = trial
            obj, grad = f_and_g(u)
            step *= 2.0
        iters += 1
        trace.append(obj)
    return u, trace, iters


def optimize_single_qubit(target, cfg: GrapeConfig) -> OptimizationResult:
    """Shape I/Q so the drive realizes ``target`` across the detuning samples."""
    target = np.asarray(target, dtype=complex)
    if target.shape != (2, 2):
        raise DomainError("target must be 2x2")
    if 2 * cfg.amp_limit * cfg.duration < _min_rotation_angle(target) - 1e-12:
        raise DomainError("amplitude limit too small to reach the target within the duration")
    u0 = _initial_controls(cfg, 2)
    terms = [_Term(delta * SZ, target, weight, np.ones(2)) for delta, weight in cfg.detuning_samples]
    problem = _Problem([SX, SY], terms, cfg.dt)
    t0 = time.perf_counter()
    u, trace, iters = _run(problem, u0, -cfg.amp_limit, cfg.amp_limit, cfg)
    wall = time.perf_counter() - t0
    inf = problem.infidelities(u)
    env = PulseEnvelope(cfg.dt, u[0], u[1], amp_limit=cfg.amp_limit,
                        meta={"pulse_id": "grape-1q", "seed": cfg.seed})
    return OptimizationResult(env, trace, bool(trace[-1] < cfg.tolerance), [float(x) for x in inf],
                              iters, wall, "global_phase",
                              {"samples": [list(s) for s in cfg.detuning_samples]})


def _cz_terms(cfg: GrapeConfig):
    terms = []
    for d1, w1 in cfg.detuning_samples:
        for d2, w2 in cfg.detuning_samples:
            drift = d1 * _Z1 + d2 * _Z2
            terms.append(_Term(drift, CZ, cfg.cz_weight * w1 * w2, np.array([1.0, 1.0, 1.0]), True))
            terms.append(_Term(drift, _I4, cfg.id_weight * w1 * w2, np.array([1.0, 1.0, 0.0])))
    return terms


def optimize_decoupled_cz(cfg: GrapeConfig) -> OptimizationResult:
    """Joint CZ / identity optimization of a shared I/Q drive and exchange pulse."""
    if cfg.ej_limit is None:
        raise DomainError("two-qubit optimization needs ej_limit")
    if cfg.ej_limit * cfg.duration < np.pi / 2 - 1e-12:
        raise DomainError("exchange limit too small to accumulate a CZ phase")
    u0 = np.zeros((3, int(cfg.n_segments)))
    u0[:2] = _initial_controls(cfg, 2)
    if cfg.init != "zeros":
        u0[2] = 0.5 * (np.pi / 2) / cfg.duration
    wsum = cfg.cz_weight + cfg.id_weight
    terms = [replace(t, weight=t.weight / wsum) for t in _cz_terms(cfg)]
    problem = _Problem([_XX, _YY, EXCHANGE_OP], terms, cfg.dt, cfg.freedom)
    lo = np.array([-cfg.amp_limit, -cfg.amp_limit, 0.0])[:, None]
    hi = np.array([cfg.amp_limit, cfg.amp_limit, cfg.ej_limit])[:, None]
    t0 = time.perf_counter()
    u, trace, iters = _run(problem, u0, lo, hi, cfg)
    wall = time.perf_counter() - t0
    inf = problem.infidelities(u)
    env = PulseEnvelope(cfg.dt, u[0], u[1], u[2], cfg.amp_limit, cfg.ej_limit,
                        meta={"pulse_id": "grape-cz", "seed": cfg.seed})
    labels = [(t.drift[0, 0].real, "cz" if t.mask[2] else "id") for t in terms]
    return OptimizationResult(env, trace, bool(trace[-1] < cfg.tolerance), [float(x) for x in inf],
                              iters, wall, cfg.freedom, {"terms": len(labels)})


def single_qubit_unitary(env: PulseEnvelope, delta_omega: float = 0.0):
    h = env.i[:, None, None] * SX + env.q[:, None, None] * SY + delta_omega * SZ
    return chain_product(expm_segments(h, env.dt))


def decoupled_cz_unitaries(env: PulseEnvelope, d1: float = 0.0, d2: float = 0.0):
    """Propagators with exchange on (CZ branch) and off (identity branch)."""
    ej = np.zeros(len(env)) if env.ej is None else env.ej
    base = env.i[:, None, None] * _XX + env.q[:, None, None] * _YY + d1 * _Z1 + d2 * _Z2
    u_cz = chain_product(expm_segments(base + ej[:, None, None] * EXCHANGE_OP, env.dt))
    u_id = chain_product(expm_segments(base, env.dt))
    return u_cz, u_id


def branch_infidelities(env: PulseEnvelope, d1: float = 0.0, d2: float = 0.0,
                        freedom: str = "global_phase", cz_correction=None):
    """``(1 - F_cz, 1 - F_id)`` for a two-qubit envelope.

    ``freedom`` sets the CZ-branch metric; the identity branch is always
    scored up to a global phase only. ``cz_correction`` is an optional fixed
    4x4 unitary applied after the CZ branch, e.g. a virtual-Z frame update
    calibrated at zero detuning.
    """
    from .qcore import gate_fidelity

    u_cz, u_id = decoupled_cz_unitaries(env, d1, d2)
    if cz_correction is not None:
        u_cz = cz_correction @ u_cz
    return (1.0 - gate_fidelity(u_cz, CZ, freedom), 1.0 - gate_fidelity(u_id, _I4))
