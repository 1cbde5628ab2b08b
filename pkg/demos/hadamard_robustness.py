"""Optimize the reference GRAPE Hadamard and compare it with square pulses.

Prints the zero-detuning infidelity, the width of the 1e-3 detuning window
for both pulses, and the low-frequency filter function next to free
induction decay. Run with ``python demos/hadamard_robustness.py``.
"""
import numpy as np

from edgedot.analysis import detuning_sweep, fid_filter_function, filter_function, window_width
from edgedot.grape import optimize_single_qubit, reference_hadamard_config
from edgedot.pulses import composite_square_hadamard, square_rotation
from edgedot.qcore import HADAMARD

res = optimize_single_qubit(HADAMARD, reference_hadamard_config())
env = res.envelope
square = composite_square_hadamard()
print(f"GRAPE: {res.iterations} iterations, {res.wall_time:.1f} s, "
      f"duration {env.duration:g} us ({env.duration / square_rotation('x', np.pi).duration:g}x a square pi)")
print(f"zero-detuning infidelity {res.final_infidelities[len(res.final_infidelities) // 2]:.2e}")

grid = np.linspace(-2e-5, 2e-5, 801)
w_grape = window_width(detuning_sweep(env, HADAMARD, grid))
w_square = window_width(detuning_sweep(square, HADAMARD, grid))
print(f"1e-3 window in delta_g: GRAPE {w_grape:.3e}, square {w_square:.3e} "
      f"(ratio {w_grape / w_square:.1f})")

omega = 2 * np.pi * np.array([0.001, 0.003, 0.01, 0.03])
ff = filter_function(env, omega).values
fid = fid_filter_function(omega, env.duration)
for w, a, b in zip(omega, ff, fid):
    print(f"  f = {w / (2 * np.pi):6.3f} MHz   F_grape = {a:9.3e}   F_fid = {b:9.3e}")
