"""How many AM bands does a population of g-factor offsets need?

Each qubit is Stark-shifted to its nearest band within a fixed tuning range;
a qubit fails if the shift is out of range, leaves the single-electron
window, or needs a trimming resistance the device cannot provide.
"""
import numpy as np

from edgedot.hamiltonians import StarkCalibration
from edgedot.trimmer import DotVoltageWindow, TrimmerDevice, trim_plan

g = np.random.default_rng(0).normal(0.0, 5e-3, 1000)
window = DotVoltageWindow(1.0, 1.5, 1.5)
for n in (5, 10, 20, 50, 100, 200):
    plan = trim_plan(g, np.linspace(-1.5e-2, 1.5e-2, n), 4.5e-4, StarkCalibration(), window,
                     TrimmerDevice(), 1.25)
    reasons = sorted({r for _, r, _ in plan.failures})
    print(f"N = {n:3d}: {plan.n_failures:4d} failures {reasons}")
print(f"largest |delta_g| in the population: {np.abs(g).max():.4f}")
