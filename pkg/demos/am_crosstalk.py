"""Cross-talk between ten amplitude-modulated bands.

For each band spacing the Hadamard pulse is modulated onto all ten bands at
once and every band's qubit is scored in its own rotating frame. The
threshold spacing is the smallest one beyond which every band stays below
1e-3. A coarse grid keeps the demo short; pass ``--fine`` for 1 MHz steps.
"""
import argparse

import numpy as np

from edgedot.analysis import am_crosstalk_envelope
from edgedot.grape import optimize_single_qubit, reference_hadamard_config
from edgedot.pulses import composite_square_hadamard
from edgedot.qcore import HADAMARD

ap = argparse.ArgumentParser()
ap.add_argument("--fine", action="store_true")
args = ap.parse_args()
grid = np.arange(1.0, 201.0, 1.0 if args.fine else 10.0)

grape = optimize_single_qubit(HADAMARD, reference_hadamard_config()).envelope
for name, env in [("GRAPE", grape), ("square", composite_square_hadamard())]:
    ct = am_crosstalk_envelope(env, HADAMARD, 10, grid)
    worst = ct.per_band_max_infidelity.max(axis=0)
    print(f"{name}: threshold spacing {ct.threshold_omega} MHz")
    for f, v in list(zip(grid, worst))[:: max(1, len(grid) // 10)]:
        print(f"  {f:6.1f} MHz  worst band {v:.2e}")
