"""Syndrome extraction on the eight-spin toy patch.

Shows deterministic syndromes on a stabilizer eigenstate, the effect of a
single data error injected between cycles, and how the unpaired Hadamard at
the end of each cycle swaps the ancilla roles unless a global Hadamard is
added at the start of the next one.
"""
import numpy as np

from edgedot.qcore import SX, SZ
from edgedot.surface_cell import CycleTiming, PatchConfig, SpinRegister, run_cycles, timing_budget


def data_state(*basis_states):
    psi = np.zeros(256, dtype=complex)
    for b in basis_states:
        psi[b << 4] = 1.0
    return SpinRegister(8, psi / np.linalg.norm(psi))


ghz = data_state(0b0000, 0b1111)
print("GHZ data, three cycles:", run_cycles(ghz, 3)[0])
print("Z on D1 between cycles:", run_cycles(ghz, 2, between=lambda c, r: r.apply(SZ, [0]))[0])
print("X on D1 between cycles:", run_cycles(ghz, 2, between=lambda c, r: r.apply(SX, [0]))[0])

odd = data_state(0b0001, 0b1110)
print("ZZZZ = -1 state, no step-1 Hadamard:", run_cycles(odd, 3)[0])
print("ZZZZ = -1 state, with step-1 Hadamard:", run_cycles(odd, 3, PatchConfig(step1_hadamard=True))[0])

for k, v in timing_budget(CycleTiming(6.0, 4.0)).items():
    print(f"  {k}: {v}")
