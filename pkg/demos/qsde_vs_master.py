"""The repeated-interaction QSDE reproduces the master equation.

Each step couples the atom to a fresh slice of Fock space whose increments
obey the Ito table.  Halving dt halves the deviation from the exact
semigroup, which is the first-order convergence of the Euler-Ito step.
"""
import numpy as np

from stoclim import (Reservoir, SystemSpec, build_open_system, build_slice_for, evolve_reduced,
                     ito_table_check, preset_density, vacuum_covariance)
from stoclim.qsde import master_reference, trajectory_deviation

bath = preset_density("ohmic", {"alpha": 0.05, "cutoff": 5.0})
spec = SystemSpec(np.diag([0.0, 1.0]), (np.array([[0, 1], [1, 0]], complex),), ("b",))
gen = build_open_system(spec, Reservoir({"b": bath}), vacuum_covariance()).generator
sl = build_slice_for(gen)
print("slice dimension:", sl.dim)
print("Ito table deviation at dt = 1e-3:", ito_table_check(sl, build_open_system(
    spec, Reservoir({"b": bath}), vacuum_covariance()).grams, 1e-3).max_deviation)

g = float(gen.gamma[1, 1].real)
s0 = np.array([[0.3, 0.4], [0.4, 0.7]], dtype=complex)
prev = None
for dt in (8e-3 / g, 4e-3 / g, 2e-3 / g):
    tr = evolve_reduced(sl, gen, s0, 2 / g, dt)
    err = trajectory_deviation(tr, master_reference(gen, s0, tr.times))
    ratio = "" if prev is None else f"   ratio = {err / prev:.3f}"
    print(f"dt = {dt:.4f}   max deviation = {err:.3e}{ratio}")
    prev = err
