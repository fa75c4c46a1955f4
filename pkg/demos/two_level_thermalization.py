"""An undriven two-level atom in an ohmic bath relaxes to the Gibbs state.

Builds the weak-coupling generator, prints the rates and the Lamb shift,
then integrates the master equation and compares the long-time populations
with exp(-beta*omega0).
"""
import numpy as np

from stoclim import (Reservoir, SystemSpec, build_open_system, evolve_master, preset_density,
                     stationary_state, thermal_covariance)

beta, omega0 = 1.0, 1.0
bath = preset_density("ohmic", {"alpha": 0.05, "cutoff": 5.0})
spec = SystemSpec(np.diag([0.0, omega0]), (np.array([[0, 1], [1, 0]], complex),), ("b",))
model = build_open_system(spec, Reservoir({"b": bath}), thermal_covariance(beta, 0.0, bath))
gen = model.generator

print("decay rates (diagonal of Gamma):", np.round(np.diag(gen.gamma).real, 6))
print("Lamb shift (diagonal):", np.round(np.diag(gen.lamb_shift).real, 6))

excited = np.diag([0.0, 1.0]).astype(complex)
rate = float(np.real(np.trace(gen.gamma)))
traj = evolve_master(gen, excited, 10 / rate, 0.05 / rate, stride=20)
for t, p in zip(traj.times[::2], traj.states[::2, 1, 1].real):
    print(f"t = {t:8.2f}   excited population = {p:.6f}")

final = traj.final
print("population ratio:", final[1, 1].real / final[0, 0].real, " Gibbs:", np.exp(-beta * omega0))
print("distance to stationary state:", np.max(np.abs(final - stationary_state(gen))))
