"""Three independent routes to the same one-sided coefficient.

The production path uses a Plemelj split (delta term plus principal value);
the oracles integrate the correlation function in time, or the resolvent in
frequency, with a damping factor that is extrapolated to zero.
"""
import numpy as np

from stoclim import (FrequencyChannel, Reservoir, half_line_gram, half_line_time_oracle,
                     preset_density, resolvent_oracle, vacuum_covariance)

bath = preset_density("lorentzian", {"height": 0.3, "center": 1.5, "width": 0.5})
cov = vacuum_covariance()
res = Reservoir({"b": bath})
for omega in (0.5, 1.5, 3.0):
    ch = FrequencyChannel(omega, (np.eye(2, dtype=complex),), (), ("b",))
    direct = half_line_gram(ch, res, cov)[0, 0]
    timed = half_line_time_oracle(bath, cov, omega)
    resol = resolvent_oracle(bath, cov, omega)
    print(f"omega = {omega}: Plemelj {direct:.8f}")
    print(f"           time oracle {timed.value:.8f} (+- {timed.error:.1e})")
    print(f"      resolvent oracle {resol.value:.8f} (+- {resol.error:.1e})")
