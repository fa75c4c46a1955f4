"""Collective two-point functions approach their white-noise limit as lambda -> 0.

At finite coupling the rescaled field still remembers the bath; the scan
shows the error against 2*pi*rho(omega)*min(t, s) shrinking with lambda,
and the overlap between fields at different frequencies dying away.
"""
from stoclim import (CollectiveQuery, convergence_scan, cross_frequency_overlap, limit_two_point,
                     preset_density)

bath = preset_density("ohmic", {"alpha": 1.0, "cutoff": 5.0})
t, s, omega = 1.0, 1.5, 1.0
lambdas = [0.5, 0.25, 0.125, 0.0625]

print("limit:", limit_two_point(t, s, omega, bath))
for row in convergence_scan(CollectiveQuery(lambdas[0], t, s, omega, bath), lambdas):
    print(f"lambda = {row.lam:<7} value = {row.value:.6f}   |error| = {row.abs_error:.3e}")

print("\noverlap of fields at omega = 1 and omega = 2:")
for lam in lambdas:
    v = cross_frequency_overlap(lam, (0.0, 1.0), (0.0, 1.5), 1.0, 2.0, bath)
    print(f"lambda = {lam:<7} |overlap| = {abs(v):.3e}")
