"""Which Bohr frequencies coincide, and why it matters for the secular generator.

Coinciding transitions are kept together in one channel.  A degenerate
level adds off-diagonal pairs to the zero-frequency class; the classifier
marks those as extraneous.  The hydrogen search lists accidental coincidences
among 1/n^2 - 1/m^2 found with exact fractions.
"""
import numpy as np

from stoclim import classify_degeneracies, diagonalize, hydrogen_degeneracy_search

eig = diagonalize(np.diag([0.0, 1.0, 1.0, 3.0]))
report = classify_degeneracies(eig)
for omega, members in sorted(report.classes.items()):
    print(f"omega = {omega:+.3f}: " + ", ".join(f"{p}:{lab}" for p, lab in members))

print("\nladder spacing check:")
ladder = classify_degeneracies(diagonalize(np.diag(np.arange(4.0))))
print({round(w, 6): len(m) for w, m in sorted(ladder.classes.items())})

print("\nhydrogen coincidences with n, m <= 40:")
for quad in hydrogen_degeneracy_search(40):
    print(" ", quad)
