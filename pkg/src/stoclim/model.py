"""One-call assembly of a system-reservoir model into its limit generator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lindblad import GksGenerator, assemble_drift
from .reservoir.covariance import Covariance
from .reservoir.densities import Reservoir
from .reservoir.gram import compute_grams
from .spectral import EigenSystem, SystemSpec, build_channels, diagonalize, DEFAULT_DEGENERACY_TOL


@dataclass
class OpenSystem:
    """Everything derived from a system, a reservoir and a covariance."""

    spec: SystemSpec
    eig: EigenSystem
    channels: list
    reservoir: Reservoir
    cov: Covariance
    grams: list
    generator: GksGenerator

    @property
    def dim(self) -> int:
        return self.spec.dim

    def channel_at(self, omega: float, tol: float = 1e-9):
        for ch, g in zip(self.channels, self.grams):
            if abs(ch.omega - omega) <= tol * (1 + abs(omega)):
                return ch, g
        raise KeyError(omega)


def build_open_system(spec: SystemSpec, reservoir: Reservoir, cov: Covariance,
                      edge_policy: str = "error", degeneracy_tol: float = DEFAULT_DEGENERACY_TOL,
                      quad_tol: float = 1e-11) -> OpenSystem:
    """Diagonalize, decompose, compute Gram matrices and assemble the drift."""
    eig = diagonalize(spec, degeneracy_tol)
    channels = build_channels(spec, eig)
    for ch in channels:
        reservoir.check_psd(ch.density_refs, _probe_grid(reservoir, ch.density_refs))
    grams = compute_grams(channels, reservoir, cov, edge_policy=edge_policy, tol=quad_tol)
    gen = assemble_drift(channels, grams, spec.hamiltonian, spec.hbar)
    return OpenSystem(spec, eig, channels, reservoir, cov, grams, gen)


def _probe_grid(reservoir: Reservoir, refs) -> np.ndarray:
    pts = []
    for r in set(refs):
        d = reservoir.density(r, r)
        lo, hi = d.support
        lo = lo if np.isfinite(lo) else -10 * d.scale
        hi = hi if np.isfinite(hi) else lo + 50 * d.scale
        pts.append(np.linspace(lo, hi, 201))
    return np.unique(np.concatenate(pts))
