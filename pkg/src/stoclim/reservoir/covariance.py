"""Reservoir covariance q(eps): vacuum (q = 1) or thermal Bose-Einstein."""
from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np

from ..errors import ValidationError


@dataclass(frozen=True)
class Covariance:
    """Multiplication operator Q = q(eps) describing a gaussian reservoir state.

    Attributes
    ----------
    kind : {"vacuum", "thermal"}
    beta : float
        Inverse temperature (inverse energy units); ``inf`` for vacuum.
    mu : float
        Chemical potential (energy units).
    hbar : float
    """

    kind: str = "vacuum"
    beta: float = float("inf")
    mu: float = 0.0
    hbar: float = 1.0

    @property
    def is_vacuum(self) -> bool:
        return self.kind == "vacuum"

    @property
    def fugacity(self) -> float:
        return float(np.exp(self.beta * self.mu)) if not self.is_vacuum else 0.0

    def occupation(self, eps):
        """Bose occupation ``(q - 1)/2 = 1/(exp(beta*(hbar*eps - mu)) - 1)``."""
        eps = np.asarray(eps, dtype=float)
        if self.is_vacuum:
            return np.zeros(eps.shape)
        x = self.beta * (self.hbar * eps - self.mu)
        with np.errstate(divide="ignore", over="ignore"):
            return 1.0 / np.expm1(x)

    def q(self, eps):
        return 1.0 + 2.0 * self.occupation(eps)

    def weight(self, eps, sign: int):
        """``(q + 1)/2`` for ``sign=+1`` and ``(q - 1)/2`` for ``sign=-1``."""
        n = self.occupation(eps)
        return 1.0 + n if sign > 0 else n


VACUUM = Covariance()


def vacuum_covariance(hbar: float = 1.0) -> Covariance:
    return Covariance("vacuum", hbar=hbar)


def thermal_covariance(beta: float, mu: float, density=None, hbar: float = 1.0,
                       allow_edge: bool = True) -> Covariance:
    """Thermal covariance ``q(eps) = coth(beta*(hbar*eps - mu)/2)``.

    Parameters
    ----------
    beta : float
        Positive inverse temperature.
    mu : float
        Chemical potential; must lie below ``hbar*eps_min`` of every supplied
        density.  With ``allow_edge`` the equality ``mu == hbar*eps_min`` is
        accepted when the density vanishes at ``eps_min``; the weighted density
        then stays finite there (the massless photon case).
    density : SpectralDensity, Reservoir or iterable of densities, optional
    """
    if not np.isfinite(beta) or not beta > 0:
        raise ValidationError("beta must be a positive finite number")
    if not np.isfinite(mu):
        raise ValidationError("mu must be finite")
    dens = []
    if density is not None:
        if hasattr(density, "diagonal"):
            dens = list(density.diagonal.values())
        elif hasattr(density, "support"):
            dens = [density]
        else:
            dens = list(density)
    for d in dens:
        lo = d.support[0]
        if d.is_zero:
            continue
        if not np.isfinite(lo):
            raise ValidationError("thermal covariance needs a spectrum bounded below "
                                  "(flat density is vacuum-only)")
        bound = hbar * lo
        if mu < bound:
            continue
        if allow_edge and mu == bound and abs(complex(d(np.array([lo]))[0])) == 0.0:
            continue
        raise ValidationError(f"mu={mu} must lie below hbar*eps_min={bound} "
                              "(pole of coth inside the support)")
    return Covariance("thermal", float(beta), float(mu), float(hbar))


def weighted(density, cov: Covariance, sign: int):
    """Callable ``eps -> rho(eps)*(q(eps) +- 1)/2`` with finite edge limits.

    When ``hbar*eps == mu`` falls on a zero of rho the removable singularity
    is evaluated as a limit from inside the support.
    """
    if cov.is_vacuum:
        if sign > 0:
            return density

        def zero(eps):
            return np.zeros(np.shape(eps), dtype=complex)
        return zero

    def f(eps):
        eps = np.asarray(eps, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = density(eps) * cov.weight(eps, sign)
        bad = ~np.isfinite(v)
        if np.any(bad):
            delta = 1e-9 * max(density.scale, 1e-300)
            e2 = eps[bad] + delta
            v[bad] = density(e2) * cov.weight(e2, sign)
        return v
    return f


def weighted_scalar(density, cov: Covariance, sign: int):
    """Scalar counterpart of :func:`weighted` for pointwise quadrature."""
    if cov.is_vacuum:
        if sign > 0:
            return density.scalar
        return lambda x: 0j
    beta, mu, hbar = cov.beta, cov.mu, cov.hbar
    delta = 1e-9 * max(density.scale, 1e-300)

    def occ(x):
        arg = beta * (hbar * x - mu)
        if arg > 700:
            return 0.0
        return 1.0 / math.expm1(arg)

    def f(x):
        r = density.scalar(x)
        try:
            n = occ(x)
        except ZeroDivisionError:
            x = x + delta
            r, n = density.scalar(x), occ(x)
        return r * (1.0 + n if sign > 0 else n)
    return f
