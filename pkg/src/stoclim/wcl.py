"""Finite-coupling checks of the weak-coupling (van Hove) limit.

The collective vector ``lambda * int_a^b S_u^w f du`` with rescaled times
``a = S/lambda^2``, ``b = T/lambda^2`` has the spectral representation
``lambda * E(eps - w; a, b) f(eps)`` with

    E(x; a, b) = int_a^b exp(i x u) du = (exp(i x b) - exp(i x a)) / (i x),

so every two-point function reduces to a single integral over eps.  The
oscillating kernel is integrated with composite Gauss-Legendre panels
narrower than its period.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import ConvergenceError, QuadratureError, ValidationError
from .reservoir.covariance import Covariance, weighted
from .reservoir.densities import SpectralDensity
from .reservoir.gram import full_line_gram

SERIES_SWITCH = 1e-4
_NODES, _WEIGHTS = npleg.leggauss(16)


@dataclass(frozen=True)
class CollectiveQuery:
    """Two-point function of rescaled collective fields.

    Attributes
    ----------
    lam : float
        Coupling in (0, 1].
    t, s : float
        Macroscopic times (nonnegative).
    omega, omega_prime : float
    density : SpectralDensity
        Overlap density of the two test functions.
    covariance : Covariance
    ordering : str
        ``"annihilator-first"`` uses ``(q+1)/2``, ``"creator-first"`` ``(q-1)/2``.
    horizon : float
        Largest admissible macroscopic time.
    """

    lam: float
    t: float
    s: float
    omega: float
    density: SpectralDensity
    covariance: Covariance = Covariance()
    omega_prime: float | None = None
    ordering: str = "annihilator-first"
    horizon: float = 100.0

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValidationError("lambda must lie in (0, 1]")
        for name in ("t", "s"):
            v = getattr(self, name)
            if not 0 <= v <= self.horizon:
                raise ValidationError(f"{name} must lie in [0, horizon]")
        if self.ordering not in ("annihilator-first", "creator-first"):
            raise ValidationError(f"unknown ordering {self.ordering!r}")

    @property
    def sign(self) -> int:
        return 1 if self.ordering == "annihilator-first" else -1

    def with_lambda(self, lam: float) -> "CollectiveQuery":
        return CollectiveQuery(lam, self.t, self.s, self.omega, self.density, self.covariance,
                               self.omega_prime, self.ordering, self.horizon)


def interval_kernel(x, a: float, b: float) -> np.ndarray:
    """``E(x; a, b) = int_a^b exp(i x u) du`` with a series near ``x = 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape, dtype=complex)
    m = max(abs(a), abs(b))
    small = np.abs(x) * m < SERIES_SWITCH
    xs = x[small]
    out[small] = (b - a) + 0.5j * xs * (b * b - a * a) - xs * xs * (b ** 3 - a ** 3) / 6
    xb = x[~small]
    out[~small] = (np.exp(1j * xb * b) - np.exp(1j * xb * a)) / (1j * xb)
    return out


def _overlap_flat(density, lam, iv1, iv2, omega, omega_p, sign, cov):
    """Closed form for a constant density on the whole line (Parseval)."""
    if sign < 0 or not cov.is_vacuum:
        return 0j
    rho = density.params["kappa"] / (2 * np.pi)
    a1, b1 = iv1[0] / lam ** 2, iv1[1] / lam ** 2
    a2, b2 = iv2[0] / lam ** 2, iv2[1] / lam ** 2
    lo, hi = max(a1, a2), min(b1, b2)
    if hi <= lo:
        return 0j
    delta = omega - omega_p
    return complex(lam ** 2 * rho * 2 * np.pi * interval_kernel(np.array([delta]), lo, hi)[0])


def _overlap(density, cov, sign, lam, iv1, iv2, omega, omega_p, rtol=1e-9):
    if density.is_zero or (cov.is_vacuum and sign < 0):
        return 0j, 0.0
    if iv1[1] <= iv1[0] or iv2[1] <= iv2[0]:
        return 0j, 0.0
    if density.pathological:
        return _overlap_flat(density, lam, iv1, iv2, omega, omega_p, sign, cov), 0.0
    f = weighted(density, cov, sign)
    a1, b1 = iv1[0] / lam ** 2, iv1[1] / lam ** 2
    a2, b2 = iv2[0] / lam ** 2, iv2[1] / lam ** 2
    lo = float(density.support[0])
    hi = density.effective_upper(lambda e: cov.weight(e, sign) if not cov.is_vacuum else 1.0)
    period = 2 * np.pi / max(abs(a1), abs(b1), abs(a2), abs(b2), 1e-12)

    def integrate(h):
        # panels no wider than h, aligned on w and w' so the peaks sit on edges
        cuts = [lo, hi] + [c for c in (omega, omega_p) if lo < c < hi]
        cuts += [b for b in density.breakpoints if lo < b < hi]
        cuts = np.unique(cuts)
        edges = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            n = max(1, int(np.ceil((b - a) / h)))
            edges.append(np.linspace(a, b, n + 1)[:-1])
        edges = np.concatenate(edges + [[hi]])
        c = (edges[:-1] + edges[1:]) / 2
        w = (edges[1:] - edges[:-1]) / 2
        eps = (c[:, None] + w[:, None] * _NODES).ravel()
        k1 = np.conj(interval_kernel(eps - omega, a1, b1))
        k2 = interval_kernel(eps - omega_p, a2, b2)
        vals = f(eps) * k1 * k2
        return complex(np.sum(vals.reshape(len(c), -1) * _WEIGHTS * w[:, None]))

    h = min(period / 2, density.scale / 4)
    v1 = integrate(h)
    v2 = integrate(h / 2)
    err = abs(v2 - v1)
    if err > rtol * max(abs(v2), 1e-300) and err > 1e-14:
        v3 = integrate(h / 4)
        err = abs(v3 - v2)
        v2 = v3
        if err > 1e3 * rtol * max(abs(v2), 1e-300) and err > 1e-12:
            raise QuadratureError("collective two-point quadrature did not settle", err)
    return lam ** 2 * v2, lam ** 2 * err


def collective_two_point(q: CollectiveQuery) -> complex:
    """``lambda^2 int_0^{t/l^2} int_0^{s/l^2} <S_t1^w g, rho~ S_s1^w' f> dt1 ds1``.

    Evaluated spectrally; for ``w = w'`` the kernel is
    ``(1 - exp(-i x T))(1 - exp(i x S))/x^2`` with ``x = eps - w``.
    """
    wp = q.omega if q.omega_prime is None else q.omega_prime
    val, _ = _overlap(q.density, q.covariance, q.sign, q.lam, (0.0, q.t), (0.0, q.s), q.omega, wp)
    return val


def collective_two_point_with_error(q: CollectiveQuery):
    wp = q.omega if q.omega_prime is None else q.omega_prime
    return _overlap(q.density, q.covariance, q.sign, q.lam, (0.0, q.t), (0.0, q.s), q.omega, wp)


def limit_two_point(t: float, s: float, omega: float, density: SpectralDensity,
                    covariance: Covariance = Covariance(), ordering: str = "annihilator-first",
                    edge_policy: str = "error") -> complex:
    """``min(t, s) * 2 pi rho~(w)``, the quantum Brownian motion covariance."""
    from .reservoir.densities import Reservoir
    from .spectral import FrequencyChannel

    sign = 1 if ordering == "annihilator-first" else -1
    ch = FrequencyChannel(omega, (np.zeros((1, 1)),), (), ("f",))
    full = full_line_gram(ch, Reservoir({"f": density}), covariance, sign, edge_policy)[0, 0]
    return complex(min(t, s) * full)


@dataclass(frozen=True)
class ScanRow:
    lam: float
    value: complex
    abs_error: float
    quad_error: float = 0.0


def convergence_scan(template: CollectiveQuery, lambdas, slack: float = 0.05,
                     raise_on_failure: bool = True) -> list:
    """Distance to the limit covariance along a decreasing coupling sequence.

    Raises :class:`ConvergenceError` (with the table) when an error grows by
    more than ``slack`` relative to its predecessor.
    """
    lambdas = [float(x) for x in lambdas]
    if len(lambdas) < 3:
        raise ValidationError("need at least three couplings")
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValidationError("couplings must be strictly decreasing")
    limit = limit_two_point(template.t, template.s, template.omega, template.density,
                            template.covariance, template.ordering)
    rows = []
    for lam in lambdas:
        v, e = collective_two_point_with_error(template.with_lambda(lam))
        rows.append(ScanRow(lam, v, abs(v - limit), e))
    bad = [i for i in range(1, len(rows)) if rows[i].abs_error > (1 + slack) * rows[i - 1].abs_error]
    if bad and raise_on_failure:
        raise ConvergenceError(f"errors not monotone at couplings {[rows[i].lam for i in bad]}", rows)
    return rows


def cross_frequency_overlap(lam: float, interval1, interval2, omega: float, omega_prime: float,
                            density: SpectralDensity, covariance: Covariance = Covariance(),
                            ordering: str = "annihilator-first",
                            min_separation: float = 0.0) -> complex:
    """``<lambda int_{S/l^2}^{T/l^2} S_u^w f du, lambda int_{S'/l^2}^{T'/l^2} S_v^w' f' dv>``.

    ``min_separation`` guards against frequencies that should have been merged:
    unequal frequencies closer than it are rejected.
    """
    if omega != omega_prime and abs(omega - omega_prime) < min_separation:
        raise ValidationError("frequencies closer than the required separation")
    sign = 1 if ordering == "annihilator-first" else -1
    for iv in (interval1, interval2):
        if not 0 <= iv[0] <= iv[1]:
            raise ValidationError("intervals must satisfy 0 <= S <= T")
    return _overlap(density, covariance, sign, lam, tuple(interval1), tuple(interval2),
                    omega, omega_prime)[0]


def brute_force_two_point(memory, lam: float, t: float, s: float, n: int = 2000) -> complex:
    """Midpoint Riemann sum of ``lambda^2 int int M(t1 - s1) dt1 ds1``.

    ``memory(tau)`` must return ``<S_t1 g, S_s1 f>`` as a function of
    ``tau = t1 - s1`` (vectorized).  Independent of the spectral path.  The
    longer interval gets ``n`` cells; when the shorter one is an integer
    number of cells of the same width the grid is Toeplitz and ``M`` is
    evaluated only on distinct differences.
    """
    T, S = t / lam ** 2, s / lam ** 2
    if T == 0 or S == 0:
        return 0j
    h = max(T, S) / n
    nt, ns = T / h, S / h
    if abs(nt - round(nt)) < 1e-9 and abs(ns - round(ns)) < 1e-9:
        nt, ns = int(round(nt)), int(round(ns))
        k = np.arange(-(ns - 1), nt)                       # tau = k h
        # number of (i, j) pairs with i - j = k
        count = np.minimum(nt - 1, k + ns - 1) - np.maximum(0, k) + 1
        total = np.sum(count * memory(k * h))
        return complex(lam ** 2 * total * h * h)
    t1 = (np.arange(n) + 0.5) * T / n
    s1 = (np.arange(n) + 0.5) * S / n
    total = 0j
    for row in np.array_split(np.arange(n), 20):
        total += np.sum(memory(t1[row][:, None] - s1[None, :]))
    return complex(lam ** 2 * total * (T / n) * (S / n))
