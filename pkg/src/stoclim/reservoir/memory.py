"""Fourier transforms of spectral densities (memory functions).

``phi^w(t) = int rho(eps) exp(-i (eps - w) t) d eps`` is evaluated with a
Filon-type rule: on each panel the density is expanded in Legendre
polynomials and the oscillatory factor is integrated exactly through

    int_{-1}^{1} P_n(u) exp(-i k u) du = 2 (-i)^n j_n(k),

so the cost does not grow with ``t``.  Panels are bisected until the
trailing Legendre coefficients are negligible.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as npleg

from ..errors import QuadratureError, ValidationError
from .covariance import Covariance, weighted

DEGREE = 16
_NODES, _WEIGHTS = npleg.leggauss(DEGREE + 1)
_PN = npleg.legvander(_NODES, DEGREE)                      # (nodes, n)
_PROJ = (_PN * _WEIGHTS[:, None]).T * ((2 * np.arange(DEGREE + 1) + 1) / 2)[:, None]
_PHASE = 2.0 * (-1j) ** np.arange(DEGREE + 1)
_SMALL_NODES, _SMALL_WEIGHTS = npleg.leggauss(48)
_SMALL_PW = npleg.legvander(_SMALL_NODES, DEGREE) * _SMALL_WEIGHTS[:, None]
_SWITCH = 24.0


def legendre_fourier_moments(kappa) -> np.ndarray:
    """``m_n(k) = int_{-1}^{1} P_n(u) exp(-i k u) du`` for n = 0..DEGREE.

    Equals ``2 (-i)^n j_n(k)``.  For ``|k| >= 24`` the spherical Bessel
    functions come from upward recurrence (stable since ``|k| > n``); below
    that a 48-point Gauss-Legendre rule integrates the entire integrand to
    machine precision.
    """
    k = np.asarray(kappa, dtype=float).ravel()
    out = np.empty((len(k), DEGREE + 1), dtype=complex)
    big = np.abs(k) >= _SWITCH
    if np.any(~big):
        ks = k[~big]
        out[~big] = np.exp(-1j * np.outer(ks, _SMALL_NODES)) @ _SMALL_PW
    if np.any(big):
        x = np.abs(k[big])
        sn, cs = np.sin(x), np.cos(x)
        j = np.empty((len(x), DEGREE + 1))
        j[:, 0] = sn / x
        j[:, 1] = sn / (x * x) - cs / x
        for n in range(1, DEGREE):
            j[:, n + 1] = (2 * n + 1) / x * j[:, n] - j[:, n - 1]
        m = j * _PHASE
        neg = k[big] < 0
        if np.any(neg):
            m[neg] = np.conj(m[neg])
        out[big] = m
    return out.reshape(np.shape(kappa) + (DEGREE + 1,))


class FilonTransform:
    """Piecewise-Legendre model of ``f`` on ``[lo, hi]`` with exact Fourier moments.

    Parameters
    ----------
    f : callable
        Vectorized complex function of eps.
    lo, hi : float
        Finite integration range.
    breakpoints : sequence of float
        Points where ``f`` may be non-smooth; panels never straddle them.
    scale : float
        Initial panel width.
    rtol : float
        Panels are accepted once the last two Legendre coefficients are below
        ``rtol`` times the global maximum of ``|f|``.
    """

    def __init__(self, f, lo, hi, breakpoints=(), scale=None, rtol=1e-13, max_panels=20000):
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise ValidationError("Filon transform needs a finite nonempty interval")
        edges = [lo] + sorted({float(b) for b in breakpoints if lo < b < hi}) + [hi]
        scale = (hi - lo) / 8 if scale is None else min(scale, (hi - lo) / 8)
        todo = []
        for a, b in zip(edges[:-1], edges[1:]):
            # panels of width ``scale`` near the lower end, growing geometrically
            cuts, x, h = [a], a, scale
            while x + h < b:
                x += h
                cuts.append(x)
                h *= 2.0
            cuts.append(b)
            todo.extend(zip(cuts[:-1], cuts[1:]))
        panels, coeffs = [], []
        gmax = 0.0
        while todo:
            a = np.array(todo)
            c = (a[:, 0] + a[:, 1]) / 2
            h = (a[:, 1] - a[:, 0]) / 2
            vals = f(c[:, None] + h[:, None] * _NODES[None, :])
            gmax = max(gmax, float(np.max(np.abs(vals))))
            co = vals @ _PROJ.T
            tailc = np.abs(co[:, -1]) + np.abs(co[:, -2])
            ok = tailc <= rtol * max(gmax, 1e-300)
            ok |= h <= 1e-12 * max(1.0, abs(hi - lo))
            todo = []
            for i in np.nonzero(ok)[0]:
                panels.append((c[i], h[i]))
                coeffs.append(co[i])
            for i in np.nonzero(~ok)[0]:
                todo.extend([(a[i, 0], c[i]), (c[i], a[i, 1])])
            if len(panels) + len(todo) > max_panels:
                raise QuadratureError("spectral panel refinement exceeded its budget",
                                      float(np.max(tailc[~ok]) / max(gmax, 1e-300)))
        order = np.argsort([p[0] for p in panels])
        self.centers = np.array([panels[i][0] for i in order])
        self.halfwidths = np.array([panels[i][1] for i in order])
        self.coeffs = np.array([coeffs[i] for i in order])
        self.gmax = gmax
        self.lo, self.hi = lo, hi
        self._widths, self._groups = np.unique(np.round(self.halfwidths, 15), return_inverse=True)

    @property
    def n_panels(self) -> int:
        return len(self.centers)

    def integral(self) -> complex:
        return complex(np.sum(2 * self.halfwidths * self.coeffs[:, 0]))

    def __call__(self, t, chunk: int = 4096) -> np.ndarray:
        """``int f(eps) exp(-i eps t) d eps`` for every entry of ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.empty(t.shape, dtype=complex)
        flat_t = t.ravel()
        res = np.empty(flat_t.shape, dtype=complex)
        for s in range(0, len(flat_t), chunk):
            tt = flat_t[s:s + chunk]
            acc = np.zeros(len(tt), dtype=complex)
            for g, hw in enumerate(self._widths):
                sel = self._groups == g
                mom = legendre_fourier_moments(hw * tt) @ self.coeffs[sel].T   # (t, panels)
                ph = np.exp(-1j * np.outer(tt, self.centers[sel]))
                acc += np.sum(mom * ph, axis=1) * hw
            res[s:s + chunk] = acc
        out[...] = res.reshape(t.shape)
        return out


def filon_for(density, cov: Covariance | None = None, sign: int = 1, rtol: float = 1e-13,
              conjugate: bool = False) -> FilonTransform:
    """Filon model of ``rho*(q +- 1)/2`` (optionally conjugated) over its truncated support."""
    cov = cov or Covariance()
    if density.pathological:
        raise ValidationError("a density on the whole line has a distributional memory function")
    f = weighted(density, cov, sign)
    g = (lambda e: np.conj(f(e))) if conjugate else f
    lo = float(density.support[0])
    hi = density.effective_upper(lambda e: cov.weight(e, sign) if not cov.is_vacuum else 1.0)
    return FilonTransform(g, lo, hi, density.breakpoints, density.scale, rtol=rtol)


def memory_function(density, omega: float, t, cov: Covariance | None = None, sign: int = 1):
    """Memory function ``phi^w(t) = int rho~(eps) exp(-i (eps - w) t) d eps``.

    Parameters
    ----------
    density : SpectralDensity
    omega : float
    t : float or array_like
    cov : Covariance, optional
        When given, ``rho~ = rho*(q +- 1)/2``; otherwise the bare density.
    sign : {+1, -1}

    Returns
    -------
    complex or ndarray
    """
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ValidationError("memory function needs finite times")
    if density.is_zero or (cov is not None and cov.is_vacuum and sign < 0):
        val = np.zeros(t.shape, dtype=complex)
    else:
        if cov is None:
            ft = filon_for(density, Covariance(), 1)
        else:
            ft = filon_for(density, cov, sign)
        val = ft(t) * np.exp(1j * omega * t)
    return complex(np.ravel(val)[0]) if scalar else val
