"""Half-line and full-line Gram coefficients from spectral densities.

For a weighted density ``f = rho*(q +- 1)/2`` the half-line coefficient is

    pi*f(w) - i*PV int f(eps)/(eps - w) d eps

and the full-line coefficient is ``2*pi*f(w)``.  The principal value is
computed by subtracting ``f(w)`` and adding back the analytic logarithm.
"""
from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ..errors import EdgeError, QuadratureError, ValidationError
from .covariance import Covariance, weighted, weighted_scalar
from .densities import Reservoir

EDGE_TOL = 1e-9
QUAD_EPSREL = 1e-12
QUAD_LIMIT = 2000


@dataclass
class GramCoefficients:
    """Gram matrices of one frequency channel.

    Attributes
    ----------
    omega : float
    half_plus, half_minus, full_plus, full_minus : ndarray
        ``N x N`` complex matrices.
    error_half_plus, error_half_minus : ndarray
        Absolute error estimates (quadrature plus tail truncation).
    truncation : float
        Largest upper truncation point used for an infinite support.
    warnings : list of str
    """

    omega: float
    half_plus: np.ndarray
    half_minus: np.ndarray
    full_plus: np.ndarray
    full_minus: np.ndarray
    error_half_plus: np.ndarray
    error_half_minus: np.ndarray
    truncation: float = float("nan")
    warnings: list = field(default_factory=list)

    def half(self, sign: int) -> np.ndarray:
        return self.half_plus if sign > 0 else self.half_minus

    def full(self, sign: int) -> np.ndarray:
        return self.full_plus if sign > 0 else self.full_minus


@dataclass
class _Cell:
    half: complex
    full: complex
    error: float
    truncation: float = float("nan")
    warning: str | None = None


def thread_count() -> int:
    """Worker threads allowed by ``STOCLIM_THREADS`` (default 1)."""
    raw = os.environ.get("STOCLIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _quad(func, a, b, points, epsabs):
    pts = sorted({float(p) for p in points if a < p < b})
    kw = dict(epsabs=epsabs, epsrel=QUAD_EPSREL, limit=QUAD_LIMIT, complex_func=True,
              full_output=1)
    if pts:
        kw["points"] = pts
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err, *_ = integrate.quad(func, a, b, **kw)
    err = complex(err)
    return complex(val), abs(err.real) + abs(err.imag)


def _quad_pieces(func, a, b, points, epsabs):
    """Integrate with the interval split at every point, summing errors."""
    edges = [a] + sorted({float(p) for p in points if a < p < b}) + [b]
    total, err = 0j, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        v, e = _quad(func, lo, hi, (), epsabs)
        total += v
        err += e
    return total, err


def _cell(density, cov: Covariance, omega: float, sign: int, edge_policy: str,
          tol: float) -> _Cell:
    """Half and full coefficient of one weighted density at one frequency."""
    if density.is_zero or (cov.is_vacuum and sign < 0):
        return _Cell(0j, 0j, 0.0)
    f = weighted(density, cov, sign)
    fs = weighted_scalar(density, cov, sign)

    if density.pathological:
        if density.kind != "flat":
            raise ValidationError(f"no analytic rule for pathological density {density.kind!r}")
        # constant density on the whole line: symmetric PV vanishes
        fw = fs(omega)
        return _Cell(np.pi * fw, 2 * np.pi * fw, 0.0, float("inf"))

    lo = float(density.support[0])
    hi = density.effective_upper(lambda e: cov.weight(e, sign) if not cov.is_vacuum else 1.0)
    width = hi - lo
    peak_grid = np.linspace(lo, hi, 4001)[1:-1]
    peak = float(np.max(np.abs(f(peak_grid))))
    if peak == 0.0:
        return _Cell(0j, 0j, 0.0, hi)
    epsabs = tol * peak * max(1.0, width) * 1e-2
    tail = 1e-14 * peak * max(1.0, width)
    points = [p for p in density.breakpoints if lo < p < hi]
    reach = EDGE_TOL * (1.0 + abs(omega))
    warn = None
    on_edge = None
    for end in (lo, hi if np.isfinite(density.support[1]) else None):
        if end is not None and abs(omega - end) <= reach:
            on_edge = end
    if on_edge is not None:
        inside = on_edge + (1 if on_edge == lo else -1) * 1e-9 * max(density.scale, 1e-300)
        # the weighted density returns its one-sided limit at the endpoint
        if abs(fs(on_edge)) > 1e-10 * peak:
            if edge_policy != "half":
                raise EdgeError(f"frequency {omega} lies on the support endpoint {on_edge} "
                                "where the density is nonzero; set edge_policy='half' to accept")
            warn = (f"frequency {omega} on support endpoint {on_edge}: delta weight halved, "
                    "principal value taken as a one-sided finite part")
            omega = on_edge
            fw = fs(inside)

            def g(x):
                return (fs(x) - fw) / (x - omega) if x != omega else 0j
            pv, err = _quad_pieces(g, lo, hi, points, epsabs)
            far = hi - omega if on_edge == lo else omega - lo
            pv += fw * np.log(far) * (1 if on_edge == lo else -1)
            half = 0.5 * np.pi * fw - 1j * pv
            return _Cell(half, np.pi * fw, err + tail, hi, warn)

    if lo < omega < hi:
        fw = fs(omega)

        def g(x):
            if x == omega:
                return 0j
            return (fs(x) - fw) / (x - omega)
        pv, err = _quad_pieces(g, lo, hi, points + [omega], epsabs)
        if fw != 0:
            pv += fw * np.log(abs((hi - omega) / (lo - omega)))
        half = np.pi * fw - 1j * pv
        full = 2 * np.pi * fw
    else:
        pv, err = _quad_pieces(lambda x: fs(x) / (x - omega), lo, hi, points, epsabs)
        half = -1j * pv
        full = 0j
    if not np.isfinite(half) or err > max(1e3 * epsabs, 1e-8 * abs(half)):
        raise QuadratureError(f"principal-value quadrature at omega={omega} did not converge", err)
    return _Cell(complex(half), complex(full), err + tail, hi, warn)


def _refs_of(channel):
    return tuple(channel.density_refs)


def _cells(channel, reservoir: Reservoir, cov: Covariance, sign: int, edge_policy, tol):
    refs = _refs_of(channel)
    n = len(refs)
    half = np.zeros((n, n), dtype=complex)
    full = np.zeros((n, n), dtype=complex)
    err = np.zeros((n, n))
    trunc = []
    notes = []
    for j in range(n):
        for k in range(n):
            c = _cell(reservoir.density(refs[j], refs[k]), cov, channel.omega, sign,
                      edge_policy, tol)
            half[j, k], full[j, k], err[j, k] = c.half, c.full, c.error
            trunc.append(c.truncation)
            if c.warning and c.warning not in notes:
                notes.append(c.warning)
    return half, full, err, trunc, notes


def half_line_gram(channel, reservoir: Reservoir, cov: Covariance, sign: int = 1,
                   edge_policy: str = "error", tol: float = 1e-11) -> np.ndarray:
    """``[(g_j|g_k)^{w-}_{Q+-}]`` for one channel.

    Parameters
    ----------
    channel : FrequencyChannel
        Supplies omega and the density labels of its operators.
    reservoir : Reservoir
    cov : Covariance
    sign : {+1, -1}
    edge_policy : {"error", "half"}
        What to do when omega sits on a support endpoint with nonzero density.
    """
    return _cells(channel, reservoir, cov, sign, edge_policy, tol)[0]


def full_line_gram(channel, reservoir: Reservoir, cov: Covariance, sign: int = 1,
                   edge_policy: str = "error") -> np.ndarray:
    """``[(g_j|g_k)^{w}_{Q+-}] = [2*pi*rho_jk(w)*(q(w) +- 1)/2]``."""
    refs = _refs_of(channel)
    n = len(refs)
    out = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            dens = reservoir.density(refs[j], refs[k])
            if dens.is_zero or (cov.is_vacuum and sign < 0):
                continue
            lo, hi = dens.support
            w = channel.omega
            reach = EDGE_TOL * (1.0 + abs(w))
            f = weighted(dens, cov, sign)
            for end in (lo, hi):
                if np.isfinite(end) and abs(w - end) <= reach:
                    # one-sided limit at the endpoint
                    val = complex(f(np.array([end]))[0])
                    if val != 0 and edge_policy != "half":
                        raise EdgeError(f"frequency {w} lies on the support endpoint {end}")
                    out[j, k] = np.pi * val
                    break
            else:
                if lo < w < hi:
                    out[j, k] = 2 * np.pi * complex(f(np.array([w]))[0])
    return out


def compute_grams(channels, reservoir: Reservoir, cov: Covariance, edge_policy: str = "error",
                  tol: float = 1e-11, threads: int | None = None) -> list:
    """Gram coefficients for every channel, in channel order.

    Independent ``(channel, sign)`` blocks may run on a thread pool whose size
    is capped by ``STOCLIM_THREADS``; the result does not depend on scheduling.
    """
    signs = (1,) if cov.is_vacuum else (1, -1)
    jobs = [(ch, s) for ch in channels for s in signs]
    nthreads = threads or thread_count()

    def run(job):
        ch, s = job
        return _cells(ch, reservoir, cov, s, edge_policy, tol)

    if nthreads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    by_job = dict(zip([(id(ch), s) for ch, s in jobs], results))
    out = []
    for ch in channels:
        n = ch.size
        hp, fp, ep, tp, wp = by_job[(id(ch), 1)]
        if cov.is_vacuum:
            z = np.zeros((n, n), dtype=complex)
            hm, fm, em, tm, wm = z, z.copy(), np.zeros((n, n)), [], []
        else:
            hm, fm, em, tm, wm = by_job[(id(ch), -1)]
        trunc = [t for t in tp + tm if np.isfinite(t)]
        out.append(GramCoefficients(
            omega=ch.omega, half_plus=hp, half_minus=hm, full_plus=fp, full_minus=fm,
            error_half_plus=ep, error_half_minus=em,
            truncation=max(trunc) if trunc else float("nan"),
            warnings=list(dict.fromkeys(wp + wm))))
    return out


def gram_identity_residual(g: GramCoefficients) -> float:
    """``max |full - (half + conj(half^T))|`` over both signs."""
    r = 0.0
    for s in (1, -1):
        h = g.half(s)
        r = max(r, float(np.max(np.abs(g.full(s) - (h + h.conj().T)), initial=0.0)))
    return r
