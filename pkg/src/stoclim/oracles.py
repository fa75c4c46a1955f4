"""Independent cross-checks for the Gram coefficients and the drift.

Nothing here calls the principal-value code of :mod:`stoclim.reservoir.gram`
or scipy's QUADPACK wrappers.  Integrals use a local adaptive composite
Gauss-Legendre rule, and the ``0+`` regularization is handled by evaluating
at several finite regulators ``eta`` and extrapolating polynomially to
``eta = 0`` (Neville's scheme).  The extrapolated quantities are analytic in
``eta`` as long as the regulators stay below the distance from ``w`` to the
nearest singularity of the weighted density.

Time-domain quantities are built from the memory function, evaluated with
the Legendre-Filon transform of :mod:`stoclim.reservoir.memory`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import AssertionFailure, ExtrapolationError
from .reservoir.covariance import Covariance, weighted
from .reservoir.memory import filon_for

_GL_NODES, _GL_WEIGHTS = npleg.leggauss(20)


@dataclass(frozen=True)
class OracleValue:
    """Extrapolated value with its error estimate and the raw sequence."""

    value: complex
    error: float
    etas: tuple = ()
    samples: tuple = ()


def _neville_at(x, y, x0):
    p = np.array(y, dtype=complex)
    n = len(x)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = ((x0 - x[i + m]) * p[i] + (x[i] - x0) * p[i + 1]) / (x[i] - x[i + m])
    return complex(p[0])


def neville(x, y, x0: float = 0.0):
    """Polynomial extrapolation of ``y(x)`` to ``x0``.

    Returns the value of the interpolant through all points and the value
    through all but the first (largest) abscissa; their difference is the
    extrapolation error estimate.
    """
    x = np.asarray(x, dtype=float)
    return _neville_at(x, y, x0), _neville_at(x[1:], np.asarray(y)[1:], x0)


def _adaptive(func, edges, atol, max_panels=200000):
    """Composite 20-point Gauss-Legendre with bisection until the halves agree.

    ``func`` maps an array of abscissae (any shape) to values with one extra
    trailing axis of length K; returns the K integrals and the total error.
    """
    edges = np.asarray(edges, dtype=float)
    todo = np.column_stack([edges[:-1], edges[1:]])
    total_len = edges[-1] - edges[0]
    acc, err_acc = None, 0.0
    n_done = 0
    while len(todo):
        a, b = todo[:, 0], todo[:, 1]
        m = (a + b) / 2
        h = (b - a) / 2
        x_full = m[:, None] + h[:, None] * _GL_NODES
        x_left = (a + m)[:, None] / 2 + (h / 2)[:, None] * _GL_NODES
        x_right = (m + b)[:, None] / 2 + (h / 2)[:, None] * _GL_NODES
        f = func(np.concatenate([x_full, x_left, x_right], axis=1))
        npts = len(_GL_NODES)
        w = _GL_WEIGHTS[None, :, None]
        i1 = np.sum(f[:, :npts] * w, axis=1) * h[:, None]
        i2 = (np.sum(f[:, npts:2 * npts] * w, axis=1) + np.sum(f[:, 2 * npts:] * w, axis=1)) * (h / 2)[:, None]
        e = np.max(np.abs(i2 - i1), axis=1)
        ok = e <= atol * np.maximum(2 * h / total_len, 1e-3) + 1e-300
        ok |= h < 1e-13 * max(1.0, abs(edges[-1]))
        if acc is None:
            acc = np.zeros(i2.shape[1], dtype=complex)
        acc += np.sum(i2[ok], axis=0)
        err_acc += float(np.sum(e[ok]))
        n_done += int(np.sum(ok))
        bad = ~ok
        todo = np.concatenate([np.column_stack([a[bad], m[bad]]), np.column_stack([m[bad], b[bad]])])
        if n_done + len(todo) > max_panels:
            raise ExtrapolationError("oracle quadrature exceeded its panel budget",
                                     {"panels": n_done + len(todo)})
    return acc, err_acc


def _analyticity_radius(density, cov: Covariance, omega: float) -> float:
    r = [1.0, density.scale]
    lo, hi = density.support
    for end in (lo, hi):
        if np.isfinite(end):
            r.append(abs(omega - end))
    if not cov.is_vacuum:
        r.append(2 * np.pi / (cov.beta * cov.hbar))
        r.append(np.hypot(omega - cov.mu / cov.hbar, 2 * np.pi / (cov.beta * cov.hbar)))
    if density.kind == "lorentzian":
        r.append(np.hypot(omega - density.params["center"], density.params["width"]))
    return float(min(r))


def default_etas(density, cov: Covariance, omega: float, n: int = 6) -> np.ndarray:
    """Decreasing regulators ``r/4, r/8, ...`` scaled by the analyticity radius."""
    r = _analyticity_radius(density, cov, omega)
    if r < 1e-6:
        raise ExtrapolationError(f"frequency {omega} too close to a singular point of the density",
                                 {"radius": r})
    return r * 0.25 * 0.5 ** np.arange(n)


def _flat_half(density, cov, sign):
    # flat density: memory function kappa*delta(t), half weight on a half-line
    if sign < 0 or not cov.is_vacuum:
        return 0j if sign < 0 else complex(density.params["kappa"] / 2)
    return complex(density.params["kappa"] / 2)


def _extrapolate(etas, vals, errs, what):
    full, reduced = neville(etas, vals)
    err = abs(full - reduced) + float(np.max(errs))
    scale = max(abs(full), 1e-300)
    if not np.isfinite(full) or err > 1e-3 * scale:
        raise ExtrapolationError(f"{what}: extrapolation to eta=0 did not settle",
                                 {"etas": list(map(float, etas)), "values": list(map(complex, vals)),
                                  "error": err})
    return OracleValue(full, err, tuple(map(float, etas)), tuple(map(complex, vals)))


def half_line_time_oracle(density, cov: Covariance, omega: float, sign: int = 1,
                          etas=None, direction: int = -1, rtol: float = 1e-12) -> OracleValue:
    """One-sided time integral of a correlation function, regularized and extrapolated.

    Computes ``int_0^inf exp(-eta t) C(t) dt`` with
    ``C(t) = int rho~(eps) exp(direction*i*(eps - w)*t) d eps`` and
    ``rho~ = rho*(q +- 1)/2`` for each regulator, then extrapolates to
    ``eta = 0``.  With ``direction=-1`` this is the half-line coefficient
    ``int_{-inf}^0 <g, S_t^w f> dt``.
    """
    if density.is_zero or (cov.is_vacuum and sign < 0):
        return OracleValue(0j, 0.0)
    if density.pathological:
        v = _flat_half(density, cov, sign)
        return OracleValue(v if direction < 0 else np.conj(v), 0.0)
    etas = default_etas(density, cov, omega) if etas is None else np.asarray(etas, dtype=float)
    if len(etas) < 3 or np.any(np.diff(etas) >= 0) or np.any(etas <= 0):
        raise ValueError("need at least three decreasing positive regulators")
    # exp(+i x t) = conj(exp(-i x t)): transform conj(rho~) and conjugate back
    ft = filon_for(density, cov, sign, conjugate=direction > 0)
    t_max = 40.0 / etas[-1]
    m0 = abs(ft(np.array([0.0]))[0])
    if m0 == 0.0:
        m0 = ft.gmax * (ft.hi - ft.lo)

    def integrand(t):
        shape = t.shape
        c = ft(t.ravel()).reshape(shape) * np.exp(1j * omega * t)
        return c[..., None] * np.exp(-np.multiply.outer(t, etas))

    width = min(4.0, 4.0 / max(abs(omega), 1e-9))
    near = np.geomspace(1e-4, 1.0, 13) * min(1.0, width)
    far = np.arange(near[-1], t_max + width, width)
    edges = np.unique(np.concatenate([[0.0], near, far[1:]]))
    edges[-1] = max(edges[-1], t_max)
    vals, err = _adaptive(integrand, edges, atol=rtol * m0)
    if direction > 0:
        vals = np.conj(vals)
    errs = np.full(len(etas), err)
    return _extrapolate(etas, vals, errs, "time-domain half-line coefficient")


def _resolvent_integral(density, cov: Covariance, omega: float, sign: int, etas, rtol=1e-12):
    """``int rho~(eps)/(i(eps - w) + eta) d eps`` for every regulator."""
    f = weighted(density, cov, sign)
    lo = float(density.support[0])
    hi = density.effective_upper(lambda e: cov.weight(e, sign) if not cov.is_vacuum else 1.0)
    # graded mesh centred on w, finest at the smallest regulator
    hmin = etas[-1] / 4
    hmax = max(density.scale / 4, hmin)
    steps, h, x = [], hmin, 0.0
    while x < (hi - lo) + abs(omega):
        x += h
        steps.append(x)
        h = min(h * 1.3, hmax, 0.25 * x + hmin)
    steps = np.array(steps)
    pts = np.concatenate([omega - steps[::-1], [omega], omega + steps])
    pts = pts[(pts > lo) & (pts < hi)]
    extra = [b for b in density.breakpoints if lo < b < hi]
    edges = np.unique(np.concatenate([[lo, hi], pts, extra]))
    peak = float(np.max(np.abs(f(np.linspace(lo, hi, 2001)[1:-1]))))

    def integrand(e):
        val = f(e)
        return val[..., None] / (1j * (e - omega)[..., None] + etas)

    vals, err = _adaptive(integrand, edges, atol=rtol * max(peak, 1e-300) * 10)
    return vals, err


def resolvent_oracle(density, cov: Covariance, omega: float, sign: int = 1, etas=None) -> OracleValue:
    """Half-line coefficient via the ``-i0+`` resolvent, ``eta -> 0`` extrapolated."""
    if density.is_zero or (cov.is_vacuum and sign < 0):
        return OracleValue(0j, 0.0)
    if density.pathological:
        return OracleValue(_flat_half(density, cov, sign), 0.0)
    etas = default_etas(density, cov, omega) if etas is None else np.asarray(etas, dtype=float)
    vals, err = _resolvent_integral(density, cov, omega, sign, etas)
    return _extrapolate(etas, vals, np.full(len(etas), err), "resolvent coefficient")


def second_order_oracle(channels, reservoir, cov: Covariance, phi, etas=None) -> OracleValue:
    """Second-order complex energy shift ``Y_phi`` of an eigenstate.

    ``sum_w sum_jk <phi, D_j^+ D_k phi> R+_jk + <phi, D_j D_k^+ phi> conj(R-_jk)``
    where ``R+-_jk`` are resolvent integrals of ``rho_jk*(q +- 1)/2``, each
    extrapolated to ``eta = 0``.
    """
    phi = np.asarray(phi, dtype=complex)
    total, err = 0j, 0.0
    for ch in channels:
        refs, ops = ch.density_refs, ch.operators
        for j in range(ch.size):
            for k in range(ch.size):
                dens = reservoir.density(refs[j], refs[k])
                for sign in ((1,) if cov.is_vacuum else (1, -1)):
                    if sign > 0:
                        amp = np.vdot(phi, ops[j].conj().T @ ops[k] @ phi)
                    else:
                        amp = np.vdot(phi, ops[j] @ ops[k].conj().T @ phi)
                    if amp == 0 or dens.is_zero:
                        continue
                    r = resolvent_oracle(dens, cov, ch.omega, sign, etas)
                    total += amp * (r.value if sign > 0 else np.conj(r.value))
                    err += abs(amp) * r.error
    return OracleValue(complex(total), err)


W_NAMES = ("w_plus_j0_k1", "w_plus_j1_k0", "w_minus_k0_j1", "w_minus_j1_k0")


@dataclass
class WCoefficients:
    """The four families of one-sided correlation integrals of one channel.

    ``values[name]`` and ``errors[name]`` are ``N x N`` arrays indexed ``[j, k]``.
    """

    omega: float
    values: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)


def traditional_w_coefficients(channel, reservoir, cov: Covariance, etas=None) -> WCoefficients:
    """One-sided time integrals of reservoir correlations for one channel.

    With ``F_(j,0) = A^+(g_j)``, ``F_(j,1) = A(g_j)`` and frequencies
    ``+w`` / ``-w``::

        w+_(j0),(k1) = int_0^inf <A^+(S_t g_j) A(g_k)> dt     ~ rho~-_kj, kernel exp(+ixt)
        w+_(j1),(k0) = int_0^inf <A(S_t g_j) A^+(g_k)> dt     ~ rho~+_jk, kernel exp(-ixt)
        w-_(k0),(j1) = int_0^inf <A^+(g_k) A(S_t g_j)> dt     ~ rho~-_jk, kernel exp(-ixt)
        w-_(j1),(k0) = int_0^inf <A(g_j) A^+(S_t g_k)> dt     ~ rho~+_jk, kernel exp(+ixt)

    where ``S_t`` includes the ``exp(-i w t)`` rotation and ``x = eps - w``.
    """
    refs = channel.density_refs
    n = channel.size
    out = WCoefficients(channel.omega)
    plan = {
        "w_plus_j0_k1": (-1, +1, True),
        "w_plus_j1_k0": (+1, -1, False),
        "w_minus_k0_j1": (-1, -1, False),
        "w_minus_j1_k0": (+1, +1, False),
    }
    for name, (sign, direction, swap) in plan.items():
        val = np.zeros((n, n), dtype=complex)
        err = np.zeros((n, n))
        for j in range(n):
            for k in range(n):
                a, b = (refs[k], refs[j]) if swap else (refs[j], refs[k])
                r = half_line_time_oracle(reservoir.density(a, b), cov, channel.omega, sign,
                                          etas=etas, direction=direction)
                val[j, k], err[j, k] = r.value, r.error
        out.values[name] = val
        out.errors[name] = err
    return out


def expected_w_coefficients(gram) -> dict:
    """The Gram-coefficient expressions the four w families must equal."""
    hp, hm = gram.half_plus, gram.half_minus
    return {
        "w_plus_j0_k1": np.conj(hm),
        "w_plus_j1_k0": hp,
        "w_minus_k0_j1": hm,
        "w_minus_j1_k0": np.conj(hp.T),
    }


def w_identity_check(channel, reservoir, cov: Covariance, gram, tol: float = 1e-6,
                     etas=None) -> dict:
    """Compare the four w families with the Gram coefficients.

    Returns the per-family maximal deviation; raises :class:`AssertionFailure`
    when any deviation exceeds ``tol`` (relative to ``max(1, |value|)``)
    plus the oracle's own error estimate.
    """
    w = traditional_w_coefficients(channel, reservoir, cov, etas=etas)
    expect = expected_w_coefficients(gram)
    report = {}
    failed = []
    for name in W_NAMES:
        dev = np.abs(w.values[name] - expect[name])
        scale = np.maximum(1.0, np.abs(expect[name]))
        rel = float(np.max(dev / scale))
        report[name] = {"max_deviation": rel, "oracle_error": float(np.max(w.errors[name]))}
        if rel > tol + float(np.max(w.errors[name] / scale)):
            failed.append(name)
    if failed:
        raise AssertionFailure(f"traditional coefficients disagree at omega={channel.omega}: {failed}",
                               report)
    return report
