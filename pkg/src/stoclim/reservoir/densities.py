"""Spectral overlap densities rho_jk(eps) describing the reservoir.

Every coefficient of the weak-coupling limit depends on the reservoir test
functions only through these one-dimensional densities, so they are the
reservoir's entire representation here.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import math

import numpy as np
from scipy.interpolate import PchipInterpolator

from ..errors import ValidationError

PRESETS = ("flat", "ohmic", "lorentzian", "photon-isotropic", "zero")
TRUNCATION_FLOOR = 1e-14


@dataclass(frozen=True)
class SpectralDensity:
    """One spectral overlap density.

    Attributes
    ----------
    kind : str
        Preset name or ``"tabulated"``.
    params : dict
        Preset parameters.
    support : (float, float)
        Support interval; infinite ends only for flagged presets or for
        analytic tails.
    pathological : bool
        Set for the flat preset, whose spectrum is unbounded below.
    scale : float
        Characteristic width of features, used to pick step sizes.
    """

    kind: str
    params: dict
    support: tuple
    pathological: bool = False
    scale: float = 1.0
    breakpoints: tuple = ()
    _table: object = field(default=None, repr=False, compare=False)
    conjugated: bool = False

    def __call__(self, eps):
        eps = np.asarray(eps, dtype=float)
        val = self._raw(eps)
        lo, hi = self.support
        val = np.where((eps >= lo) & (eps <= hi), val, 0.0)
        return np.conj(val) if self.conjugated else val

    def scalar(self, x: float) -> complex:
        """Pure-Python evaluation at one point (used inside adaptive quadrature)."""
        lo, hi = self.support
        if not lo <= x <= hi or self.kind == "zero":
            return 0j
        p = self.params
        if self.kind in ("ohmic", "photon-isotropic"):
            v = complex(p["alpha"] * x * math.exp(-x / p["cutoff"]) * p.get("phase", 1.0))
        elif self.kind == "lorentzian":
            g = p["width"]
            v = complex(p["height"] * g * g / ((x - p["center"]) ** 2 + g * g)
                        * math.exp(-x / p["cutoff"]) * p.get("phase", 1.0))
        else:
            return complex(self(np.array([x]))[0])
        return v.conjugate() if self.conjugated else v

    def _raw(self, eps):
        p = self.params
        if self.kind == "flat":
            return np.full(eps.shape, p["kappa"] / (2 * np.pi), dtype=complex)
        if self.kind == "zero":
            return np.zeros(eps.shape, dtype=complex)
        if self.kind == "ohmic":
            with np.errstate(over="ignore", invalid="ignore"):
                v = p["alpha"] * eps * np.exp(-eps / p["cutoff"])
            return np.nan_to_num(v).astype(complex) * p.get("phase", 1.0)
        if self.kind == "photon-isotropic":
            with np.errstate(over="ignore", invalid="ignore"):
                v = p["alpha"] * eps * np.exp(-eps / p["cutoff"])
            return np.nan_to_num(v).astype(complex)
        if self.kind == "lorentzian":
            g = p["width"]
            with np.errstate(over="ignore", invalid="ignore"):
                v = p["height"] * g * g / ((eps - p["center"]) ** 2 + g * g) * np.exp(-eps / p["cutoff"])
            return np.nan_to_num(v).astype(complex) * p.get("phase", 1.0)
        if self.kind == "tabulated":
            re, im = self._table
            return re(eps) + 1j * im(eps)
        raise ValidationError(f"unknown density kind {self.kind!r}")

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def conj(self) -> "SpectralDensity":
        """Density of the transposed pair, ``rho_kj = conj(rho_jk)``."""
        return SpectralDensity(self.kind, self.params, self.support, self.pathological,
                               self.scale, self.breakpoints, self._table, not self.conjugated)

    def scaled(self, factor: complex) -> "SpectralDensity":
        """Return ``factor * rho`` (only for presets that carry a phase)."""
        p = dict(self.params)
        p["phase"] = p.get("phase", 1.0) * factor
        if self.kind not in ("ohmic", "lorentzian"):
            raise ValidationError("only ohmic and lorentzian densities accept a complex factor")
        return SpectralDensity(self.kind, p, self.support, self.pathological, self.scale,
                               self.breakpoints, self._table, self.conjugated)

    def effective_upper(self, weight=None) -> float:
        """Upper end of the support after truncation of an infinite tail.

        The truncation point is where ``|rho * weight|`` drops below
        1e-14 of its peak and stays there.
        """
        lo, hi = self.support
        if np.isfinite(hi):
            return float(hi)
        if self.pathological:
            return float("inf")
        start = max(lo, 0.0)
        grid = start + self.scale * np.concatenate([np.linspace(1e-6, 1.0, 200),
                                                    np.geomspace(1.0, 1e6, 2000)[1:]])
        f = np.abs(self(grid)) if weight is None else np.abs(self(grid) * weight(grid))
        peak = np.max(f)
        if peak == 0:
            return float(start + self.scale)
        above = np.nonzero(f > TRUNCATION_FLOOR * peak)[0]
        return float(grid[min(above[-1] + 1, len(grid) - 1)])


def preset_density(kind: str, params) -> SpectralDensity:
    """Build an analytic density preset.

    Parameters
    ----------
    kind : {"flat", "ohmic", "lorentzian", "photon-isotropic", "zero"}
    params : dict or sequence
        flat: ``kappa``.  ohmic: ``alpha``, ``cutoff`` with
        ``rho = alpha*eps*exp(-eps/cutoff)`` on [0, inf).  lorentzian:
        ``height``, ``center``, ``width`` and optional ``cutoff`` (soft
        exponential tail, default ``20*(center+width)``), on [0, inf).
        photon-isotropic: ``coupling``, ``dipole`` (complex 3-vector or
        its squared norm) and ``cutoff``; the isotropic angular average
        ``8*pi/3`` gives ``rho = coupling*|p|^2*eps*exp(-eps/cutoff)/(6*pi^2)``.

    Returns
    -------
    SpectralDensity
    """
    names = {
        "flat": ("kappa",),
        "ohmic": ("alpha", "cutoff"),
        "lorentzian": ("height", "center", "width", "cutoff"),
        "photon-isotropic": ("coupling", "dipole", "cutoff"),
        "zero": (),
    }
    if kind not in names:
        raise ValidationError(f"unknown density preset {kind!r}; expected one of {PRESETS}")
    if not isinstance(params, dict):
        params = dict(zip(names[kind], params))
    p = dict(params)
    unknown = set(p) - set(names[kind])
    if unknown:
        raise ValidationError(f"unknown parameters for {kind}: {sorted(unknown)}")

    def positive(name):
        v = p.get(name)
        if v is None or not np.isfinite(v) or not v > 0:
            raise ValidationError(f"{kind}: parameter {name} must be a positive number")
        return float(v)

    if kind == "zero":
        return SpectralDensity("zero", {}, (0.0, 1.0), scale=1.0)
    if kind == "flat":
        kappa = positive("kappa")
        return SpectralDensity("flat", {"kappa": kappa}, (-np.inf, np.inf), pathological=True,
                               scale=1.0)
    if kind == "ohmic":
        a, c = positive("alpha"), positive("cutoff")
        return SpectralDensity("ohmic", {"alpha": a, "cutoff": c}, (0.0, np.inf), scale=c,
                               breakpoints=(0.0,))
    if kind == "lorentzian":
        h, c0, g = positive("height"), float(p.get("center", np.nan)), positive("width")
        if not np.isfinite(c0):
            raise ValidationError("lorentzian: parameter center must be finite")
        p.setdefault("cutoff", 20.0 * (abs(c0) + g))
        cut = positive("cutoff")
        return SpectralDensity("lorentzian", {"height": h, "center": c0, "width": g, "cutoff": cut},
                               (0.0, np.inf), scale=g, breakpoints=(0.0,))
    # photon-isotropic
    coupling, cut = positive("coupling"), positive("cutoff")
    dip = p.get("dipole")
    if dip is None:
        raise ValidationError("photon-isotropic: parameter dipole is required")
    if np.ndim(dip) == 0:
        p2 = float(dip)
        if not p2 >= 0:
            raise ValidationError("photon-isotropic: squared dipole must be nonnegative")
    else:
        v = np.asarray(dip, dtype=complex)
        if v.shape != (3,):
            raise ValidationError("photon-isotropic: dipole must be a 3-vector")
        p2 = float(np.vdot(v, v).real)
    alpha = coupling * p2 * (8 * np.pi / 3) / (2 * (2 * np.pi) ** 3)
    return SpectralDensity("photon-isotropic",
                           {"alpha": alpha, "cutoff": cut, "coupling": coupling, "dipole_sq": p2},
                           (0.0, np.inf), scale=cut, breakpoints=(0.0,))


def tabulated_density(eps, values) -> SpectralDensity:
    """Density from samples, monotone cubic (PCHIP) between nodes, zero outside."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=complex)
    if eps.ndim != 1 or eps.shape != values.shape or len(eps) < 2:
        raise ValidationError("tabulated density needs matching 1-D grids with >= 2 points")
    if np.any(np.diff(eps) <= 0):
        raise ValidationError("tabulated density grid must be strictly increasing")
    if not np.all(np.isfinite(values)):
        raise ValidationError("tabulated density contains non-finite values")
    re = PchipInterpolator(eps, values.real, extrapolate=False)
    im = PchipInterpolator(eps, values.imag, extrapolate=False)

    def safe(f):
        return lambda x: np.nan_to_num(f(x))

    scale = float(np.min(np.diff(eps))) * 4
    return SpectralDensity("tabulated", {"n": len(eps)}, (float(eps[0]), float(eps[-1])),
                           scale=max(scale, 1e-12), breakpoints=tuple(float(x) for x in eps),
                           _table=(safe(re), safe(im)))


def load_density_csv(path) -> SpectralDensity:
    """Read an ``eps, re, im`` CSV (header optional) into a tabulated density."""
    rows = []
    with open(Path(path), newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                nums = [float(x) for x in rec]
            except ValueError:
                if rows:
                    raise ValidationError(f"{path}: non-numeric row {rec}")
                continue
            if len(nums) == 2:
                nums.append(0.0)
            if len(nums) != 3:
                raise ValidationError(f"{path}: expected columns eps, re, im")
            rows.append(nums)
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    a = np.array(rows)
    return tabulated_density(a[:, 0], a[:, 1] + 1j * a[:, 2])


class Reservoir:
    """Table of overlap densities indexed by pairs of density labels.

    Diagonal entries are required for every label.  Off-diagonal entries are
    optional (missing means uncorrelated, density zero) and the transposed
    entry is always the pointwise conjugate.
    """

    def __init__(self, diagonal: dict, cross: dict | None = None):
        self.diagonal = dict(diagonal)
        self.cross = {}
        for (a, b), dens in (cross or {}).items():
            if a == b:
                raise ValidationError("cross densities must join two different labels")
            for lab in (a, b):
                if lab not in self.diagonal:
                    raise ValidationError(f"cross density refers to unknown label {lab!r}")
            if (b, a) in self.cross:
                raise ValidationError(f"cross density for {(a, b)} given twice")
            self.cross[(a, b)] = dens
        for lab, dens in self.diagonal.items():
            if dens.kind == "tabulated":
                grid = np.linspace(*dens.support, 257)
                v = dens(grid)
                if np.max(np.abs(v.imag)) > 1e-12 * max(np.max(np.abs(v)), 1e-300):
                    raise ValidationError(f"diagonal density {lab!r} must be real")
                if np.min(v.real) < -1e-10:
                    raise ValidationError(f"diagonal density {lab!r} must be nonnegative")

    @property
    def labels(self):
        return tuple(self.diagonal)

    def density(self, a: str, b: str) -> SpectralDensity:
        if a == b:
            try:
                return self.diagonal[a]
            except KeyError:
                raise ValidationError(f"unknown density label {a!r}") from None
        if (a, b) in self.cross:
            return self.cross[(a, b)]
        if (b, a) in self.cross:
            return self.cross[(b, a)].conj()
        for lab in (a, b):
            if lab not in self.diagonal:
                raise ValidationError(f"unknown density label {lab!r}")
        return preset_density("zero", {})

    def matrix(self, refs, eps) -> np.ndarray:
        """Stack ``[rho_jk(eps)]`` into shape ``(len(eps), N, N)``."""
        eps = np.atleast_1d(np.asarray(eps, dtype=float))
        n = len(refs)
        out = np.zeros((len(eps), n, n), dtype=complex)
        for j in range(n):
            for k in range(n):
                out[:, j, k] = self.density(refs[j], refs[k])(eps)
        return out

    def check_psd(self, refs, eps, floor: float = -1e-10) -> float:
        """Smallest eigenvalue of the density matrix over ``eps``; raises below floor."""
        m = self.matrix(refs, eps)
        m = (m + np.conj(np.swapaxes(m, 1, 2))) / 2
        lam = float(np.min(np.linalg.eigvalsh(m)))
        if lam < floor:
            raise ValidationError(f"spectral overlap densities are not PSD (min eigenvalue {lam:.3e})")
        return lam

    def support_lower(self) -> float:
        return min(d.support[0] for d in self.diagonal.values())

    def pathological(self) -> bool:
        return any(d.pathological for d in self.diagonal.values())
