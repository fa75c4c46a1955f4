"""Bohr-frequency decomposition of a finite-dimensional system.

A coupling operator ``D`` is split into harmonic components ``D^w`` with
``[D^w, H] = hbar w D^w``.  Eigenvalues closer than a relative tolerance are
treated as one level, so the decomposition does not depend on the basis
chosen inside a degenerate eigenspace.

Indices of eigenstates are zero-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Sequence

import numpy as np

from .errors import ValidationError

DEFAULT_DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class SystemSpec:
    """Finite-dimensional system Hamiltonian plus raw coupling operators.

    Parameters
    ----------
    hamiltonian : (d, d) array_like
        Hermitian system Hamiltonian in energy units.
    couplings : sequence of (d, d) array_like
        Total coupling operators before frequency decomposition.
    density_refs : sequence of str
        One spectral-density label per coupling.
    hbar : float
        Reduced Planck constant, default 1.
    """

    hamiltonian: np.ndarray
    couplings: tuple = ()
    density_refs: tuple = ()
    hbar: float = 1.0

    def __post_init__(self):
        h = np.array(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValidationError("hamiltonian must be a square matrix")
        d = h.shape[0]
        if d < 2:
            raise ValidationError("system dimension must be at least 2")
        scale = max(np.max(np.abs(np.linalg.eigvalsh((h + h.conj().T) / 2))), 1e-300)
        if np.max(np.abs(h - h.conj().T)) > 1e-12 * scale:
            raise ValidationError("hamiltonian is not Hermitian")
        cs = tuple(np.array(c, dtype=complex) for c in self.couplings)
        for i, c in enumerate(cs):
            if c.shape != (d, d):
                raise ValidationError(f"coupling {i} has shape {c.shape}, expected {(d, d)}")
        refs = tuple(str(r) for r in self.density_refs)
        if len(refs) != len(cs):
            raise ValidationError("need exactly one density reference per coupling")
        if not self.hbar > 0:
            raise ValidationError("hbar must be positive")
        h.setflags(write=False)
        for c in cs:
            c.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "couplings", cs)
        object.__setattr__(self, "density_refs", refs)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True)
class EigenSystem:
    """Ordered eigen-decomposition of a system Hamiltonian.

    Attributes
    ----------
    energies : ndarray
        Ascending eigenvalues.
    basis : ndarray
        Unitary matrix whose columns are the eigenvectors.
    clusters : tuple of tuple of int
        Groups of indices whose energies agree within the tolerance.
    """

    energies: np.ndarray
    basis: np.ndarray
    degeneracy_tol: float
    clusters: tuple
    hamiltonian: np.ndarray
    hbar: float = 1.0

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def energy_scale(self) -> float:
        return 1.0 + float(np.max(np.abs(self.energies)))

    def cluster_energy(self, c: int) -> float:
        return float(np.mean(self.energies[list(self.clusters[c])]))

    def projector(self, c: int) -> np.ndarray:
        v = self.basis[:, list(self.clusters[c])]
        return v @ v.conj().T

    def state(self, i: int) -> np.ndarray:
        return self.basis[:, i].copy()


@dataclass(frozen=True)
class FrequencyChannel:
    """All coupling components oscillating at one Bohr frequency.

    Attributes
    ----------
    omega : float
        Angular Bohr frequency; positive values lower the system energy.
    operators : tuple of ndarray
        ``D_j^w`` for every coupling j that has a nonzero component.
    pair_labels : tuple of (int, int)
        Eigenstate pairs ``(phi, phi')`` contributing to this frequency.
    density_refs : tuple of str
        Spectral-density label for each operator.
    """

    omega: float
    operators: tuple
    pair_labels: tuple = ()
    density_refs: tuple = ()

    @property
    def size(self) -> int:
        return len(self.operators)


@dataclass
class DegeneracyReport:
    """Bohr-frequency classes with secular/extraneous labels.

    ``classes`` maps a representative frequency to a list of
    ``((phi, phi'), label)`` entries.
    """

    classes: dict = field(default_factory=dict)
    tolerance: float = DEFAULT_DEGENERACY_TOL
    scale: float = 1.0

    def label_of(self, pair):
        for members in self.classes.values():
            for p, lab in members:
                if p == tuple(pair):
                    return lab
        raise KeyError(pair)

    def labels(self) -> dict:
        return {p: lab for members in self.classes.values() for p, lab in members}


def _single_linkage(values: np.ndarray, gap: float) -> list:
    """Group indices of ``values`` whose sorted neighbours differ by <= gap."""
    order = np.argsort(values, kind="stable")
    groups = []
    for i in order:
        if groups and values[i] - values[groups[-1][-1]] <= gap:
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])
    return groups


def _fix_phase(v: np.ndarray) -> np.ndarray:
    tiny = 1e-12 * np.max(np.abs(v))
    k = int(np.argmax(np.abs(v) > tiny))
    return v * (abs(v[k]) / v[k])


def diagonalize(spec_or_h, degeneracy_tol: float = DEFAULT_DEGENERACY_TOL,
                hbar: float | None = None) -> EigenSystem:
    """Diagonalize the system Hamiltonian with a reproducible basis.

    Parameters
    ----------
    spec_or_h : SystemSpec or (d, d) array_like
        System specification or a bare Hermitian matrix.
    degeneracy_tol : float
        Relative tolerance ``tol*(1+max|E|)`` for grouping eigenvalues.

    Returns
    -------
    EigenSystem
        Energies ascending.  Each eigenvector has its first nonzero component
        real and positive; inside a degenerate cluster vectors are ordered
        lexicographically by (real, imag) of their components.
    """
    if isinstance(spec_or_h, SystemSpec):
        h = spec_or_h.hamiltonian
        hb = spec_or_h.hbar if hbar is None else hbar
    else:
        h = SystemSpec(spec_or_h).hamiltonian
        hb = 1.0 if hbar is None else hbar
    energies, vecs = np.linalg.eigh(h)
    vecs = np.column_stack([_fix_phase(vecs[:, i]) for i in range(len(energies))])
    scale = 1.0 + np.max(np.abs(energies))
    groups = _single_linkage(energies, degeneracy_tol * scale)

    order = []
    for g in groups:
        if len(g) > 1:
            def key(i):
                v = np.round(vecs[:, i], 12)
                return tuple(x for c in v for x in (-c.real, -c.imag))
            g = sorted(g, key=key)
        order.extend(g)
    energies = energies[order]
    vecs = vecs[:, order]
    clusters, pos = [], 0
    for g in groups:
        clusters.append(tuple(range(pos, pos + len(g))))
        pos += len(g)
    energies.setflags(write=False)
    vecs.setflags(write=False)
    return EigenSystem(energies=energies, basis=vecs, degeneracy_tol=degeneracy_tol,
                       clusters=tuple(clusters), hamiltonian=h, hbar=hb)


def _frequency_groups(eig: EigenSystem):
    """Cluster-pair Bohr frequencies grouped by single linkage.

    Returns a list of ``(omega, [(a, b), ...])`` with cluster indices, sorted
    by ascending omega.
    """
    nc = len(eig.clusters)
    ce = np.array([eig.cluster_energy(c) for c in range(nc)])
    pairs = [(a, b) for a in range(nc) for b in range(nc)]
    freqs = np.array([(ce[b] - ce[a]) / eig.hbar for a, b in pairs])
    gap = eig.degeneracy_tol * eig.energy_scale / eig.hbar
    out = []
    for g in _single_linkage(freqs, gap):
        members = [pairs[i] for i in g]
        w = float(np.mean(freqs[g]))
        if any(a == b for a, b in members):
            w = 0.0
        out.append((w, members))
    return out


def _components(eig: EigenSystem, d_total: np.ndarray):
    """Yield ``(omega, D^omega, state_pairs)`` for every nonzero component."""
    proj = [eig.projector(c) for c in range(len(eig.clusters))]
    norm = np.linalg.norm(d_total)
    for w, members in _frequency_groups(eig):
        dw = np.zeros_like(d_total)
        labels = []
        for a, b in members:
            block = proj[a] @ d_total @ proj[b]
            if np.linalg.norm(block) > 1e-14 * max(norm, 1e-300):
                dw = dw + block
                labels.extend((i, k) for i in eig.clusters[a] for k in eig.clusters[b])
        if labels:
            yield w, dw, sorted(labels)


def frequency_decompose(spec: SystemSpec | None, eig: EigenSystem, d_total,
                        density_ref: str = "") -> list:
    """Split one coupling operator into its Bohr-frequency components.

    Parameters
    ----------
    spec : SystemSpec or None
        Only used for shape checking.
    eig : EigenSystem
    d_total : (d, d) array_like
    density_ref : str
        Label attached to every emitted operator.

    Returns
    -------
    list of FrequencyChannel
        One single-operator channel per nonzero component, ascending in omega.
    """
    d_total = np.asarray(d_total, dtype=complex)
    if d_total.shape != (eig.dim, eig.dim):
        raise ValidationError(f"operator shape {d_total.shape} does not match dimension {eig.dim}")
    if spec is not None and spec.dim != eig.dim:
        raise ValidationError("system spec and eigensystem dimensions differ")
    return [FrequencyChannel(omega=w, operators=(dw,), pair_labels=tuple(lab),
                             density_refs=(density_ref,))
            for w, dw, lab in _components(eig, d_total)]


def build_channels(spec: SystemSpec, eig: EigenSystem | None = None) -> list:
    """Merge the decompositions of all couplings of ``spec`` by frequency.

    Couplings whose components share a frequency land in the same channel,
    in coupling order, which is what the Gram matrices are indexed by.
    """
    if eig is None:
        eig = diagonalize(spec)
    merged = {}
    for d_total, ref in zip(spec.couplings, spec.density_refs):
        for w, dw, lab in _components(eig, d_total):
            ops, labs, refs = merged.setdefault(w, ([], set(), []))
            ops.append(dw)
            labs.update(lab)
            refs.append(ref)
    return [FrequencyChannel(omega=w, operators=tuple(ops), pair_labels=tuple(sorted(labs)),
                             density_refs=tuple(refs))
            for w, (ops, labs, refs) in sorted(merged.items())]


def transition_operators(eig: EigenSystem, phi: int, phi_prime: int) -> np.ndarray:
    """Rank-one operator ``|phi><phi'|`` in the computational basis."""
    d = eig.dim
    for i in (phi, phi_prime):
        if not (0 <= int(i) < d):
            raise IndexError(f"eigenstate index {i} out of range for dimension {d}")
    u, v = eig.basis[:, phi], eig.basis[:, phi_prime]
    return np.outer(u, v.conj())


def check_harmonic(D, H_S, omega: float, hbar: float = 1.0) -> float:
    """Relative residual of the harmonicity relation ``[D, H] = hbar w D``."""
    D = np.asarray(D, dtype=complex)
    H_S = np.asarray(H_S, dtype=complex)
    if D.shape != H_S.shape:
        raise ValidationError("shape mismatch between operator and Hamiltonian")
    r = D @ H_S - H_S @ D - hbar * omega * D
    return float(np.linalg.norm(r) / (1.0 + np.linalg.norm(D)))


SECULAR_DIAGONAL_SELF = "secular-1"
SECULAR_DIAGONAL = "secular-2"
SECULAR_SELF = "secular-3"
EXTRANEOUS = "extraneous"


def classify_degeneracies(eig: EigenSystem, tol: float = DEFAULT_DEGENERACY_TOL) -> DegeneracyReport:
    """Group all ordered eigenstate pairs by Bohr frequency and label them.

    A diagonal pair is ``secular-2`` when another diagonal pair shares its
    class (``secular-1`` if it is alone), and ``extraneous`` when a degenerate
    level puts an off-diagonal pair into the zero-frequency class.  An off-diagonal pair alone in its
    class only coincides with itself and is ``secular-3``; an off-diagonal pair
    sharing its frequency with any other pair is ``extraneous``.
    """
    if not tol > 0:
        raise ValidationError("tolerance must be positive")
    e = np.asarray(eig.energies, dtype=float)
    d = len(e)
    scale = 1.0 + float(np.max(np.abs(e)))
    pairs = [(i, k) for i in range(d) for k in range(d)]
    gaps = np.array([e[k] - e[i] for i, k in pairs])
    report = DegeneracyReport(tolerance=tol, scale=scale)
    for g in _single_linkage(gaps, tol * scale):
        members = [pairs[i] for i in g]
        n_diag = sum(1 for i, k in members if i == k)
        rep = 0.0 if n_diag else float(np.mean(gaps[g])) / eig.hbar
        # a diagonal pair is secular only with other diagonal pairs
        mixed = n_diag < len(members)
        entries = []
        for p in members:
            if p[0] == p[1]:
                if mixed:
                    lab = EXTRANEOUS
                else:
                    lab = SECULAR_DIAGONAL if n_diag > 1 else SECULAR_DIAGONAL_SELF
            else:
                lab = EXTRANEOUS if len(members) > 1 else SECULAR_SELF
            entries.append((p, lab))
        report.classes[rep] = entries
    return report


def classify_brute_force(energies, tol: float = DEFAULT_DEGENERACY_TOL) -> dict:
    """O(d^4) reference labelling by direct comparison of every pair of pairs."""
    e = [float(x) for x in energies]
    d = len(e)
    lim = tol * (1.0 + max(abs(x) for x in e))
    out = {}
    for p in range(d):
        for pp in range(d):
            kinds = set()
            for q in range(d):
                for qq in range(d):
                    if abs((e[pp] - e[p]) - (e[qq] - e[q])) > lim:
                        continue
                    if p == pp == q == qq:
                        kinds.add(1)
                    elif p == pp and q == qq:
                        kinds.add(2)
                    elif p == q and pp == qq:
                        kinds.add(3)
                    else:
                        kinds.add(0)
            if 0 in kinds:
                out[(p, pp)] = EXTRANEOUS
            elif 2 in kinds:
                out[(p, pp)] = SECULAR_DIAGONAL
            elif 1 in kinds:
                out[(p, pp)] = SECULAR_DIAGONAL_SELF
            else:
                out[(p, pp)] = SECULAR_SELF
    return out


def hydrogen_degeneracy_search(n_max: int) -> list:
    """Coincident hydrogen transition frequencies up to principal number n_max.

    Finds every ``(n, m, n', m')`` with ``n < m``, ``n' < m'``,
    ``(n, m) < (n', m')`` lexicographically and
    ``1/n^2 - 1/m^2 == 1/n'^2 - 1/m'^2`` exactly, using reduced integer
    fractions as hash keys.
    """
    if not isinstance(n_max, (int, np.integer)) or not 2 <= n_max <= 200:
        raise ValidationError("n_max must be an integer in [2, 200]")
    buckets = {}
    for n in range(1, n_max + 1):
        for m in range(n + 1, n_max + 1):
            num, den = m * m - n * n, n * n * m * m
            g = gcd(num, den)
            buckets.setdefault((num // g, den // g), []).append((n, m))
    hits = []
    for members in buckets.values():
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                hits.append(a + b)
    return sorted(hits)


def hydrogen_search_exact(n_max: int) -> list:
    """Quadratic reference for :func:`hydrogen_degeneracy_search` using Fraction."""
    pairs = [(n, m) for n in range(1, n_max + 1) for m in range(n + 1, n_max + 1)]
    val = {p: Fraction(1, p[0] ** 2) - Fraction(1, p[1] ** 2) for p in pairs}
    out = []
    for i, a in enumerate(pairs):
        for b in pairs[i + 1:]:
            if val[a] == val[b]:
                out.append(tuple(sorted([a, b])[0] + sorted([a, b])[1]))
    return sorted(out)
