"""Limit generator: drift Y, linewidth, Lamb shift, L0 / L0* and their flows.

Conventions
-----------
For a channel at Bohr frequency w with operators ``D_j`` and Gram matrices
``half_plus``, ``half_minus``, ``full_plus``, ``full_minus``::

    Y        = sum D_j^+ D_k half_plus[j,k] + D_j D_k^+ conj(half_minus[j,k])
    Theta(X) = sum D_j^+ X D_k full_plus[j,k] + D_k X D_j^+ full_minus[j,k]
    L0(X)    = -X Y - Y^+ X + Theta(X)

and L0* is the trace dual of L0.  Matrices are vectorized row-major, so
``vec(A X B) = kron(A, B.T) vec(X)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import PositivityError, ValidationError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
EIGEN_FLOOR = -1e-8


class MultiplicityWarning(UserWarning):
    """The stationary state of a generator is not unique."""


class ZeroFrequencyWarning(UserWarning):
    """A zero-frequency channel makes the survival rate differ from -<phi, Gamma phi>."""


@dataclass(frozen=True)
class DensityMatrix:
    """Validated system state.

    Hermitian within 1e-10, unit trace within 1e-10 and smallest eigenvalue
    at least -1e-8 (all relative to the stored tolerances).
    """

    matrix: np.ndarray
    hermitian_tol: float = HERMITIAN_TOL
    trace_tol: float = TRACE_TOL
    eigen_floor: float = EIGEN_FLOOR

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError("density matrix must be square")
        if np.max(np.abs(m - m.conj().T)) > self.hermitian_tol:
            raise ValidationError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > self.trace_tol:
            raise ValidationError(f"density matrix trace {np.trace(m).real:.12g} differs from 1")
        lam = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if lam[0] < self.eigen_floor:
            raise ValidationError(f"density matrix has negative eigenvalue {lam[0]:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d)


def _as_matrix(s) -> np.ndarray:
    return np.asarray(s.matrix if isinstance(s, DensityMatrix) else s, dtype=complex)


@dataclass
class GksGenerator:
    """Assembled limit generator.

    Attributes
    ----------
    drift : ndarray
        ``Y`` (units 1/time).
    channels : list of FrequencyChannel
    grams : list of GramCoefficients
        Aligned with ``channels``.
    hamiltonian : ndarray or None
        ``H_S``, used for invariant checks and picture changes.
    hbar : float
    """

    drift: np.ndarray
    channels: list
    grams: list
    hamiltonian: np.ndarray | None = None
    hbar: float = 1.0
    _super: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def gamma(self) -> np.ndarray:
        """Linewidth operator ``Y + Y^+``."""
        return self.drift + self.drift.conj().T

    @property
    def lamb_shift(self) -> np.ndarray:
        """Lamb shift ``H'_S = (hbar/2i)(Y - Y^+)`` in energy units."""
        return self.hbar / 2j * (self.drift - self.drift.conj().T)

    @property
    def has_zero_frequency(self) -> bool:
        return any(ch.omega == 0.0 for ch in self.channels)

    def terms(self):
        """Iterate ``(D_j, D_k, gram, j, k)`` over all channel blocks."""
        for ch, g in zip(self.channels, self.grams):
            ops = ch.operators
            for j, dj in enumerate(ops):
                for k, dk in enumerate(ops):
                    yield dj, dk, g, j, k

    def invariant_residuals(self) -> dict:
        """Residuals of the generator invariants (all should be tiny)."""
        y = self.drift
        rec = 0.5 * self.gamma + 1j / self.hbar * self.lamb_shift - y
        out = {
            "reconstruction": float(np.max(np.abs(rec))),
            "gamma_min_eigenvalue": float(np.min(np.linalg.eigvalsh(self.gamma))),
            "unit_preservation": float(np.linalg.norm(generator_heisenberg(self, np.eye(self.dim)))),
        }
        if self.hamiltonian is not None:
            h = self.hamiltonian
            den = max(np.linalg.norm(y) * np.linalg.norm(h), 1e-300)
            out["drift_commutator"] = float(np.linalg.norm(y @ h - h @ y) / den)
        return out


def assemble_drift(channels, grams, hamiltonian=None, hbar: float = 1.0,
                   check: bool = True) -> GksGenerator:
    """Assemble ``Y`` from half-line Gram matrices.

    Parameters
    ----------
    channels : list of FrequencyChannel
    grams : list of GramCoefficients
        One per channel, same order.
    hamiltonian : ndarray, optional
        When given, ``[Y, H_S] = 0`` is verified.

    Raises
    ------
    ValidationError
        Missing Gram block, shape mismatch or broken invariant.
    """
    channels, grams = list(channels), list(grams)
    if len(channels) != len(grams):
        raise ValidationError(f"{len(channels)} channels but {len(grams)} Gram blocks")
    if not channels:
        if hamiltonian is None:
            raise ValidationError("cannot infer the dimension without channels or hamiltonian")
        d = np.asarray(hamiltonian).shape[0]
        return GksGenerator(np.zeros((d, d), dtype=complex), [], [], np.asarray(hamiltonian, complex), hbar)
    d = channels[0].operators[0].shape[0]
    y = np.zeros((d, d), dtype=complex)
    for ch, g in zip(channels, grams):
        n = ch.size
        for name in ("half_plus", "half_minus", "full_plus", "full_minus"):
            if getattr(g, name).shape != (n, n):
                raise ValidationError(f"Gram block {name} at omega={ch.omega} has wrong shape")
        if abs(g.omega - ch.omega) > 1e-12 * (1 + abs(ch.omega)):
            raise ValidationError(f"Gram block for omega={g.omega} attached to channel {ch.omega}")
        ops = ch.operators
        hp, hm = g.half_plus, g.half_minus
        for j in range(n):
            for k in range(n):
                if hp[j, k] != 0:
                    y += ops[j].conj().T @ ops[k] * hp[j, k]
                if hm[j, k] != 0:
                    y += ops[j] @ ops[k].conj().T * np.conj(hm[j, k])
    h = None if hamiltonian is None else np.asarray(hamiltonian, dtype=complex)
    gen = GksGenerator(y, channels, grams, h, hbar)
    if check and h is not None:
        r = gen.invariant_residuals()
        if r["drift_commutator"] > 1e-9:
            raise ValidationError(f"drift does not commute with H_S (residual {r['drift_commutator']:.2e})")
    return gen


def theta_map(gen: GksGenerator, X) -> np.ndarray:
    """``Theta(X) = sum D_j^+ X D_k full_plus[j,k] + D_k X D_j^+ full_minus[j,k]``."""
    X = np.asarray(X, dtype=complex)
    if X.shape != (gen.dim, gen.dim):
        raise ValidationError(f"operator shape {X.shape} does not match dimension {gen.dim}")
    out = np.zeros_like(X)
    for dj, dk, g, j, k in gen.terms():
        fp, fm = g.full_plus[j, k], g.full_minus[j, k]
        if fp != 0:
            out += dj.conj().T @ X @ dk * fp
        if fm != 0:
            out += dk @ X @ dj.conj().T * fm
    return out


def generator_heisenberg(gen: GksGenerator, X) -> np.ndarray:
    """``L0(X) = -X Y - Y^+ X + Theta(X)``."""
    X = np.asarray(X, dtype=complex)
    y = gen.drift
    return -X @ y - y.conj().T @ X + theta_map(gen, X)


def generator_schrodinger(gen: GksGenerator, s) -> np.ndarray:
    """Master-equation right-hand side in the four-bracket form.

    ::

        ds/dt = -sum { [D_j D_k^+ s - D_k^+ s D_j] conj(h-[j,k])
                     + [D_j^+ D_k s - D_k s D_j^+] h+[j,k]
                     - [D_j^+ s D_k - s D_k D_j^+] h-[j,k]
                     - [D_j s D_k^+ - s D_k^+ D_j] conj(h+[j,k]) }

    with ``h+ = half_plus`` and ``h- = half_minus``.
    """
    s = _as_matrix(s)
    if s.shape != (gen.dim, gen.dim):
        raise ValidationError(f"state shape {s.shape} does not match dimension {gen.dim}")
    out = np.zeros_like(s)
    for dj, dk, g, j, k in gen.terms():
        hp, hm = g.half_plus[j, k], g.half_minus[j, k]
        djh, dkh = dj.conj().T, dk.conj().T
        if hm != 0:
            out -= (dj @ dkh @ s - dkh @ s @ dj) * np.conj(hm)
            out += (djh @ s @ dk - s @ dk @ djh) * hm
        if hp != 0:
            out -= (djh @ dk @ s - dk @ s @ djh) * hp
            out += (dj @ s @ dkh - s @ dkh @ dj) * np.conj(hp)
    return out


def superoperator(gen: GksGenerator, picture: str = "schrodinger") -> np.ndarray:
    """Matrix of L0* (or L0) acting on row-major vectorized operators."""
    if picture in gen._super:
        return gen._super[picture]
    d = gen.dim
    f = generator_schrodinger if picture == "schrodinger" else generator_heisenberg
    m = np.zeros((d * d, d * d), dtype=complex)
    for idx in range(d * d):
        e = np.zeros(d * d, dtype=complex)
        e[idx] = 1.0
        m[:, idx] = f(gen, e.reshape(d, d)).ravel()
    gen._super[picture] = m
    return m


def langevin_coefficients(gen: GksGenerator, X) -> dict:
    """Noise coefficients of the Heisenberg flow.

    Returns
    -------
    dict
        ``L0``: ``L0(X)``; ``Lplus``/``Lminus``: lists aligned with the
        ``(channel, j)`` enumeration holding ``X D_j - D_j X`` and
        ``D_j^+ X - X D_j^+``; ``index``: the matching ``(omega, j)`` labels.
    """
    X = np.asarray(X, dtype=complex)
    if X.shape != (gen.dim, gen.dim):
        raise ValidationError("shape mismatch")
    lp, lm, idx = [], [], []
    for ch in gen.channels:
        for j, dj in enumerate(ch.operators):
            lp.append(X @ dj - dj @ X)
            djh = dj.conj().T
            lm.append(djh @ X - X @ djh)
            idx.append((ch.omega, j))
    return {"L0": generator_heisenberg(gen, X), "Lplus": lp, "Lminus": lm, "index": idx}


@dataclass
class Trajectory:
    """Sampled operator trajectory.

    Attributes
    ----------
    times : ndarray
    states : ndarray
        Shape ``(n, d, d)``.
    picture : str
        ``"schrodinger"`` for states, ``"heisenberg"`` for observables.
    min_eigenvalue : float
        Smallest eigenvalue seen along a state trajectory.
    """

    times: np.ndarray
    states: np.ndarray
    picture: str = "schrodinger"
    min_eigenvalue: float = float("nan")
    meta: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def traces(self) -> np.ndarray:
        return np.trace(self.states, axis1=1, axis2=2)

    def trace_drift(self) -> float:
        tr = self.traces()
        return float(np.max(np.abs(tr - tr[0])))

    def expectation(self, X) -> np.ndarray:
        return np.einsum("nij,ji->n", self.states, np.asarray(X, dtype=complex))


def _rk4(m: np.ndarray, v0: np.ndarray, t_final: float, dt: float, stride: int,
         hermitize: bool, check_positivity: bool, d: int):
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if not t_final >= 0:
        raise ValidationError("t_final must be nonnegative")
    if stride < 1:
        raise ValidationError("stride must be at least 1")
    n = int(np.floor(t_final / dt + 1e-9))
    steps = [dt] * n
    rest = t_final - n * dt
    if rest > 1e-12 * max(dt, t_final):
        steps.append(rest)
    times, states = [0.0], [v0.reshape(d, d).copy()]
    v, t, lam_min = v0.copy(), 0.0, np.inf
    if check_positivity:
        lam_min = float(np.linalg.eigvalsh(states[0])[0])
    for i, h in enumerate(steps, 1):
        k1 = m @ v
        k2 = m @ (v + 0.5 * h * k1)
        k3 = m @ (v + 0.5 * h * k2)
        k4 = m @ (v + h * k3)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t + h
        s = v.reshape(d, d)
        if hermitize:
            s = (s + s.conj().T) / 2
            v = s.ravel()
        if check_positivity:
            lam = float(np.linalg.eigvalsh(s)[0])
            lam_min = min(lam_min, lam)
            if lam < -1e-6:
                raise PositivityError(
                    f"state lost positivity at t={t:.6g} (eigenvalue {lam:.3e}); "
                    f"reduce dt below {dt / 4:.3g}")
        if i % stride == 0 or i == len(steps):
            times.append(t)
            states.append(s.copy())
    return np.array(times), np.array(states), lam_min


def evolve_master(gen: GksGenerator, s0, t_final: float, dt: float, stride: int = 1) -> Trajectory:
    """Integrate ``ds/dt = L0*(s)`` with classical fourth-order Runge-Kutta.

    The state is Hermitized after every step; the trace is never renormalized,
    so ``Trajectory.trace_drift`` measures the integrator.

    Raises
    ------
    PositivityError
        An eigenvalue dropped below -1e-6.
    """
    s0 = _as_matrix(s0)
    d = gen.dim
    if s0.shape != (d, d):
        raise ValidationError("initial state has the wrong shape")
    m = superoperator(gen, "schrodinger")
    t, s, lam = _rk4(m, s0.ravel(), t_final, dt, stride, True, True, d)
    return Trajectory(t, s, "schrodinger", lam)


def evolve_heisenberg(gen: GksGenerator, X0, t_final: float, dt: float, stride: int = 1) -> Trajectory:
    """Integrate ``dX/dt = L0(X)`` with classical fourth-order Runge-Kutta."""
    X0 = np.asarray(X0, dtype=complex)
    d = gen.dim
    if X0.shape != (d, d):
        raise ValidationError("initial observable has the wrong shape")
    m = superoperator(gen, "heisenberg")
    t, s, _ = _rk4(m, X0.ravel(), t_final, dt, stride, False, False, d)
    return Trajectory(t, s, "heisenberg")


def stationary_state(gen: GksGenerator, rank_tol: float = 1e-10) -> np.ndarray:
    """Stationary state of the master equation.

    Solves ``L0*(s) = 0`` with ``tr s = 1`` on the vectorized space (dense
    least squares for ``d <= 16``, inverse iteration above).  A
    :class:`MultiplicityWarning` is emitted when the kernel is degenerate.
    """
    d = gen.dim
    m = superoperator(gen, "schrodinger")
    sv = linalg.svdvals(m)
    kernel = int(np.sum(sv <= rank_tol * max(sv[0], 1e-300)))
    if kernel > 1:
        warnings.warn(f"stationary state not unique: kernel dimension {kernel}",
                      MultiplicityWarning, stacklevel=2)
    tr = np.eye(d).ravel()
    if d <= 16:
        a = np.vstack([m, tr[None, :]])
        b = np.zeros(d * d + 1, dtype=complex)
        b[-1] = 1.0
        v = linalg.lstsq(a, b)[0]
    else:
        shift = 1e-9 * max(sv[0], 1.0)
        lu = linalg.lu_factor(m - shift * np.eye(d * d))
        v = tr / d
        for _ in range(200):
            w = linalg.lu_solve(lu, v)
            w = w / np.dot(tr, w)
            if np.linalg.norm(w - v) < 1e-14 * np.linalg.norm(w):
                v = w
                break
            v = w
    s = v.reshape(d, d)
    s = (s + s.conj().T) / 2
    return s / np.trace(s).real


def stationary_multiplicity(gen: GksGenerator, rank_tol: float = 1e-10) -> int:
    sv = linalg.svdvals(superoperator(gen, "schrodinger"))
    return int(np.sum(sv <= rank_tol * max(sv[0], 1e-300)))


def _check_vectors(gen, *vs):
    out = []
    for v in vs:
        v = np.asarray(v, dtype=complex).ravel()
        if v.shape != (gen.dim,):
            raise ValidationError("state vector has the wrong dimension")
        out.append(v)
    return out


def golden_rule_rates(gen: GksGenerator, phi, psi) -> float:
    """Initial rate of the transition probability ``p_t(psi|phi)``.

    Equal to ``<phi, Theta(|psi><psi|) phi>`` for orthogonal ``phi``, ``psi``.
    """
    phi, psi = _check_vectors(gen, phi, psi)
    if abs(np.vdot(phi, psi)) > 1e-10 * np.linalg.norm(phi) * np.linalg.norm(psi):
        raise ValidationError("golden-rule rates need orthogonal states")
    val = np.vdot(phi, theta_map(gen, np.outer(psi, psi.conj())) @ phi)
    return float(val.real)


@dataclass(frozen=True)
class SurvivalRate:
    """Initial derivative of the survival probability of an eigenstate.

    ``exact`` is ``<phi, L0(|phi><phi|) phi>``; ``linewidth`` is
    ``-<phi, Gamma phi>``; the two differ only when a zero-frequency channel
    couples ``phi`` to itself, which ``zero_frequency`` flags.
    """

    exact: float
    linewidth: float
    zero_frequency: bool

    @property
    def discrepancy(self) -> float:
        return self.exact - self.linewidth


def survival_decay_rate(gen: GksGenerator, phi) -> SurvivalRate:
    (phi,) = _check_vectors(gen, phi)
    p = np.outer(phi, phi.conj())
    exact = float(np.vdot(phi, generator_heisenberg(gen, p) @ phi).real)
    lw = -float(np.vdot(phi, gen.gamma @ phi).real)
    flag = gen.has_zero_frequency and abs(exact - lw) > 1e-12 * (1 + abs(lw))
    if flag:
        warnings.warn("zero-frequency channel present: survival rate differs from -<phi,Gamma phi>",
                      ZeroFrequencyWarning, stacklevel=2)
    return SurvivalRate(exact, lw, gen.has_zero_frequency)


def rate_table(gen: GksGenerator, basis) -> np.ndarray:
    """``R[a, b]`` = golden-rule rate from basis state ``a`` into state ``b``."""
    basis = np.asarray(basis, dtype=complex)
    d = basis.shape[1]
    r = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            if a != b:
                r[a, b] = golden_rule_rates(gen, basis[:, a], basis[:, b])
    return r
