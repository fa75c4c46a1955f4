"""Repeated-interaction realization of the limit quantum stochastic equation.

Each time step couples the system to a fresh slice of noise modes in the
vacuum.  The increments

    dB_j = sqrt(dt) * (sum_c Lp[j, c] a_c + sum_c conj(Lm[j, c]) b_c^+)

with ``Lp Lp^+ = full_plus`` and ``Lm Lm^+ = full_minus^T`` reproduce the
quantum Ito table exactly on the slice vacuum; thermal noise is carried by
the second family ``b_c`` instead of a mixed slice state.  Tracing out the
slice after each step gives a Kraus map on the system.  Everything runs in
the interaction picture, like the master equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import AssertionFailure, FactorizationError, ValidationError
from .lindblad import GksGenerator, Trajectory, _as_matrix

CLIP_FLOOR = 1e-10
CLIP_BUDGET = 1e-6


@dataclass
class ChannelFactorization:
    """Noise factorization of one frequency channel.

    Attributes
    ----------
    omega : float
    lplus : ndarray
        ``N x r+`` with ``lplus @ lplus^+ = full_plus``.
    lminus : ndarray
        ``N x r-`` with ``lminus @ lminus^+ = full_minus^T``.
    plus_modes, minus_modes : list of int
        Slice mode indices carrying the two families.
    clipped_mass : float
        Total weight of discarded negative eigenvalues.
    """

    omega: float
    lplus: np.ndarray
    lminus: np.ndarray
    plus_modes: list
    minus_modes: list
    clipped_mass: float = 0.0

    @property
    def thermal(self) -> bool:
        return self.lminus.shape[1] > 0


@dataclass
class SliceSpace:
    """Truncated bosonic slice: ``m`` modes with ``n_max + 1`` levels each.

    Attributes
    ----------
    n_max : int
    annihilators : list of ndarray
        ``a_c`` on the ``(n_max + 1)^m`` dimensional slice.
    factorizations : list of ChannelFactorization
        Aligned with the generator's channels.
    """

    n_max: int
    annihilators: list
    factorizations: list
    mode_labels: list = field(default_factory=list)

    @property
    def modes(self) -> int:
        return len(self.annihilators)

    @property
    def dim(self) -> int:
        return (self.n_max + 1) ** self.modes

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[0] = 1.0
        return v

    def increments(self, dt: float) -> list:
        """``dB_j`` for every channel, as a list of lists of slice matrices."""
        if not dt > 0:
            raise ValidationError("dt must be positive")
        out = []
        for fac in self.factorizations:
            ops = []
            for j in range(fac.lplus.shape[0]):
                b = np.zeros((self.dim, self.dim), dtype=complex)
                for c, mode in enumerate(fac.plus_modes):
                    b += fac.lplus[j, c] * self.annihilators[mode]
                for c, mode in enumerate(fac.minus_modes):
                    b += np.conj(fac.lminus[j, c]) * self.annihilators[mode].conj().T
                ops.append(np.sqrt(dt) * b)
            out.append(ops)
        return out


def ladder(n_max: int) -> np.ndarray:
    """Truncated annihilator ``sum sqrt(n) |n-1><n|``."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def _psd_factor(m: np.ndarray, what: str):
    m = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(m)
    scale = max(float(np.max(np.abs(w))) if w.size else 0.0, 1e-300)
    clipped = float(-np.sum(w[w < 0]))
    tr = float(np.sum(np.abs(w)))
    if clipped > CLIP_BUDGET * max(tr, 1e-300) and clipped > CLIP_FLOOR:
        raise FactorizationError(f"{what} has negative weight {clipped:.3e} (trace {tr:.3e})")
    keep = w > CLIP_FLOOR * scale
    return v[:, keep] * np.sqrt(w[keep]), clipped


def build_slice(channels, grams, n_max: int = 1) -> SliceSpace:
    """Factorize every channel's full-line Gram matrices and allocate slice modes.

    Raises
    ------
    FactorizationError
        A Gram matrix is negative beyond the clipping budget.
    """
    if n_max < 1:
        raise ValidationError("n_max must be at least 1")
    facs, labels, mode = [], [], 0
    for ch, g in zip(channels, grams):
        lp, cp = _psd_factor(np.asarray(g.full_plus, complex), f"full_plus at omega={ch.omega}")
        lm, cm = _psd_factor(np.asarray(g.full_minus, complex).T, f"full_minus at omega={ch.omega}")
        plus = list(range(mode, mode + lp.shape[1]))
        mode += lp.shape[1]
        minus = list(range(mode, mode + lm.shape[1]))
        mode += lm.shape[1]
        labels += [(ch.omega, "plus", c) for c in range(len(plus))]
        labels += [(ch.omega, "minus", c) for c in range(len(minus))]
        facs.append(ChannelFactorization(ch.omega, lp, lm, plus, minus, cp + cm))
    if (n_max + 1) ** mode > 4096:
        raise ValidationError(f"slice of {mode} modes at n_max={n_max} is too large")
    a = ladder(n_max)
    eye = np.eye(n_max + 1)
    ann = []
    for c in range(mode):
        op = np.ones((1, 1), dtype=complex)
        for k in range(mode):
            op = np.kron(op, a if k == c else eye)
        ann.append(op)
    return SliceSpace(n_max, ann, facs, labels)


def build_slice_for(gen: GksGenerator, n_max: int = 1) -> SliceSpace:
    return build_slice(gen.channels, gen.grams, n_max)


@dataclass
class ItoReport:
    """Largest deviations of the slice-vacuum Ito identities."""

    dt: float
    max_deviation: float
    entries: dict

    @property
    def passed(self) -> bool:
        return self.max_deviation <= 1e-12


def ito_table_check(sl: SliceSpace, grams, dt: float, tol: float = 1e-12,
                    raise_on_failure: bool = True) -> ItoReport:
    """Verify the Ito table on slice-vacuum expectations.

    Checks ``<dB_j dB_k^+> = full_plus[j,k] dt``, ``<dB_j^+ dB_k> = full_minus[k,j] dt``,
    vanishing ``<dB dB>`` and ``<dB^+ dB^+>``, vanishing products between
    different frequencies and vanishing commutators across frequencies.
    Deviations are divided by ``dt``.
    """
    inc = sl.increments(dt)
    vac = sl.vacuum()

    def ev(m):
        return complex(vac.conj() @ m @ vac)

    entries, worst = {}, 0.0
    for a, (ga, ba) in enumerate(zip(grams, inc)):
        for b, (gb, bb) in enumerate(zip(grams, inc)):
            for j, x in enumerate(ba):
                for k, y in enumerate(bb):
                    same = a == b
                    pp = ev(x @ y.conj().T) - (ga.full_plus[j, k] * dt if same else 0)
                    mm = ev(x.conj().T @ y) - (ga.full_minus[k, j] * dt if same else 0)
                    dev = {"dB dB+": abs(pp), "dB+ dB": abs(mm),
                           "dB dB": abs(ev(x @ y)), "dB+ dB+": abs(ev(x.conj().T @ y.conj().T))}
                    if not same:
                        dev["[dB, dB']"] = float(np.max(np.abs(x @ y - y @ x)))
                        dev["[dB, dB'+]"] = float(np.max(np.abs(x @ y.conj().T - y.conj().T @ x)))
                    for name, v in dev.items():
                        v = v / dt
                        key = (ga.omega, gb.omega, j, k, name)
                        entries[key] = v
                        worst = max(worst, v)
    rep = ItoReport(dt, worst, entries)
    if raise_on_failure and worst > tol:
        bad = max(entries, key=entries.get)
        raise AssertionFailure(f"Ito identity {bad[4]} violated for omega={bad[0]}, {bad[1]}, "
                               f"pair ({bad[2]}, {bad[3]}): {entries[bad]:.3e}", entries)
    return rep


def slice_propagator(sl: SliceSpace, gen: GksGenerator, dt: float, stepper: str = "euler-ito",
                     drop_drift: bool = False) -> np.ndarray:
    """Propagator on system (x) slice for one step.

    ``euler-ito``:    ``1 + X - Y dt (x) 1``
    ``exponential``:  ``expm(X - i H' dt / hbar (x) 1)``

    with ``X = sum D_j (x) dB_j^+ - D_j^+ (x) dB_j`` (anti-Hermitian) and
    ``H'`` the Lamb shift.  ``drop_drift`` removes the drift term, which
    exposes its fluctuation-dissipation role.
    """
    d, n = gen.dim, sl.dim
    if not dt > 0:
        raise ValidationError("dt must be positive")
    ynorm = np.linalg.norm(gen.drift, 2)
    if dt * ynorm > 0.1:
        raise ValidationError(f"dt * ||Y|| = {dt * ynorm:.3g} exceeds 0.1; reduce dt")
    x = np.zeros((d * n, d * n), dtype=complex)
    for ch, ops in zip(gen.channels, sl.increments(dt)):
        for D, dB in zip(ch.operators, ops):
            x += np.kron(D, dB.conj().T) - np.kron(D.conj().T, dB)
    eye_s = np.eye(n)
    if stepper == "euler-ito":
        u = np.eye(d * n, dtype=complex) + x
        if not drop_drift:
            u -= np.kron(gen.drift * dt, eye_s)
        return u
    if stepper == "exponential":
        a = x
        if not drop_drift:
            a = a - 1j * dt / gen.hbar * np.kron(gen.lamb_shift, eye_s)
        return linalg.expm(a)
    raise ValidationError(f"unknown stepper {stepper!r}")


def kraus_operators(sl: SliceSpace, gen: GksGenerator, dt: float, stepper: str = "euler-ito",
                    drop_drift: bool = False) -> np.ndarray:
    """``K_n = <n| U |vac>`` for every slice basis state, shape ``(dim_slice, d, d)``."""
    u = slice_propagator(sl, gen, dt, stepper, drop_drift)
    d, n = gen.dim, sl.dim
    # rows (i, slice_out), columns (k, slice_in=0)
    u4 = u.reshape(d, n, d, n)[:, :, :, 0]
    return np.transpose(u4, (1, 0, 2))


def unitarity_defect(sl: SliceSpace, gen: GksGenerator, dt: float, stepper: str = "euler-ito",
                     space: str = "isometry", drop_drift: bool = False) -> float:
    """Frobenius norm of ``U^+ U - 1``.

    ``space="full"`` uses the whole system (x) slice space; ``"isometry"``
    restricts the input to the slice vacuum, ``sum K_n^+ K_n - 1``, which
    is the part a repeated-interaction step ever uses.
    """
    if space == "full":
        u = slice_propagator(sl, gen, dt, stepper, drop_drift)
        return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))
    if space == "isometry":
        k = kraus_operators(sl, gen, dt, stepper, drop_drift)
        s = np.einsum("nji,njk->ik", k.conj(), k)
        return float(np.linalg.norm(s - np.eye(gen.dim)))
    raise ValidationError(f"unknown space {space!r}")


def _apply(k: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.einsum("nij,jk,nlk->il", k, s, k.conj())


def _apply_dual(k: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.einsum("nji,jk,nkl->il", k.conj(), x, k)


def _schedule(t_final: float, dt: float):
    if not t_final >= 0:
        raise ValidationError("t_final must be nonnegative")
    n = int(np.floor(t_final / dt + 1e-9))
    rest = t_final - n * dt
    return n, (rest if rest > 1e-12 * max(dt, t_final) else 0.0)


def step_reduced(sl: SliceSpace, gen: GksGenerator, s, dt: float,
                 stepper: str = "euler-ito") -> np.ndarray:
    """One repeated-interaction step ``s -> tr_slice[U (s (x) |vac><vac|) U^+]``."""
    s = _as_matrix(s)
    return _apply(kraus_operators(sl, gen, dt, stepper), s)


def evolve_reduced(sl: SliceSpace, gen: GksGenerator, s0, t_final: float, dt: float,
                   stepper: str = "euler-ito", stride: int = 1) -> Trajectory:
    """Compose repeated-interaction steps with a fresh slice vacuum each time.

    ``meta`` records the largest per-step trace change and the stepper.
    """
    s = _as_matrix(s0)
    if s.shape != (gen.dim, gen.dim):
        raise ValidationError("initial state has the wrong shape")
    if stride < 1:
        raise ValidationError("stride must be at least 1")
    n, rest = _schedule(t_final, dt)
    k = kraus_operators(sl, gen, dt, stepper)
    times, states = [0.0], [s.copy()]
    worst, t = 0.0, 0.0
    steps = [(k, dt)] * n + ([(kraus_operators(sl, gen, rest, stepper), rest)] if rest else [])
    for i, (kk, h) in enumerate(steps, 1):
        s_new = _apply(kk, s)
        s_new = (s_new + s_new.conj().T) / 2
        worst = max(worst, abs(np.trace(s_new) - np.trace(s)))
        s, t = s_new, t + h
        if i % stride == 0 or i == len(steps):
            times.append(t)
            states.append(s.copy())
    states = np.array(states)
    lam = float(min(np.linalg.eigvalsh(x)[0] for x in states))
    return Trajectory(np.array(times), states, "schrodinger", lam,
                      {"stepper": stepper, "dt": dt, "max_step_trace_defect": float(worst),
                       "frame": "interaction"})


def evolve_reduced_heisenberg(sl: SliceSpace, gen: GksGenerator, X0, t_final: float, dt: float,
                              stepper: str = "euler-ito", stride: int = 1) -> Trajectory:
    """Dual flow ``X -> sum K_n^+ X K_n`` so that ``tr(s_t X) = tr(s_0 X_t)``."""
    x = np.asarray(X0, dtype=complex)
    if x.shape != (gen.dim, gen.dim):
        raise ValidationError("observable has the wrong shape")
    n, rest = _schedule(t_final, dt)
    k = kraus_operators(sl, gen, dt, stepper)
    steps = [(k, dt)] * n + ([(kraus_operators(sl, gen, rest, stepper), rest)] if rest else [])
    times, ops, t = [0.0], [x.copy()], 0.0
    for i, (kk, h) in enumerate(steps, 1):
        x, t = _apply_dual(kk, x), t + h
        if i % stride == 0 or i == len(steps):
            times.append(t)
            ops.append(x.copy())
    return Trajectory(np.array(times), np.array(ops), "heisenberg", meta={"stepper": stepper, "dt": dt})


def effective_rotation(gen: GksGenerator, traj: Trajectory, direction: str = "to-schrodinger",
                       hamiltonian=None) -> Trajectory:
    """Conjugate each state by ``exp(-+ i t H_S / hbar)``.

    ``to-schrodinger`` maps interaction-picture states ``s`` to
    ``exp(-itH/hbar) s exp(itH/hbar)``; ``to-interaction`` undoes it.
    """
    h = gen.hamiltonian if hamiltonian is None else np.asarray(hamiltonian, complex)
    if h is None:
        raise ValidationError("effective rotation needs the system hamiltonian")
    if direction not in ("to-schrodinger", "to-interaction"):
        raise ValidationError(f"unknown direction {direction!r}")
    sgn = -1.0 if direction == "to-schrodinger" else 1.0
    e, v = np.linalg.eigh(h)
    out = np.empty_like(traj.states)
    for i, t in enumerate(traj.times):
        u = (v * np.exp(sgn * 1j * t * e / gen.hbar)) @ v.conj().T
        out[i] = u @ traj.states[i] @ u.conj().T
    meta = dict(traj.meta)
    meta["frame"] = "schrodinger" if direction == "to-schrodinger" else "interaction"
    return Trajectory(traj.times.copy(), out, traj.picture, traj.min_eigenvalue, meta)


def master_reference(gen: GksGenerator, s0, times) -> np.ndarray:
    """Exact master-equation states ``expm(t L0*) s0`` at the given times."""
    from .lindblad import superoperator

    s0 = _as_matrix(s0)
    m = superoperator(gen, "schrodinger")
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times),) + s0.shape, dtype=complex)
    if len(times) > 1 and np.allclose(np.diff(times), times[1] - times[0], rtol=1e-9, atol=0):
        step = linalg.expm((times[1] - times[0]) * m)
        v = linalg.expm(times[0] * m) @ s0.ravel()
        for i in range(len(times)):
            out[i] = v.reshape(s0.shape)
            v = step @ v
        return out
    for i, t in enumerate(times):
        out[i] = (linalg.expm(t * m) @ s0.ravel()).reshape(s0.shape)
    return out


def trajectory_deviation(traj: Trajectory, reference: np.ndarray) -> float:
    """Largest Frobenius distance between a trajectory and reference states."""
    return float(np.max(np.linalg.norm(traj.states - reference, axis=(1, 2))))
