"""Repeated-interaction realization of the limit quantum stochastic equation."""
import numpy as np
import pytest

from models import three_level, two_level
from stoclim import (AssertionFailure, FactorizationError, FrequencyChannel, GramCoefficients,
                     Reservoir, SystemSpec, ValidationError, build_open_system, build_slice,
                     build_slice_for, effective_rotation, evolve_master, evolve_reduced,
                     evolve_reduced_heisenberg, ito_table_check, preset_density, stationary_state,
                     step_reduced, unitarity_defect, vacuum_covariance)
from stoclim.qsde import kraus_operators, master_reference, slice_propagator, trajectory_deviation

E = np.diag([0.0, 1.0]).astype(complex)


def gamma_e(gen):
    return float(gen.gamma[1, 1].real)


def scalar_gram(omega, fp, fm=0.0):
    z = np.zeros((1, 1), dtype=complex)
    return GramCoefficients(omega, z, z, np.array([[fp]], complex), np.array([[fm]], complex),
                            np.zeros((1, 1)), np.zeros((1, 1)))


def test_vacuum_single_channel_slice():
    ch = FrequencyChannel(1.0, (np.eye(2, dtype=complex),), (), ("b",))
    sl = build_slice([ch], [scalar_gram(1.0, 0.49)])
    fac = sl.factorizations[0]
    assert sl.modes == 1 and not fac.thermal
    assert abs(fac.lplus[0, 0]) == pytest.approx(0.7)
    dt = 1e-3
    rep = ito_table_check(sl, [scalar_gram(1.0, 0.49)], dt)
    assert rep.passed
    db = sl.increments(dt)[0][0]
    vac = sl.vacuum()
    assert np.vdot(vac, db @ db.conj().T @ vac) == pytest.approx(0.49 * dt)
    assert np.vdot(vac, db.conj().T @ db @ vac) == 0


def test_thermal_two_level_slice_weights():
    m = two_level(1.0)
    sl = build_slice_for(m.generator)
    assert all(f.thermal for f in sl.factorizations if f.omega > 0)
    _, g = m.channel_at(1.0)
    fac = next(f for f in sl.factorizations if f.omega == pytest.approx(1.0))
    assert abs(fac.lplus[0, 0]) ** 2 == pytest.approx(g.full_plus[0, 0].real)
    assert abs(fac.lminus[0, 0]) ** 2 == pytest.approx(g.full_minus[0, 0].real)
    eps = np.array([1.0])
    rho = preset_density("ohmic", {"alpha": 0.05, "cutoff": 5.0})(eps)[0].real
    n = 1 / np.expm1(1.0)
    assert abs(fac.lplus[0, 0]) == pytest.approx(np.sqrt(2 * np.pi * rho * (1 + n)))
    assert abs(fac.lminus[0, 0]) == pytest.approx(np.sqrt(2 * np.pi * rho * n))
    assert ito_table_check(sl, m.grams, 1e-3).max_deviation * 1e-3 <= 1e-12


def test_factorization_identities_and_failure():
    m = three_level(2.0)
    sl = build_slice_for(m.generator)
    for fac, g in zip(sl.factorizations, m.grams):
        assert np.allclose(fac.lplus @ fac.lplus.conj().T, g.full_plus, atol=1e-9)
        assert np.allclose(fac.lminus @ fac.lminus.conj().T, g.full_minus.T, atol=1e-9)
    ch = FrequencyChannel(1.0, (np.eye(2, dtype=complex),), (), ("b",))
    with pytest.raises(FactorizationError):
        build_slice([ch], [scalar_gram(1.0, -0.5)])
    with pytest.raises(ValidationError):
        build_slice([ch], [scalar_gram(1.0, 1.0)], n_max=0)


def test_ito_check_names_the_failing_entry():
    ch = FrequencyChannel(1.0, (np.eye(2, dtype=complex),), (), ("b",))
    sl = build_slice([ch], [scalar_gram(1.0, 0.49)])
    with pytest.raises(AssertionFailure, match="violated"):
        ito_table_check(sl, [scalar_gram(1.0, 0.5)], 1e-3)


def test_zero_coupling_leaves_state_unchanged():
    spec = SystemSpec(np.diag([0.0, 1.0]), (np.zeros((2, 2)),), ("b",))
    m = build_open_system(spec, Reservoir({"b": preset_density("zero", {})}), vacuum_covariance())
    sl = build_slice_for(m.generator)
    s = np.array([[0.4, 0.1 - 0.2j], [0.1 + 0.2j, 0.6]])
    for stepper in ("euler-ito", "exponential"):
        assert np.allclose(step_reduced(sl, m.generator, s, 0.1, stepper), s, atol=1e-15)


def test_single_step_decay():
    gen = two_level(None).generator
    sl = build_slice_for(gen)
    g = gamma_e(gen)
    errs = []
    for dt in (1e-2 / g, 5e-3 / g):
        pe = step_reduced(sl, gen, E, dt)[1, 1].real
        errs.append(abs(pe - (1 - g * dt)))
    # the remainder is second order
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.3)
    ref = evolve_master(gen, E, 5e-3 / g, 5e-3 / g).final[1, 1].real
    assert abs(step_reduced(sl, gen, E, 5e-3 / g)[1, 1].real - ref) <= 1e-4


def test_unitarity_defects():
    gen = two_level(None).generator
    sl = build_slice_for(gen)
    g = gamma_e(gen)
    assert unitarity_defect(sl, gen, 1e-2 / g, "exponential", "full") <= 1e-12
    dts = (1e-2 / g, 5e-3 / g)
    with_drift = [unitarity_defect(sl, gen, dt, "euler-ito") for dt in dts]
    assert with_drift[0] / with_drift[1] == pytest.approx(4, rel=0.3)
    ablated = [unitarity_defect(sl, gen, dt, "euler-ito", drop_drift=True) for dt in dts]
    assert ablated[0] / ablated[1] == pytest.approx(2, rel=0.3)
    assert ablated[1] > 100 * with_drift[1]
    with pytest.raises(ValidationError):
        unitarity_defect(sl, gen, 1e-3, space="nowhere")


def test_step_size_guard():
    gen = two_level(None).generator
    sl = build_slice_for(gen)
    big = 0.2 / np.linalg.norm(gen.drift, 2)
    with pytest.raises(ValidationError, match="reduce dt"):
        slice_propagator(sl, gen, big)
    with pytest.raises(ValidationError):
        slice_propagator(sl, gen, 1e-3, "leapfrog")


def test_first_order_convergence_to_master():
    gen = two_level(None).generator
    sl = build_slice_for(gen)
    g = gamma_e(gen)
    s0 = np.array([[0.3, 0.4], [0.4, 0.7]], dtype=complex)
    errs = []
    for dt in (8e-3 / g, 4e-3 / g, 2e-3 / g):
        tr = evolve_reduced(sl, gen, s0, 2 / g, dt)
        errs.append(trajectory_deviation(tr, master_reference(gen, s0, tr.times)))
    for a, b in zip(errs, errs[1:]):
        assert 0.4 <= b / a <= 0.65


def test_thermal_long_time_gibbs():
    m = two_level(1.0)
    gen = m.generator
    sl = build_slice_for(gen)
    g = float(np.real(np.trace(gen.gamma))) / 2
    tr = evolve_reduced(sl, gen, E, 8 / g, 1e-3 / g, "exponential", stride=1000)
    s = tr.final
    assert s[1, 1].real / s[0, 0].real == pytest.approx(np.exp(-1.0), rel=1e-3)
    assert tr.meta["max_step_trace_defect"] <= 1e-10
    ref = stationary_state(gen)
    assert np.max(np.abs(s - ref)) <= 1e-3
    # the Euler step loses trace at second order but keeps the population ratio
    eu = evolve_reduced(sl, gen, E, 8 / g, 1e-3 / g, "euler-ito", stride=1000).final
    assert eu[1, 1].real / eu[0, 0].real == pytest.approx(np.exp(-1.0), rel=1e-3)


def test_heisenberg_duality():
    gen = three_level(1.0).generator
    sl = build_slice_for(gen)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    s0 = np.full((3, 3), 1 / 3, dtype=complex)
    for stepper in ("euler-ito", "exponential"):
        st_ = evolve_reduced(sl, gen, s0, 2.0, 0.05, stepper)
        xt = evolve_reduced_heisenberg(sl, gen, sz, 2.0, 0.05, stepper)
        assert np.allclose(st_.expectation(sz), [np.trace(s0 @ x) for x in xt.states], atol=1e-12)


def test_effective_rotation():
    gen = two_level(None).generator
    sl = build_slice_for(gen)
    s0 = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
    tr = evolve_reduced(sl, gen, s0, 3.0, 0.1)
    assert tr.meta["frame"] == "interaction"
    sch = effective_rotation(gen, tr)
    assert sch.meta["frame"] == "schrodinger"
    assert np.allclose(np.diagonal(sch.states, axis1=1, axis2=2), np.diagonal(tr.states, axis1=1, axis2=2))
    phase = sch.states[:, 1, 0] / tr.states[:, 1, 0]
    assert np.allclose(phase, np.exp(-1j * tr.times), atol=1e-12)
    back = effective_rotation(gen, sch, "to-interaction")
    assert np.max(np.abs(back.states - tr.states)) <= 1e-12
    with pytest.raises(ValidationError):
        effective_rotation(gen, tr, "sideways")


def test_kraus_shape_and_cross_frequency_independence():
    m = three_level(None)
    sl = build_slice_for(m.generator)
    k = kraus_operators(sl, m.generator, 1e-3)
    assert k.shape == (sl.dim, 3, 3)
    rep = ito_table_check(sl, m.grams, 1e-3)
    cross = [v for key, v in rep.entries.items() if key[0] != key[1]]
    assert cross and max(cross) * 1e-3 <= 1e-12


def test_reduced_validation():
    gen = two_level(None).generator
    sl = build_slice_for(gen)
    with pytest.raises(ValidationError):
        evolve_reduced(sl, gen, np.eye(3) / 3, 1.0, 0.1)
    with pytest.raises(ValidationError):
        evolve_reduced(sl, gen, E, -1.0, 0.1)
    with pytest.raises(ValidationError):
        sl.increments(0.0)
    spec = SystemSpec(np.diag([0.0, 1.0, 2.0, 3.0]), (np.ones((4, 4)),) * 3, ("a", "b", "c"))
    ohm = preset_density("ohmic", {"alpha": 0.05, "cutoff": 5.0})
    big = build_open_system(spec, Reservoir({"a": ohm, "b": ohm, "c": ohm}), vacuum_covariance())
    with pytest.raises(ValidationError, match="too large"):
        build_slice_for(big.generator, n_max=3)
