"""Limit generator: drift, dissipator, master and Heisenberg flows, golden rule."""
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg

from models import SX, random_model, three_level, two_level
from stoclim import (DensityMatrix, PositivityError, Reservoir, SystemSpec, ValidationError,
                     assemble_drift, build_open_system, evolve_heisenberg, evolve_master,
                     generator_heisenberg, generator_schrodinger, golden_rule_rates,
                     langevin_coefficients, preset_density, rate_table, stationary_state,
                     superoperator, survival_decay_rate, theta_map, vacuum_covariance)
from stoclim.lindblad import MultiplicityWarning, ZeroFrequencyWarning

E = np.diag([0.0, 1.0]).astype(complex)
G = np.diag([1.0, 0.0]).astype(complex)


def rand_op(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def rand_state(rng, d):
    a = rand_op(rng, d)
    s = a @ a.conj().T
    return s / np.trace(s)


def exact_master(gen, s0, t):
    d = gen.dim
    return (linalg.expm(superoperator(gen) * t) @ np.asarray(s0, complex).ravel()).reshape(d, d)


def test_two_level_drift_structure():
    m = two_level(None)
    up = m.channel_at(1.0)[1].half_plus[0, 0]
    down = m.channel_at(-1.0)[1].half_plus[0, 0]
    assert np.allclose(m.generator.drift, np.diag([down, up]), atol=1e-15)
    gamma_e = 2 * up.real
    assert m.generator.gamma[1, 1].real == pytest.approx(gamma_e)
    # H' = (hbar/2i)(Y - Y^+) reads off the imaginary part of the drift
    assert m.generator.lamb_shift[1, 1].real == pytest.approx(up.imag)
    assert gamma_e == pytest.approx(2 * np.pi * 0.05 * np.exp(-0.2))


def test_vacuum_drift_has_no_minus_term():
    m = two_level(None)
    for g in m.grams:
        assert np.all(g.half_minus == 0)


def test_assemble_drift_validation():
    m = two_level(None)
    with pytest.raises(ValidationError):
        assemble_drift(m.channels, m.grams[:1])
    with pytest.raises(ValidationError):
        assemble_drift(m.channels, m.grams[::-1])
    empty = assemble_drift([], [], np.diag([0.0, 1.0]))
    assert np.all(empty.drift == 0)


@pytest.mark.parametrize("make,beta", [(two_level, None), (two_level, 2.0), (three_level, 1.0)])
def test_invariants(make, beta):
    gen = make(beta).generator
    r = gen.invariant_residuals()
    assert r["unit_preservation"] <= 1e-10
    assert r["drift_commutator"] <= 1e-9
    assert r["reconstruction"] <= 1e-14
    assert r["gamma_min_eigenvalue"] >= -1e-12
    assert np.allclose(theta_map(gen, np.eye(gen.dim)), gen.gamma, atol=1e-10)


def test_theta_properties():
    rng = np.random.default_rng(0)
    gen = three_level(1.0).generator
    assert np.all(theta_map(gen, np.zeros((3, 3))) == 0)
    for _ in range(5):
        x = rand_op(rng, 3)
        assert np.allclose(theta_map(gen, x).conj().T, theta_map(gen, x.conj().T), atol=1e-14)
        t = theta_map(gen, x.conj().T @ x)
        assert np.min(np.linalg.eigvalsh((t + t.conj().T) / 2)) >= -1e-12
    with pytest.raises(ValidationError):
        theta_map(gen, np.eye(2))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_duality_on_random_models(seed, thermal):
    rng = np.random.default_rng(seed)
    gen = random_model(rng, thermal).generator
    d = gen.dim
    s, x = rand_state(rng, d), rand_op(rng, d)
    lhs = np.trace(s @ generator_heisenberg(gen, x))
    rhs = np.trace(generator_schrodinger(gen, s) @ x)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))
    ls = generator_schrodinger(gen, s)
    assert abs(np.trace(ls)) <= 1e-12 * (1 + np.linalg.norm(ls))
    y = rand_op(rng, d)
    assert np.allclose(generator_schrodinger(gen, y).conj().T, generator_schrodinger(gen, y.conj().T),
                       atol=1e-12)
    assert np.allclose(generator_heisenberg(gen, x.conj().T), generator_heisenberg(gen, x).conj().T,
                       atol=1e-12)


def test_excited_projector_decays():
    gen = two_level(None).generator
    ge = gen.gamma[1, 1].real
    assert np.allclose(generator_heisenberg(gen, E), -ge * E, atol=1e-15)


def test_thermal_flow_towards_gibbs():
    gen = two_level(1.0).generator
    flow = generator_schrodinger(gen, DensityMatrix.maximally_mixed(2))
    assert flow[1, 1].real < 0 < flow[0, 0].real


def test_master_zero_coupling_is_static():
    spec = SystemSpec(np.diag([0.0, 1.0]), (np.zeros((2, 2)),), ("b",))
    m = build_open_system(spec, Reservoir({"b": preset_density("zero", {})}), vacuum_covariance())
    s0 = np.array([[0.3, 0.2j], [-0.2j, 0.7]])
    tr = evolve_master(m.generator, s0, 5.0, 0.1)
    assert np.all(tr.states == s0)


def test_master_exponential_decay():
    gen = two_level(None).generator
    ge = gen.gamma[1, 1].real
    tr = evolve_master(gen, E, 1 / ge, 1e-3 / ge, stride=1000)
    assert abs(tr.final[1, 1].real - np.exp(-1.0)) <= 1e-8
    assert tr.min_eigenvalue >= -1e-12


def test_rk4_fourth_order():
    gen = three_level(1.0).generator
    s0 = DensityMatrix.pure([1, 1, 1]).matrix
    t = 4.0
    ref = exact_master(gen, s0, t)
    errs = [np.max(np.abs(evolve_master(gen, s0, t, dt).final - ref)) for dt in (0.4, 0.2)]
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.2)


def test_master_validation_and_positivity():
    gen = two_level(None).generator
    with pytest.raises(ValidationError):
        evolve_master(gen, E, 1.0, 0.0)
    with pytest.raises(ValidationError):
        evolve_master(gen, np.eye(3) / 3, 1.0, 0.1)
    with pytest.raises(PositivityError, match="reduce dt"):
        evolve_master(gen, E, 200.0, 40.0)


def test_heisenberg_flow():
    rng = np.random.default_rng(2)
    m = three_level(1.0)
    gen = m.generator
    tr = evolve_heisenberg(gen, np.eye(3), 3.0, 0.05)
    assert np.max(np.abs(tr.states - np.eye(3))) <= 1e-12
    x0 = rand_op(rng, 3)
    s0 = rand_state(rng, 3)
    xt = evolve_heisenberg(gen, x0, 3.0, 0.01).final
    st_ = evolve_master(gen, s0, 3.0, 0.01).final
    assert abs(np.trace(s0 @ xt) - np.trace(st_ @ x0)) <= 1e-8


def test_heisenberg_energy_relaxes_to_gibbs_mean():
    m = two_level(1.0)
    gen = m.generator
    ge = gen.gamma[1, 1].real
    h = m.spec.hamiltonian
    xt = evolve_heisenberg(gen, h, 40 / ge, 0.05 / ge, stride=100).final
    gibbs = np.exp(-1.0) / (1 + np.exp(-1.0))
    for s0 in (E, G, np.eye(2) / 2):
        assert np.trace(s0 @ xt).real == pytest.approx(gibbs, abs=1e-8)


def test_langevin_coefficients():
    rng = np.random.default_rng(3)
    gen = three_level(1.0).generator
    c = langevin_coefficients(gen, np.eye(3))
    assert np.linalg.norm(c["L0"]) <= 1e-10
    assert all(np.all(v == 0) for v in c["Lplus"] + c["Lminus"])
    x = rand_op(rng, 3)
    cx, cxh = langevin_coefficients(gen, x), langevin_coefficients(gen, x.conj().T)
    for i, (w, j) in enumerate(cx["index"]):
        # the minus coefficient is the adjoint of the plus coefficient of the adjoint
        assert np.allclose(cx["Lminus"][i], cxh["Lplus"][i].conj().T, atol=1e-14)
        ch = next(ch for ch in gen.channels if ch.omega == w)
        own = langevin_coefficients(gen, ch.operators[j])["Lplus"][i]
        assert np.all(own == 0)
    with pytest.raises(ValidationError):
        langevin_coefficients(gen, np.eye(2))


def test_stationary_states():
    beta = 1.3
    s = stationary_state(two_level(beta).generator)
    assert s[1, 1].real / s[0, 0].real == pytest.approx(np.exp(-beta), rel=1e-6)
    assert np.allclose(stationary_state(two_level(None).generator), G, atol=1e-10)
    rng = np.random.default_rng(8)
    for _ in range(3):
        gen = random_model(rng, True).generator
        s = stationary_state(gen)
        assert np.linalg.norm(generator_schrodinger(gen, s)) <= 1e-10


def test_stationary_multiplicity_warning():
    spec = SystemSpec(np.diag([0.0, 1.0, 2.0]), (np.diag([0.0, 1.0, 0.0]),), ("b",))
    m = build_open_system(spec, Reservoir({"b": preset_density("flat", {"kappa": 0.2})}),
                          vacuum_covariance())
    with pytest.warns(MultiplicityWarning):
        stationary_state(m.generator)


def test_golden_rule():
    m = two_level(None)
    e, g = m.eig.basis[:, 1], m.eig.basis[:, 0]
    assert golden_rule_rates(m.generator, e, g) == pytest.approx(2 * np.pi * 0.05 * np.exp(-0.2))
    assert golden_rule_rates(m.generator, g, e) == 0.0
    t = two_level(0.9)
    up = golden_rule_rates(t.generator, g, e)
    down = golden_rule_rates(t.generator, e, g)
    assert up / down == pytest.approx(np.exp(-0.9))
    with pytest.raises(ValidationError):
        golden_rule_rates(m.generator, e, e)


def test_survival_rate_and_balance():
    for m in (two_level(None), three_level(2.0)):
        rates = rate_table(m.generator, m.eig.basis)
        assert np.all(rates >= -1e-10)
        for a in range(m.dim):
            sr = survival_decay_rate(m.generator, m.eig.basis[:, a])
            assert sr.exact == pytest.approx(sr.linewidth, abs=1e-14)
            assert abs(sr.exact + rates[a].sum()) <= 1e-10


def test_survival_rate_with_dephasing_channel():
    sz = np.diag([1.0, -1.0])
    spec = SystemSpec(np.diag([0.0, 1.0]), (SX, sz), ("b", "z"))
    res = Reservoir({"b": preset_density("ohmic", {"alpha": 0.05, "cutoff": 5.0}),
                     "z": preset_density("flat", {"kappa": 0.1})})
    gen = build_open_system(spec, res, vacuum_covariance()).generator
    phi = np.array([0, 1], dtype=complex)
    with pytest.warns(ZeroFrequencyWarning):
        sr = survival_decay_rate(gen, phi)
    p = np.outer(phi, phi)
    assert sr.discrepancy == pytest.approx(np.vdot(phi, theta_map(gen, p) @ phi).real)
    assert sr.discrepancy == pytest.approx(0.1)


def test_density_matrix_validation():
    DensityMatrix(np.eye(2) / 2)
    with pytest.raises(ValidationError, match="Hermitian"):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ValidationError, match="trace"):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValidationError, match="negative"):
        DensityMatrix(np.diag([1.5, -0.5]))
    assert np.allclose(DensityMatrix.pure([1, 1j]).matrix, [[0.5, -0.5j], [0.5j, 0.5]])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        DensityMatrix.maximally_mixed(4)
