"""Independent oracles: time-domain and resolvent integrals, second order, w coefficients."""
import numpy as np
import pytest

from models import two_level
from stoclim import (AssertionFailure, FrequencyChannel, Reservoir, compute_grams,
                     half_line_gram, half_line_time_oracle, preset_density, resolvent_oracle,
                     second_order_oracle, thermal_covariance, traditional_w_coefficients,
                     vacuum_covariance)
from stoclim.oracles import w_identity_check, default_etas, neville

OHM = preset_density("ohmic", {"alpha": 1.0, "cutoff": 5.0})
LOR = preset_density("lorentzian", {"height": 0.3, "center": 1.5, "width": 0.5})
FLAT = preset_density("flat", {"kappa": 0.7})
VAC = vacuum_covariance()


def channel(omega, refs=("b",), ops=None):
    ops = ops or tuple(np.eye(2, dtype=complex) for _ in refs)
    return FrequencyChannel(omega, tuple(ops), (), tuple(refs))


def test_neville_recovers_polynomial():
    x = np.array([1.6, 0.8, 0.4, 0.2, 0.1])
    y = 3.0 - 2.0 * x + 0.5 * x ** 2 - x ** 3
    full, reduced = neville(x, y)
    assert full == pytest.approx(3.0, abs=1e-13)
    assert reduced == pytest.approx(3.0, abs=1e-13)


def test_default_etas_decrease():
    e = default_etas(OHM, VAC, 1.0)
    assert len(e) == 6 and np.all(np.diff(e) < 0) and e[-1] > 0


@pytest.mark.parametrize("density,cov,sign", [
    (OHM, VAC, 1),
    (LOR, VAC, 1),
    (OHM, thermal_covariance(1.0, -0.1, OHM), 1),
    (OHM, thermal_covariance(1.0, -0.1, OHM), -1),
])
def test_time_oracle_matches_gram(density, cov, sign):
    res = Reservoir({"b": density})
    for w in np.random.default_rng(4).uniform(0.3, 4.0, 5):
        gram = half_line_gram(channel(w), res, cov, sign)[0, 0]
        o = half_line_time_oracle(density, cov, w, sign)
        assert abs(o.value - gram) <= 1e-6 + o.error


def test_resolvent_oracle_matches_gram():
    for w in (0.5, 2.0):
        gram = half_line_gram(channel(w), Reservoir({"b": LOR}), VAC)[0, 0]
        o = resolvent_oracle(LOR, VAC, w)
        assert abs(o.value - gram) <= 1e-6 + o.error


def test_flat_and_vacuum_special_cases():
    assert half_line_time_oracle(FLAT, VAC, 0.3).value == pytest.approx(0.35)
    assert half_line_time_oracle(OHM, VAC, 1.0, -1).value == 0
    with pytest.raises(ValueError):
        half_line_time_oracle(OHM, VAC, 1.0, etas=[0.1, 0.2, 0.05])


def test_second_order_oracle():
    m = two_level(None)
    for a in range(2):
        phi = m.eig.basis[:, a]
        o = second_order_oracle(m.channels, m.reservoir, m.cov, phi)
        y = np.vdot(phi, m.generator.drift @ phi)
        assert abs(o.value - y) <= 1e-6 * abs(y)
    d = np.array([[0, 1], [0, 0]], dtype=complex)
    ch = channel(1.0, ops=(d,))
    phi = np.array([0, 1], dtype=complex)
    o = second_order_oracle([ch], Reservoir({"b": FLAT}), VAC, phi)
    assert o.value.real == pytest.approx(0.35 * np.vdot(phi, d.conj().T @ d @ phi).real)
    zero = Reservoir({"b": preset_density("zero", {})})
    assert second_order_oracle([ch], zero, VAC, phi).value == 0


def test_w_coefficients_flat_and_vacuum():
    ch, res = channel(1.0), Reservoir({"b": FLAT})
    w = traditional_w_coefficients(ch, res, VAC)
    assert w.values["w_plus_j1_k0"][0, 0] == pytest.approx(0.35)
    assert w.values["w_plus_j0_k1"][0, 0] == 0
    wo = traditional_w_coefficients(ch, Reservoir({"b": OHM}), VAC)
    assert wo.values["w_plus_j0_k1"][0, 0] == 0


@pytest.mark.parametrize("cov", [VAC, thermal_covariance(1.0, 0.0, OHM)])
def test_w_identities_with_complex_cross_density(cov):
    res = Reservoir({"a": OHM, "b": OHM}, {("a", "b"): OHM.scaled(0.5 * np.exp(0.7j))})
    ch = channel(1.0, ("a", "b"))
    g = compute_grams([ch], res, cov)[0]
    rep = w_identity_check(ch, res, cov, g, tol=1e-6)
    assert max(v["max_deviation"] for v in rep.values()) <= 1e-6


def test_literal_index_order_fails_for_complex_cross_density():
    # conj(h+[j,k]) without the transpose only agrees when the Gram matrix is symmetric
    res = Reservoir({"a": OHM, "b": OHM}, {("a", "b"): OHM.scaled(0.5 * np.exp(0.7j))})
    ch = channel(1.0, ("a", "b"))
    g = compute_grams([ch], res, VAC)[0]
    w = traditional_w_coefficients(ch, res, VAC).values["w_minus_j1_k0"]
    assert np.max(np.abs(w - np.conj(g.half_plus.T))) <= 1e-6
    assert np.max(np.abs(w - np.conj(g.half_plus))) > 1e-2


def test_w_identity_check_reports_failure():
    ch, res = channel(1.0), Reservoir({"b": OHM})
    g = compute_grams([ch], res, VAC)[0]
    g.half_plus = g.half_plus * 1.01
    with pytest.raises(AssertionFailure):
        w_identity_check(ch, res, VAC, g)
