"""Eigen-decomposition, Bohr-frequency channels and degeneracy labels."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stoclim import (SystemSpec, ValidationError, build_channels, check_harmonic,
                     classify_brute_force, classify_degeneracies, diagonalize, frequency_decompose,
                     hydrogen_degeneracy_search, hydrogen_search_exact, transition_operators)
from stoclim.spectral import EXTRANEOUS, SECULAR_DIAGONAL, SECULAR_SELF

SX = np.array([[0, 1], [1, 0]], dtype=complex)


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def test_diagonal_hamiltonian_keeps_identity_basis():
    eig = diagonalize(np.diag([0.0, 1.0]))
    assert np.allclose(eig.energies, [0, 1])
    assert np.allclose(eig.basis, np.eye(2))


def test_sigma_x_basis_and_phase_convention():
    eig = diagonalize(SX)
    assert np.allclose(eig.energies, [-1, 1])
    assert np.allclose(eig.basis[:, 0], np.array([1, -1]) / np.sqrt(2))
    assert np.allclose(eig.basis[:, 1], np.array([1, 1]) / np.sqrt(2))


def test_random_hermitian_is_diagonalized():
    rng = np.random.default_rng(1)
    h = random_hermitian(rng, 5)
    eig = diagonalize(h)
    b = eig.basis
    off = b.conj().T @ h @ b - np.diag(eig.energies)
    assert np.max(np.abs(off)) <= 1e-10
    assert np.allclose(b.conj().T @ b, np.eye(5), atol=1e-12)
    assert np.all(np.diff(eig.energies) >= 0)


def test_diagonalize_is_deterministic():
    rng = np.random.default_rng(2)
    h = random_hermitian(rng, 4)
    a, b = diagonalize(h), diagonalize(h.copy())
    assert np.array_equal(a.energies, b.energies)
    assert np.array_equal(a.basis, b.basis)


def test_non_hermitian_rejected():
    with pytest.raises(ValidationError, match="Hermitian"):
        SystemSpec(np.array([[0, 1], [0, 0]]))


def test_spec_validation():
    with pytest.raises(ValidationError):
        SystemSpec(np.eye(1))
    with pytest.raises(ValidationError):
        SystemSpec(np.eye(2), (np.eye(3),), ("b",))
    with pytest.raises(ValidationError):
        SystemSpec(np.eye(2), (np.eye(2),), ())
    with pytest.raises(ValidationError):
        SystemSpec(np.eye(2), hbar=0.0)


def test_two_level_channels():
    w0 = 1.7
    eig = diagonalize(np.diag([0.0, w0]))
    chans = frequency_decompose(None, eig, SX, "b")
    assert [c.omega for c in chans] == pytest.approx([-w0, w0])
    lower = np.array([[0, 1], [0, 0]])
    assert np.allclose(chans[1].operators[0], lower)
    assert np.allclose(chans[0].operators[0], lower.T)
    assert chans[1].density_refs == ("b",)


def test_commuting_operator_gives_zero_channel():
    h = np.diag([0.0, 1.0, 2.5])
    chans = frequency_decompose(None, diagonalize(h), h)
    assert len(chans) == 1 and chans[0].omega == 0.0
    assert np.allclose(chans[0].operators[0], h)


def test_equally_spaced_ladder():
    eig = diagonalize(np.diag([0.0, 1.0, 2.0, 3.0]))
    ladder = np.diag(np.ones(3), 1)
    chans = frequency_decompose(None, eig, ladder + ladder.T)
    one = [c for c in chans if c.omega == pytest.approx(1.0)]
    assert len(one) == 1
    assert set(one[0].pair_labels) == {(0, 1), (1, 2), (2, 3)}


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1), st.booleans())
def test_decomposition_reconstructs_and_is_harmonic(d, seed, degenerate):
    rng = np.random.default_rng(seed)
    if degenerate:
        u = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))[0]
        h = u @ np.diag(rng.integers(0, 3, size=d).astype(float)) @ u.conj().T
    else:
        h = random_hermitian(rng, d)
    dt = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    eig = diagonalize(h)
    chans = frequency_decompose(None, eig, dt)
    total = sum(c.operators[0] for c in chans)
    assert np.linalg.norm(total - dt) <= 1e-12 * (1 + np.linalg.norm(dt)) * d
    for c in chans:
        assert check_harmonic(c.operators[0], h, c.omega) <= 1e-9
    ws = [c.omega for c in chans]
    assert ws == sorted(ws)


def test_hermitian_pairing():
    rng = np.random.default_rng(3)
    h, x = random_hermitian(rng, 4), random_hermitian(rng, 4)
    chans = {c.omega: c.operators[0] for c in frequency_decompose(None, diagonalize(h), x)}
    for w, dw in chans.items():
        partner = min(chans, key=lambda v: abs(v + w))
        assert abs(partner + w) <= 1e-9 * (1 + abs(w))
        assert np.allclose(chans[partner], dw.conj().T, atol=1e-12)


def test_build_channels_merges_couplings():
    h = np.diag([0.0, 1.0])
    sz = np.diag([1.0, -1.0])
    spec = SystemSpec(h, (SX, 0.5 * SX, sz), ("a", "b", "c"))
    chans = build_channels(spec)
    by = {round(c.omega, 9): c for c in chans}
    assert by[1.0].density_refs == ("a", "b")
    assert np.allclose(by[1.0].operators[1], 0.5 * by[1.0].operators[0])
    assert by[0.0].density_refs == ("c",)


def test_transition_operators():
    eig = diagonalize(np.diag([0.0, 1.0]))
    assert np.allclose(transition_operators(eig, 0, 1), [[0, 1], [0, 0]])
    assert np.allclose(transition_operators(eig, 1, 1), np.diag([0, 1]))
    with pytest.raises(IndexError):
        transition_operators(eig, 0, 2)


def test_transition_operator_commutator():
    rng = np.random.default_rng(4)
    h = random_hermitian(rng, 4)
    eig = diagonalize(h)
    for p in range(4):
        for pp in range(4):
            t = transition_operators(eig, p, pp)
            w = eig.energies[pp] - eig.energies[p]
            assert np.allclose(t @ h - h @ t, w * t, atol=1e-10)
            assert np.allclose(t.conj().T @ t, transition_operators(eig, pp, pp), atol=1e-12)


def test_check_harmonic_values():
    h = np.diag([0.0, 2.0])
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    assert check_harmonic(lower, h, 2.0) == 0.0
    assert check_harmonic(lower, h, 0.0) == pytest.approx(2.0 / 2.0)
    with pytest.raises(ValidationError):
        check_harmonic(lower, np.eye(3), 1.0)


def test_two_level_classes():
    rep = classify_degeneracies(diagonalize(np.diag([0.0, 1.0])))
    labels = rep.labels()
    assert labels[(0, 0)] == labels[(1, 1)] == SECULAR_DIAGONAL
    assert labels[(0, 1)] == labels[(1, 0)] == SECULAR_SELF
    assert len(rep.classes) == 3


def test_equally_spaced_pairs_extraneous():
    labels = classify_degeneracies(diagonalize(np.diag([0.0, 1.0, 2.0, 3.0]))).labels()
    for p in [(0, 1), (1, 2), (2, 3)]:
        assert labels[p] == EXTRANEOUS


def test_degenerate_upper_pairs_extraneous():
    labels = classify_degeneracies(diagonalize(np.diag([0.0, 1.0, 1.0, 3.0]))).labels()
    assert labels[(1, 3)] == labels[(2, 3)] == EXTRANEOUS
    assert classify_degeneracies(diagonalize(np.diag([0.0, 1.0, 1.0, 3.0]))).label_of((1, 3)) == EXTRANEOUS


def test_classifier_matches_enumeration():
    rng = np.random.default_rng(6)
    for _ in range(30):
        d = int(rng.integers(2, 7))
        e = rng.integers(0, 4, size=d).astype(float) if rng.random() < 0.6 else rng.normal(size=d)
        eig = diagonalize(np.diag(e))
        assert classify_degeneracies(eig).labels() == classify_brute_force(eig.energies)


def test_hydrogen_search():
    assert hydrogen_degeneracy_search(3) == []
    hits = hydrogen_degeneracy_search(40)
    assert hits == hydrogen_search_exact(40)
    for n, m, a, b in hits:
        assert (m * m - n * n) * a * a * b * b == (b * b - a * a) * n * n * m * m
        assert n < m and a < b and (n, m) < (a, b)
    for bad in (1, 201, 2.5):
        with pytest.raises(ValidationError):
            hydrogen_degeneracy_search(bad)
