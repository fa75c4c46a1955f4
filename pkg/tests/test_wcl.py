"""Collective two-point functions at finite coupling and their weak-coupling limit."""
import numpy as np
import pytest

from stoclim import (CollectiveQuery, ConvergenceError, ValidationError, collective_two_point,
                     convergence_scan, cross_frequency_overlap, limit_two_point, memory_function,
                     preset_density, thermal_covariance, vacuum_covariance)
from stoclim.wcl import brute_force_two_point, interval_kernel

OHM = preset_density("ohmic", {"alpha": 1.0, "cutoff": 5.0})
FLAT = preset_density("flat", {"kappa": 0.6})
LAMBDAS = [0.5, 0.25, 0.125, 0.0625]


def full_plus(density, omega, cov=None, sign=1):
    w = np.array([omega])
    f = density(w)[0]
    if cov is not None:
        f = f * cov.weight(w, sign)[0]
    return 2 * np.pi * f


def test_interval_kernel_series_and_closed_form():
    x = np.array([0.0, 1e-9, 1e-3, 0.7, -2.0])
    a, b = 0.3, 4.0
    # cancellation-free form of (exp(ixb) - exp(ixa))/(ix)
    exact = np.array([b - a if v == 0 else 2 * np.exp(0.5j * v * (a + b)) * np.sin(0.5 * v * (b - a)) / v
                      for v in x])
    assert np.allclose(interval_kernel(x, a, b), exact, rtol=1e-12, atol=1e-14)


def test_zero_time_gives_zero():
    assert collective_two_point(CollectiveQuery(0.3, 0.0, 1.0, 1.0, OHM)) == 0
    assert collective_two_point(CollectiveQuery(0.3, 1.0, 0.0, 1.0, OHM)) == 0


def test_flat_density_is_exact_at_every_coupling():
    for lam in (0.5, 0.1):
        v = collective_two_point(CollectiveQuery(lam, 1.2, 0.7, 0.4, FLAT))
        assert v == pytest.approx(0.7 * 0.6, rel=1e-9)
    assert limit_two_point(2.0, 3.0, 0.0, FLAT) == pytest.approx(2 * 0.6)


@pytest.mark.parametrize("lam", [0.5, 0.25, 0.125])
def test_brute_force_double_integral(lam):
    t, s, w = 0.5, 1.0, 1.0
    spectral = collective_two_point(CollectiveQuery(lam, t, s, w, OHM))
    brute = brute_force_two_point(lambda tau: memory_function(OHM, w, tau), lam, t, s)
    assert abs(spectral - brute) <= 1e-4 * abs(spectral)


def test_brute_force_general_grid():
    lam, t, s, w = 0.5, 0.5, 0.7, 1.0
    spectral = collective_two_point(CollectiveQuery(lam, t, s, w, OHM))
    brute = brute_force_two_point(lambda tau: memory_function(OHM, w, tau), lam, t, s, n=600)
    assert abs(spectral - brute) <= 1e-3 * abs(spectral)


def test_exchange_symmetry_and_cauchy_schwarz():
    for lam in (0.5, 0.2):
        a = collective_two_point(CollectiveQuery(lam, 0.8, 1.7, 1.3, OHM))
        b = collective_two_point(CollectiveQuery(lam, 1.7, 0.8, 1.3, OHM))
        assert a == pytest.approx(np.conj(b), rel=1e-9)
        tt = collective_two_point(CollectiveQuery(lam, 0.8, 0.8, 1.3, OHM)).real
        ss = collective_two_point(CollectiveQuery(lam, 1.7, 1.7, 1.3, OHM)).real
        assert abs(a) <= np.sqrt(tt * ss) * (1 + 1e-12)


def test_limit_two_point():
    assert limit_two_point(2.0, 3.0, 1.0, OHM) == pytest.approx(2 * full_plus(OHM, 1.0))
    assert limit_two_point(2.0, 3.0, 1.0, OHM, vacuum_covariance(), "creator-first") == 0


def test_vacuum_scan_converges():
    rows = convergence_scan(CollectiveQuery(0.5, 1.0, 1.5, 1.0, OHM), LAMBDAS)
    errs = [r.abs_error for r in rows]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] / abs(full_plus(OHM, 1.0)) <= 0.05
    assert all(r.quad_error <= 1e-6 * abs(r.value) for r in rows)


def test_zero_density_scan_is_exact():
    zero = preset_density("zero", {})
    rows = convergence_scan(CollectiveQuery(0.5, 1.0, 1.5, 1.0, zero), LAMBDAS)
    assert all(r.abs_error == 0 and r.value == 0 for r in rows)


def test_vacuum_reversed_ordering_vanishes():
    q = CollectiveQuery(0.25, 1.0, 1.0, 1.0, OHM, ordering="creator-first")
    assert collective_two_point(q) == 0


@pytest.mark.parametrize("ordering,sign", [("annihilator-first", 1), ("creator-first", -1)])
def test_thermal_orderings_converge_to_their_limits(ordering, sign):
    cov = thermal_covariance(1.0, 0.0, OHM)
    rows = convergence_scan(CollectiveQuery(0.5, 1.0, 1.5, 1.0, OHM, cov, ordering=ordering),
                            LAMBDAS)
    limit = full_plus(OHM, 1.0, cov, sign)
    assert rows[-1].abs_error <= 0.05 * abs(limit)
    assert limit_two_point(1.0, 1.5, 1.0, OHM, cov, ordering) == pytest.approx(limit)


def test_scan_validation_and_failure():
    q = CollectiveQuery(0.5, 1.0, 1.5, 1.0, OHM)
    with pytest.raises(ValidationError):
        convergence_scan(q, [0.5, 0.25])
    with pytest.raises(ValidationError):
        convergence_scan(q, [0.5, 0.25, 0.25])
    # a negative slack demands at least a halving per step, which 0.0625 -> 0.06 cannot give
    with pytest.raises(ConvergenceError) as info:
        convergence_scan(q, [0.5, 0.0625, 0.06], slack=-0.5)
    assert [r.lam for r in info.value.table] == [0.5, 0.0625, 0.06]
    rows = convergence_scan(q, [0.5, 0.0625, 0.06], slack=-0.5, raise_on_failure=False)
    assert len(rows) == 3


def test_cross_frequency_overlap():
    vals = [abs(cross_frequency_overlap(lam, (0.0, 1.0), (0.0, 1.5), 1.0, 2.0, OHM)) for lam in LAMBDAS]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= 0.05 * vals[0]
    lim = abs(full_plus(OHM, 1.0))
    disjoint = [abs(cross_frequency_overlap(lam, (0.0, 1.0), (1.0, 2.0), 1.0, 1.0, OHM)) for lam in LAMBDAS]
    assert all(b < a for a, b in zip(disjoint, disjoint[1:]))
    assert disjoint[-1] <= 0.01 * lim
    same = cross_frequency_overlap(0.0625, (0.0, 1.0), (0.5, 2.0), 1.0, 1.0, OHM)
    assert abs(same - 0.5 * full_plus(OHM, 1.0)) <= 0.01 * lim
    with pytest.raises(ValidationError):
        cross_frequency_overlap(0.5, (0.0, 1.0), (0.0, 1.0), 1.0, 1.0 + 1e-12, OHM, min_separation=1e-8)
    with pytest.raises(ValidationError):
        cross_frequency_overlap(0.5, (1.0, 0.0), (0.0, 1.0), 1.0, 2.0, OHM)


def test_query_validation():
    with pytest.raises(ValidationError):
        CollectiveQuery(0.0, 1.0, 1.0, 1.0, OHM)
    with pytest.raises(ValidationError):
        CollectiveQuery(1.5, 1.0, 1.0, 1.0, OHM)
    with pytest.raises(ValidationError):
        CollectiveQuery(0.5, -1.0, 1.0, 1.0, OHM)
    with pytest.raises(ValidationError):
        CollectiveQuery(0.5, 1.0, 200.0, 1.0, OHM)
    with pytest.raises(ValidationError):
        CollectiveQuery(0.5, 1.0, 1.0, 1.0, OHM, ordering="sideways")
