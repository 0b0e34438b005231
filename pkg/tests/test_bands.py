import math

import numpy as np
import pytest
from hypothesis import given, settings
from numpy.testing import assert_allclose

from jacobi_wvn.bands import (default_search_interval, find_bands, invert_theta, quasi_momentum,
                              theta_table)
from jacobi_wvn.core import PeriodicOperator, PointClass, classify, monodromy_trace
from jacobi_wvn.errors import DomainError

from conftest import interior_points, operators


def test_free_chain_single_band(free1):
    bands = find_bands(free1)
    assert len(bands) == 1
    assert_allclose([bands[0].lo, bands[0].hi], [-2, 2], atol=1e-10)
    assert bands[0].theta_direction == "dec"


def test_closed_gap_splits_band():
    bands = find_bands(PeriodicOperator([1.0, 1.0]))
    edges = [(b.lo, b.hi) for b in bands]
    assert_allclose(edges, [(-2, 0), (0, 2)], atol=1e-7)
    assert bands[0].hi == bands[1].lo


def test_dimer_gap(dimer):
    bands = find_bands(dimer)
    assert_allclose([(b.lo, b.hi) for b in bands], [(-3, -1), (1, 3)], atol=1e-10)
    assert [b.index for b in bands] == [0, 1]


def test_dimer_gap_matches_brute_scan(dimer):
    x = np.linspace(-4, 4, 400001)
    inside = np.abs(monodromy_trace(dimer, x)) <= 2
    starts = x[1:][inside[1:] & ~inside[:-1]]
    ends = x[:-1][inside[:-1] & ~inside[1:]]
    bands = find_bands(dimer)
    assert_allclose([b.lo for b in bands], starts, atol=1e-4)
    assert_allclose([b.hi for b in bands], ends, atol=1e-4)


def test_search_interval():
    op = PeriodicOperator([1.0, 2.0], [-1.0, 0.5])
    assert default_search_interval(op) == (-6.0, 5.5)


def test_band_serialisation(dimer):
    d = find_bands(dimer)[1].to_dict()
    assert set(d) == {"index", "lo", "hi", "theta_direction"}
    assert d["theta_direction"] in {"inc", "dec"}


@given(operators())
def test_band_invariants(op):
    bands = find_bands(op)
    assert 1 <= len(bands) <= op.period
    for b in bands:
        assert b.lo < b.hi
        tr = monodromy_trace(op, [b.lo, b.hi])
        assert_allclose(np.abs(tr), 2.0, atol=1e-8)
        x = np.linspace(b.lo, b.hi, 202)[1:-1]
        assert np.all(np.abs(monodromy_trace(op, x)) < 2.0)
    for b0, b1 in zip(bands[:-1], bands[1:]):
        assert b0.hi <= b1.lo
        assert b1.index == b0.index + 1


@given(operators(max_period=6))
@settings(max_examples=30)
def test_interior_elliptic_edges_parabolic(op):
    for b in find_bands(op):
        w = b.hi - b.lo
        for lam in np.linspace(b.lo + 1e-3 * w, b.hi - 1e-3 * w, 25):
            assert classify(op, lam).kind is PointClass.ELLIPTIC
        assert classify(op, b.lo, tol=1e-8).kind is PointClass.PARABOLIC
        assert classify(op, b.hi, tol=1e-8).kind is PointClass.PARABOLIC


@given(operators(max_period=6))
@settings(max_examples=30)
def test_theta_strictly_monotone(op):
    for b in find_bands(op):
        _, th = theta_table(op, b, n=1000, margin=1e-6)
        d = np.diff(th)
        assert np.all(d > 0) or np.all(d < 0)
        assert (d[0] > 0) == (b.theta_direction == "inc")


def test_band_count_random_operators(rng):
    from jacobi_wvn.core import random_operator
    for _ in range(200):
        op = random_operator(rng)
        assert len(find_bands(op)) <= op.period


@pytest.mark.parametrize("lam, theta", [(0.0, math.pi / 2), (1.0, math.pi / 3),
                                         (-1.0, 2 * math.pi / 3)])
def test_quasi_momentum_free(free1, lam, theta):
    assert quasi_momentum(free1, lam) == pytest.approx(theta, abs=1e-14)


def test_quasi_momentum_outside_band(free1):
    with pytest.raises(DomainError):
        quasi_momentum(free1, 2.5)


@pytest.mark.parametrize("theta, lam", [(math.pi / 2, 0.0), (math.pi / 3, 1.0)])
def test_invert_theta_free(free1, theta, lam):
    assert invert_theta(free1, find_bands(free1)[0], theta) == pytest.approx(lam, abs=1e-12)


def test_invert_theta_rejects_bad_target(free1):
    band = find_bands(free1)[0]
    with pytest.raises(DomainError):
        invert_theta(free1, band, 0.0)
    with pytest.raises(DomainError):
        invert_theta(free1, band, 4.0)


def test_every_band_spans_full_theta_range():
    op = PeriodicOperator([1.0, 1.0])
    for b in find_bands(op):
        th = [quasi_momentum(op, b.lo + t * (b.hi - b.lo)) for t in (1e-3, 1 - 1e-3)]
        assert min(th) < 0.1 and max(th) > math.pi - 0.1


def test_round_trip_random_interior(rng, trimer):
    bands = find_bands(trimer)
    for _ in range(100):
        b = bands[int(rng.integers(len(bands)))]
        th = rng.uniform(0.02, 0.98) * math.pi
        lam = invert_theta(trimer, b, th)
        assert abs(quasi_momentum(trimer, lam) - th) < 1e-12
        assert abs(invert_theta(trimer, b, quasi_momentum(trimer, lam)) - lam) < 1e-10


@given(interior_points())
def test_round_trip_property(sample):
    op, band, lam = sample
    th = quasi_momentum(op, lam)
    assert abs(invert_theta(op, band, th) - lam) < 1e-10
