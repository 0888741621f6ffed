import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mogfn.core import ContractError
from mogfn.scalarize import (
    Dirichlet, Kind, Scalarization, Thermometer, encode_preference, encode_preferences,
    sample_preference, scalarize, thermometer_encode,
)

WS = Scalarization(Kind.WEIGHTED_SUM)
WL = Scalarization(Kind.WEIGHTED_LOG_SUM)
WT = Scalarization(Kind.WEIGHTED_TCHEBYCHEFF)


@pytest.mark.parametrize("kind, r, w, expected", [
    (WS, (0.2, 0.6), (0.5, 0.5), 0.4),
    (WS, (0.3, 0.9), (1.0, 0.0), 0.3),
    (WL, (0.4, 0.9), (0.5, 0.5), 0.6),
    (WT, (0.2, 0.6), (0.5, 0.5), 0.6),
])
def test_scalarize_examples(kind, r, w, expected):
    assert scalarize(kind, r, w) == pytest.approx(expected, abs=1e-12)


def test_scalarize_dimension_mismatch():
    with pytest.raises(ContractError):
        scalarize(WS, (0.1, 0.2, 0.3), (0.5, 0.5))


def test_kind_from_string():
    assert Scalarization("wl").kind is Kind.WEIGHTED_LOG_SUM


def test_wl_floors_zero_objectives():
    assert scalarize(WL, (0.0, 1.0), (0.5, 0.5)) == pytest.approx(1e-4)


simplex2 = st.floats(0, 1).map(lambda a: np.array([a, 1 - a]))
unit_r = arrays(np.float64, 2, elements=st.floats(1e-6, 1))


@given(unit_r, simplex2)
def test_wl_below_ws(r, w):
    assert scalarize(WL, r, w) <= scalarize(WS, r, w) + 1e-12


@given(unit_r, simplex2, st.floats(0, 1))
def test_output_range_and_monotone(r, w, bump):
    for kind in (WS, WL, WT):
        v = scalarize(kind, r, w)
        assert kind.floor <= v <= 1.0 + 1e-12
    better = r.copy()
    better[0] = max(r[0], bump)
    for kind in (WS, WL):
        assert scalarize(kind, better, w) >= scalarize(kind, r, w) - 1e-12


def test_unit_preference_selects_objective():
    rng = np.random.default_rng(0)
    R = rng.random((40, 3))
    for i in range(3):
        w = np.eye(3)[i]
        assert np.argmax(WS.batch(R, w)) == np.argmax(R[:, i])


def test_sample_preference_degenerate_and_deterministic():
    for alpha in (0.1, 1.0, 10.0):
        np.testing.assert_array_equal(sample_preference(Dirichlet(alpha, 1), np.random.default_rng(3)), [1.0])
    p = Dirichlet(1.0, 3)
    a = sample_preference(p, np.random.default_rng(11))
    b = sample_preference(p, np.random.default_rng(11))
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0 and abs(a.sum() - 1) < 1e-9


def test_sample_preference_mean():
    # symmetric Dirichlet mean is 1/d per component
    W = sample_preference(Dirichlet(1.0, 3), np.random.default_rng(0), size=10_000)
    np.testing.assert_allclose(W.mean(axis=0), 1 / 3, atol=0.02)
    assert np.all(np.abs(W.sum(axis=1) - 1) < 1e-9)


def test_dirichlet_validation():
    with pytest.raises(ContractError):
        Dirichlet(0.0, 2)


def test_thermometer_examples():
    cfg = Thermometer(4)
    np.testing.assert_array_equal(thermometer_encode(0.5, cfg), [1, 1, 0, 0])
    np.testing.assert_array_equal(thermometer_encode(0.0, cfg), [0, 0, 0, 0])
    np.testing.assert_array_equal(thermometer_encode(1.0, cfg), [1, 1, 1, 1])
    np.testing.assert_array_equal(thermometer_encode(7.0, cfg), [1, 1, 1, 1])


@given(st.floats(-1, 2), st.floats(-1, 2))
def test_thermometer_monotone(a, b):
    lo, hi = sorted((a, b))
    cfg = Thermometer(50)
    assert np.all(thermometer_encode(lo, cfg) <= thermometer_encode(hi, cfg))


def test_encode_preference():
    np.testing.assert_array_equal(encode_preference([1.0, 0.0], Thermometer(2)), [1, 1, 0, 0])
    np.testing.assert_array_equal(encode_preference([0.5, 0.5], Thermometer(2)), [1, 0, 1, 0])
    np.testing.assert_array_equal(encode_preference([0.3, 0.7], Thermometer(0)), [0.3, 0.7])


def test_batch_encoding_matches_scalar():
    W = np.random.default_rng(1).dirichlet([1, 1, 1], size=20)
    cfg = Thermometer(50)
    expected = np.stack([encode_preference(w, cfg) for w in W])
    np.testing.assert_array_equal(encode_preferences(W, cfg), expected)
