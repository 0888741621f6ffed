import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mogfn.core import ContractError, Front
from mogfn.metrics import (
    edit_distance, gd_plus, hypervolume, lattice_preferences, mc_hypervolume_oracle, r2_indicator,
    topk_diversity, topk_reward, uniform_reference_vectors,
)


def inclusion_exclusion_hv(points):
    """Union of origin-anchored boxes by inclusion-exclusion over all subsets."""
    pts = np.asarray(points, dtype=np.float64)
    total = 0.0
    for r in range(1, len(pts) + 1):
        for sub in itertools.combinations(range(len(pts)), r):
            total += (-1) ** (r + 1) * np.prod(pts[list(sub)].min(axis=0))
    return total


def recursive_levenshtein(a, b):
    # plain recursion, exponential but fine on short strings
    if not a:
        return len(b)
    if not b:
        return len(a)
    return min(recursive_levenshtein(a[1:], b) + 1, recursive_levenshtein(a, b[1:]) + 1,
               recursive_levenshtein(a[1:], b[1:]) + (a[0] != b[0]))


# --- hypervolume ---

def test_hv_examples():
    assert hypervolume([(1, 1)]) == 1.0
    assert hypervolume([(0.5, 1), (1, 0.5)]) == pytest.approx(0.75)
    assert hypervolume(np.zeros((0, 2))) == 0.0
    assert hypervolume(Front(np.array([[0.5, 0.5]]))) == pytest.approx(0.25)


def test_hv_refuses_high_dimension():
    with pytest.raises(ContractError):
        hypervolume(np.ones((2, 6)))


def test_hv_clips_to_reference():
    assert hypervolume([(-1, 2), (0.5, 0.5)]) == pytest.approx(0.25)
    assert hypervolume([(1, 1)], ref=(-0.5, -0.5)) == pytest.approx(2.25)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_hv_matches_inclusion_exclusion(d):
    rng = np.random.default_rng(d)
    for _ in range(5):
        pts = rng.random((7, d))
        assert hypervolume(pts) == pytest.approx(inclusion_exclusion_hv(pts), rel=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_hv_matches_monte_carlo_3d(seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((20, 3))
    exact = hypervolume(pts)
    est = mc_hypervolume_oracle(pts, samples=10**6, rng=seed)
    assert abs(est - exact) / exact < 1e-2


def test_mc_oracle_examples():
    est, se = mc_hypervolume_oracle([(1, 1)], samples=1000, rng=0, return_stderr=True)
    assert est == 1.0 and se == 0.0
    assert mc_hypervolume_oracle(np.zeros((0, 2))) == 0.0
    pts = np.random.default_rng(5).random((10, 2))
    est, se = mc_hypervolume_oracle(pts, samples=200_000, rng=1, return_stderr=True)
    assert abs(est - hypervolume(pts)) <= 3 * se


front_pts = arrays(np.float64, st.tuples(st.integers(1, 8), st.just(3)), elements=st.floats(0, 1))
point3 = arrays(np.float64, 3, elements=st.floats(0, 1))


@settings(max_examples=60)
@given(front_pts, point3)
def test_hv_monotone_and_dominated_noop(pts, extra):
    base = hypervolume(pts)
    grown = hypervolume(np.vstack([pts, extra]))
    assert grown >= base - 1e-12
    dominated = pts[0] * 0.5
    assert hypervolume(np.vstack([pts, dominated])) == pytest.approx(base, abs=1e-12)


@settings(max_examples=60)
@given(front_pts, st.randoms())
def test_hv_order_and_duplicate_invariant(pts, rnd):
    perm = list(range(len(pts)))
    rnd.shuffle(perm)
    assert hypervolume(pts[perm]) == pytest.approx(hypervolume(pts), abs=1e-12)
    assert hypervolume(np.vstack([pts, pts])) == pytest.approx(hypervolume(pts), abs=1e-12)


# --- R2 ---

def test_r2_examples():
    assert r2_indicator([(1, 1)], [(1, 0), (0, 1)]) == 0.0
    assert r2_indicator([(0.5, 0.5)], [(1, 0), (0, 1)]) == pytest.approx(0.5)
    with pytest.raises(ContractError):
        r2_indicator(np.zeros((0, 2)), [(1, 0)])


@settings(max_examples=60)
@given(front_pts, point3)
def test_r2_non_increasing_under_augmentation(pts, extra):
    W = uniform_reference_vectors(3, 4)
    assert r2_indicator(np.vstack([pts, extra]), W) <= r2_indicator(pts, W) + 1e-12


# --- GD+ ---

def test_gd_plus_examples():
    truth = np.array([(1, 0), (0, 1), (0.5, 0.5)])
    assert gd_plus(truth, truth) == 0.0
    assert gd_plus([(1, 1)], [(0.5, 0.5)]) == 0.0
    assert gd_plus([(0.5, 1)], [(1, 1)]) == pytest.approx(0.5)
    with pytest.raises(ContractError):
        gd_plus(np.zeros((0, 2)), truth)


@given(front_pts, front_pts)
def test_gd_plus_non_negative(a, t):
    assert gd_plus(a, t) >= 0.0
    assert gd_plus(np.vstack([t, t]), t) == 0.0


# --- top-k ---

def test_topk_reward_examples():
    assert topk_reward([[0.4, 0.4, 0.4]], 2) == pytest.approx(0.4)
    assert topk_reward([[0.1, 0.5, 0.9]], 3) == pytest.approx(0.5)
    assert topk_reward([[0.1, 0.5, 0.9]], 2) == pytest.approx(0.7)
    with pytest.raises(ContractError):
        topk_reward([[0.1]], 2)


@given(st.lists(st.floats(0, 1), min_size=3, max_size=20), st.randoms())
def test_topk_reward_permutation_invariant(r, rnd):
    shuffled = list(r)
    rnd.shuffle(shuffled)
    assert topk_reward([shuffled], 3) == pytest.approx(topk_reward([r], 3))


def test_topk_diversity_examples():
    assert topk_diversity([["ACV"] * 4], 4) == 0.0
    assert topk_diversity([["AAAA", "AAAB"]], 2) == 1.0
    assert topk_diversity([["AB", "CD", "AD"]], 3) == pytest.approx(4 / 3)
    assert topk_diversity([[(0, 0), (1, 2)]], 2) == 3.0
    with pytest.raises(ContractError):
        topk_diversity([["A", "B"]], 1)


# --- edit distance ---

def test_edit_distance_examples():
    assert edit_distance("ACV", "ACV") == 0
    assert edit_distance("", "ACDE") == 4
    assert edit_distance("kitten", "sitting") == 3


short = st.text(alphabet="ACV", max_size=6)


@settings(max_examples=80)
@given(short, short, short)
def test_edit_distance_metric_axioms(a, b, c):
    dab = edit_distance(a, b)
    assert dab == recursive_levenshtein(a, b)
    assert (dab == 0) == (a == b)
    assert dab == edit_distance(b, a)
    assert edit_distance(a, c) <= dab + edit_distance(b, c)


# --- reference vectors ---

def test_reference_vectors():
    np.testing.assert_allclose(uniform_reference_vectors(2, 2), [(1, 0), (0.5, 0.5), (0, 1)])
    W = uniform_reference_vectors(3, 4)
    assert len(W) == 15 == math.comb(6, 2)
    np.testing.assert_allclose(W.sum(axis=1), 1.0)
    assert len({tuple(w) for w in W}) == 15


def test_lattice_preferences():
    P = lattice_preferences(2, 16)
    assert len(P) == 16
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    P3 = lattice_preferences(3, 16, seed=0)
    np.testing.assert_array_equal(P3, lattice_preferences(3, 16, seed=0))
    assert len({tuple(p) for p in P3}) == 16
