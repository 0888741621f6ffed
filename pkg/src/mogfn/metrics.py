"""Quality indicators for Pareto front approximations (all objectives maximized)."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .core import ContractError, check_points, nondominated_mask

MAX_EXACT_HV_DIM = 5


def _as_points(front) -> np.ndarray:
    return check_points(getattr(front, "points", front))


def hypervolume(front, ref=None) -> float:
    """Volume of the union of boxes ``[ref, p]`` over front points ``p``.

    Points are clipped to ``ref`` from below first. Exact for ``d <= 5``
    (a sweep in 2-D, recursive slicing along the last axis above that).
    """
    pts = _as_points(front)
    if len(pts) == 0:
        return 0.0
    d = pts.shape[1]
    ref = np.zeros(d) if ref is None else np.asarray(ref, dtype=np.float64)
    if ref.shape != (d,):
        raise ContractError(f"reference point has shape {ref.shape}, expected ({d},)")
    if d > MAX_EXACT_HV_DIM:
        raise ContractError(f"exact hypervolume supports d <= {MAX_EXACT_HV_DIM}; use the Monte Carlo oracle")
    pts = np.maximum(pts, ref) - ref
    pts = pts[np.all(pts > 0, axis=1)]
    if len(pts) == 0:
        return 0.0
    return float(_hv(np.unique(pts, axis=0)))


def _hv(pts: np.ndarray) -> float:
    d = pts.shape[1]
    if d == 1:
        return pts[:, 0].max()
    pts = pts[nondominated_mask(pts)]
    if d == 2:
        order = np.argsort(-pts[:, 0], kind="stable")
        x, y = pts[order, 0], pts[order, 1]
        # non-dominated and sorted by x descending means y ascending
        return float(np.sum(x * np.diff(np.concatenate([[0.0], y]))))
    last = pts[:, -1]
    levels = np.unique(last)[::-1]
    total = 0.0
    for k, z in enumerate(levels):
        below = levels[k + 1] if k + 1 < len(levels) else 0.0
        total += _hv(pts[last >= z][:, :-1]) * (z - below)
    return total


def mc_hypervolume_oracle(front, ref=None, samples: int = 10**6, rng=None, return_stderr: bool = False):
    """Monte Carlo hypervolume: dominated fraction of uniform samples in the bounding box."""
    if samples < 1:
        raise ContractError("need at least one sample")
    pts = _as_points(front)
    if len(pts) == 0:
        return (0.0, 0.0) if return_stderr else 0.0
    d = pts.shape[1]
    ref = np.zeros(d) if ref is None else np.asarray(ref, dtype=np.float64)
    pts = np.maximum(pts, ref)
    upper = pts.max(axis=0)
    volume = float(np.prod(upper - ref))
    if volume == 0.0:
        return (0.0, 0.0) if return_stderr else 0.0
    rng = np.random.default_rng(rng)
    hits = 0
    chunk = 50_000
    for start in range(0, samples, chunk):
        m = min(chunk, samples - start)
        u = ref + rng.random((m, d)) * (upper - ref)
        dominated = np.zeros(m, dtype=bool)
        for p in pts:
            dominated |= np.all(u <= p, axis=1)
        hits += int(dominated.sum())
    frac = hits / samples
    est = frac * volume
    if return_stderr:
        return est, volume * math.sqrt(frac * (1.0 - frac) / samples)
    return est


def uniform_reference_vectors(d: int, resolution: int) -> np.ndarray:
    """Simplex lattice ``{k / resolution : sum(k) = resolution}``, ``C(resolution+d-1, d-1)`` rows."""
    if resolution < 1 or d < 1:
        raise ContractError("need d >= 1 and resolution >= 1")
    rows = []
    # stars and bars: choose d-1 bar positions among resolution+d-1 slots
    for bars in itertools.combinations(range(resolution + d - 1), d - 1):
        edges = (-1,) + bars + (resolution + d - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(d)])
    return np.asarray(rows, dtype=np.float64)[::-1] / resolution


def lattice_preferences(d: int, n: int, seed: int = 0) -> np.ndarray:
    """``n`` lattice preferences: the coarsest lattice with at least ``n`` points, subsampled if needed."""
    if n < 1:
        raise ContractError("need at least one preference")
    if d == 1:
        return np.ones((n, 1))
    resolution = 1
    while math.comb(resolution + d - 1, d - 1) < n:
        resolution += 1
    lattice = uniform_reference_vectors(d, resolution)
    if len(lattice) == n:
        return lattice
    idx = np.sort(np.random.default_rng(seed).choice(len(lattice), size=n, replace=False))
    return lattice[idx]


def r2_indicator(front, weights, utopian=None) -> float:
    """Mean over reference vectors of the smallest weighted Tchebycheff distance to the utopian point."""
    pts = _as_points(front)
    if len(pts) == 0:
        raise ContractError("R2 of an empty front is undefined")
    W = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    d = pts.shape[1]
    z = np.ones(d) if utopian is None else np.asarray(utopian, dtype=np.float64)
    if W.shape[1] != d or z.shape != (d,):
        raise ContractError("dimension mismatch between front, weights and utopian point")
    dist = np.abs(z - pts)  # (n, d)
    tch = np.max(W[:, None, :] * dist[None, :, :], axis=2)  # (|W|, n)
    return float(np.mean(tch.min(axis=1)))


def gd_plus(approx, truth) -> float:
    """Mean over approximation points of the deficit-only distance to the nearest true point."""
    A = _as_points(approx)
    T = _as_points(truth)
    if len(T) == 0:
        raise ContractError("true front must be non-empty")
    if len(A) == 0:
        raise ContractError("approximation front must be non-empty")
    if A.shape[1] != T.shape[1]:
        raise ContractError("dimension mismatch")
    deficit = np.maximum(T[None, :, :] - A[:, None, :], 0.0)
    return float(np.mean(np.sqrt((deficit**2).sum(axis=2)).min(axis=1)))


def edit_distance(a, b) -> int:
    """Levenshtein distance with unit insert, delete and substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def l1_distance(a, b) -> float:
    return float(sum(abs(x - y) for x, y in zip(a, b)))


def default_distance(a, b):
    if isinstance(a, str):
        return edit_distance(a, b)
    return l1_distance(a, b)


def mean_pairwise_distance(items, distance=None) -> float:
    distance = distance or default_distance
    items = list(items)
    if len(items) < 2:
        raise ContractError("need at least two items")
    pairs = list(itertools.combinations(items, 2))
    return float(sum(distance(x, y) for x, y in pairs) / len(pairs))


def topk_reward(reward_sets, k: int) -> float:
    """Mean of the ``k`` largest rewards per set, averaged over sets."""
    if k < 1:
        raise ContractError("k must be positive")
    vals = []
    for r in reward_sets:
        r = np.asarray(r, dtype=np.float64)
        if len(r) < k:
            raise ContractError(f"set of size {len(r)} is smaller than k={k}")
        vals.append(np.sort(r)[::-1][:k].mean())
    return float(np.mean(vals))


def topk_diversity(ranked_sets, k: int, distance=None) -> float:
    """Mean pairwise distance among the first ``k`` items of each set, averaged over sets.

    Sets must already be ordered best first; :func:`topk_scores` does the
    ranking by scalarized reward. This is a mean-pairwise diversity, with no
    distance threshold.
    """
    if k < 2:
        raise ContractError("diversity needs k >= 2")
    vals = []
    for items in ranked_sets:
        items = list(items)
        if len(items) < k:
            raise ContractError(f"set of size {len(items)} is smaller than k={k}")
        vals.append(mean_pairwise_distance(items[:k], distance))
    return float(np.mean(vals))


def topk_scores(candidate_sets, preferences, scalarization, k: int, distance=None):
    """Top-k reward and top-k diversity of candidates sampled per test preference.

    ``candidate_sets[i]`` holds :class:`~mogfn.core.Candidate` objects drawn
    for ``preferences[i]``; candidates are ranked by scalarized reward (ties
    keep sampling order).
    """
    rewards, ranked = [], []
    for cands, w in zip(candidate_sets, preferences):
        R = np.stack([c.objectives for c in cands])
        s = scalarization.batch(R, w)
        order = np.argsort(-s, kind="stable")
        rewards.append(s)
        ranked.append([cands[i].payload for i in order])
    return topk_reward(rewards, k), topk_diversity(ranked, k, distance)
