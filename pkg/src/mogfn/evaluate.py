"""Evaluation protocol: sample per fixed test preference, score the top-k, pool a front."""

from __future__ import annotations

import numpy as np

from .core import Front, nondominated_filter
from .metrics import gd_plus, hypervolume, r2_indicator, topk_scores, uniform_reference_vectors


def r2_reference_vectors(d: int) -> np.ndarray:
    return uniform_reference_vectors(d, 10 if d <= 3 else 5)


def evaluate_sampler(model, preferences, n_samples: int = 128, k: int = 10, random_state=0,
                     truth: Front | None = None, ref=None) -> dict:
    """Metrics for a fitted sampler over a fixed set of test preferences.

    Returns a dict with ``hv``, ``r2``, ``topk_reward``, ``topk_diversity``,
    ``gd_plus`` (only when ``truth`` is given) and the pooled non-dominated
    ``front`` of everything sampled.
    """
    rng = np.random.default_rng(random_state)
    sets = [model.sample(w, n_samples, random_state=rng) for w in preferences]
    reward, diversity = topk_scores(sets, preferences, model.scalarizer_, k)
    pooled = [c for s in sets for c in s]
    front = nondominated_filter(np.stack([c.objectives for c in pooled]), [c.payload for c in pooled])
    d = front.dim
    out = {
        "hv": hypervolume(front, ref),
        "r2": r2_indicator(front, r2_reference_vectors(d)),
        "topk_reward": reward,
        "topk_diversity": diversity,
    }
    if truth is not None:
        out["gd_plus"] = gd_plus(front, truth)
    out["front"] = front
    return out
