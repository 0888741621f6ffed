"""Scalarization of objective vectors, preference sampling and encoding."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import ContractError, check_objectives, check_preference

DEFAULT_FLOOR = 1e-8


class Kind(str, enum.Enum):
    WEIGHTED_SUM = "ws"
    WEIGHTED_TCHEBYCHEFF = "wt"
    WEIGHTED_LOG_SUM = "wl"


@dataclass(frozen=True)
class Scalarization:
    """A scalarization function with its utopian point and positivity floor.

    ``utopian`` is only used by the weighted Tchebycheff variant and defaults
    to all-ones, the best attainable value for normalized objectives.
    """

    kind: Kind = Kind.WEIGHTED_SUM
    utopian: tuple | None = None
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.floor > 0:
            raise ContractError("floor must be positive")
        if self.utopian is not None:
            u = check_objectives(self.utopian, bounded=True)
            object.__setattr__(self, "utopian", tuple(float(v) for v in u))

    def __call__(self, r, w) -> float:
        return scalarize(self, r, w)

    def batch(self, R, w) -> np.ndarray:
        """Scalarize every row of ``R`` (shape ``(n, d)``) under one preference."""
        R = np.asarray(R, dtype=np.float64)
        w = np.asarray(w, dtype=np.float64)
        if R.ndim != 2 or R.shape[1] != w.shape[0]:
            raise ContractError(f"dimension mismatch: {R.shape} vs {w.shape}")
        if self.kind is Kind.WEIGHTED_SUM:
            out = R @ w
        elif self.kind is Kind.WEIGHTED_LOG_SUM:
            out = np.exp(np.log(np.maximum(R, self.floor)) @ w)
        else:
            z = np.ones(R.shape[1]) if self.utopian is None else np.asarray(self.utopian)
            if z.shape[0] != R.shape[1]:
                raise ContractError("utopian point dimension mismatch")
            out = np.minimum(1.0 - np.max(w * np.abs(R - z), axis=1), 1.0)
        return np.maximum(out, self.floor)


def scalarize(kind: Scalarization, r, w) -> float:
    """Map an objective vector and a preference to a positive scalar reward.

    Weighted sum gives ``sum(w * r)``, weighted log-sum gives ``prod(r ** w)``
    with ``r`` clamped below at the floor, and weighted Tchebycheff gives
    ``1 - max(w * |r - z|)`` clamped to ``[floor, 1]`` so larger is better.
    """
    r = check_objectives(r)
    w = check_preference(w, d=r.size)
    return float(kind.batch(r[None, :], w)[0])


@dataclass(frozen=True)
class Dirichlet:
    """Symmetric Dirichlet distribution over preferences."""

    alpha: float = 1.0
    d: int = 2

    def __post_init__(self):
        if not self.alpha > 0:
            raise ContractError("alpha must be positive")
        if self.d < 1:
            raise ContractError("d must be at least 1")

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        return sample_preference(self, rng, size)


def sample_preference(p: Dirichlet, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw one preference (or ``size`` of them) from a symmetric Dirichlet."""
    n = 1 if size is None else size
    if p.d == 1:
        w = np.ones((n, 1))
    else:
        w = rng.dirichlet(np.full(p.d, p.alpha), size=n)
        # renormalize so the simplex constraint holds to machine precision
        w = w / w.sum(axis=1, keepdims=True)
    return w[0] if size is None else w


@dataclass(frozen=True)
class Thermometer:
    """Thermometer encoding settings; ``bins == 0`` passes values through raw."""

    bins: int = 50
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.bins < 0:
            raise ContractError("bins must be non-negative")
        if not self.lo < self.hi:
            raise ContractError("range must satisfy lo < hi")

    def width(self, d: int) -> int:
        return d if self.bins == 0 else d * self.bins


def thermometer_encode(v: float, cfg: Thermometer) -> np.ndarray:
    """Encode a scalar as ``bins`` bits where bit ``i`` is set iff the scaled value reaches ``(i+1)/bins``."""
    if cfg.bins < 1:
        raise ContractError("thermometer_encode needs bins >= 1")
    if not np.isfinite(v):
        raise ContractError("cannot encode a non-finite value")
    u = (min(max(float(v), cfg.lo), cfg.hi) - cfg.lo) / (cfg.hi - cfg.lo)
    thresholds = np.arange(1, cfg.bins + 1) / cfg.bins
    # tolerance keeps e.g. 0.5 >= 2/4 exact under float rounding of the scaling
    return (u >= thresholds - 1e-12).astype(np.float64)


def encode_preference(w, cfg: Thermometer) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if cfg.bins == 0:
        return w.copy()
    return np.concatenate([thermometer_encode(v, cfg) for v in w])


def encode_preferences(W, cfg: Thermometer) -> np.ndarray:
    """Row-wise :func:`encode_preference` for an ``(n, d)`` array."""
    W = np.atleast_2d(np.asarray(W, dtype=np.float64))
    if cfg.bins == 0:
        return W.copy()
    u = (np.clip(W, cfg.lo, cfg.hi) - cfg.lo) / (cfg.hi - cfg.lo)
    thresholds = np.arange(1, cfg.bins + 1) / cfg.bins
    bits = u[:, :, None] >= thresholds[None, None, :] - 1e-12
    return bits.reshape(len(W), -1).astype(np.float64)
