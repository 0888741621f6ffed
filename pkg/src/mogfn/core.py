"""Objective vectors, preferences, candidates and Pareto dominance.

Everything here maximizes. Objective vectors are 1-D float arrays, fronts are
``(n, d)`` arrays wrapped in :class:`Front` together with optional payloads.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

PREFERENCE_ATOL = 1e-9


class ContractError(ValueError):
    """Raised when an operation's preconditions are violated."""


def check_objectives(values, d: int | None = None, bounded: bool = False) -> np.ndarray:
    """Validate an objective vector and return it as a float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise ContractError(f"objective vector must be 1-D and non-empty, got shape {arr.shape}")
    if d is not None and arr.size != d:
        raise ContractError(f"expected {d} objectives, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ContractError("objective vector has non-finite components")
    if bounded and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ContractError("objective vector outside [0, 1]")
    return arr


def check_preference(weights, d: int | None = None) -> np.ndarray:
    """Validate a preference (a point on the simplex)."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size < 1:
        raise ContractError(f"preference must be 1-D and non-empty, got shape {w.shape}")
    if d is not None and w.size != d:
        raise ContractError(f"expected preference of dimension {d}, got {w.size}")
    if not np.all(np.isfinite(w)) or w.min() < 0.0:
        raise ContractError("preference weights must be finite and non-negative")
    if abs(w.sum() - 1.0) > PREFERENCE_ATOL:
        raise ContractError(f"preference weights must sum to 1, got {w.sum()!r}")
    return w


def check_points(points, d: int | None = None) -> np.ndarray:
    """Validate a collection of objective vectors as an ``(n, d)`` array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.size == 0:
        return np.zeros((0, d or 0))
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ContractError(f"points must be a 2-D array, got shape {arr.shape}")
    if d is not None and arr.shape[1] != d:
        raise ContractError(f"expected dimension {d}, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ContractError("points contain non-finite values")
    return arr


@dataclass(frozen=True)
class Candidate:
    """A terminal object together with its objective vector."""

    payload: Any
    objectives: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "objectives", check_objectives(self.objectives))


@dataclass
class Front:
    """A set of objective vectors, optionally paired with payloads.

    ``nondominated`` is set by :func:`nondominated_filter`; a front built by
    hand makes no such promise.
    """

    points: np.ndarray
    payloads: list | None = None
    nondominated: bool = False
    _d: int | None = field(default=None, repr=False)

    def __post_init__(self):
        self.points = check_points(self.points, self._d)
        if self.payloads is not None:
            self.payloads = list(self.payloads)
            if len(self.payloads) != len(self.points):
                raise ContractError("payloads and points differ in length")

    def __len__(self):
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def from_candidates(cls, candidates: Iterable[Candidate]) -> "Front":
        candidates = list(candidates)
        if not candidates:
            return cls(np.zeros((0, 0)), [])
        return cls(np.stack([c.objectives for c in candidates]),
                   [c.payload for c in candidates])

    def to_csv(self) -> str:
        """Serialize as CSV with columns ``obj_0..obj_{d-1}`` and optional ``payload``."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        d = self.dim
        header = [f"obj_{i}" for i in range(d)]
        if self.payloads is not None:
            header.append("payload")
        writer.writerow(header)
        for i, p in enumerate(self.points):
            row = [repr(float(v)) for v in p]
            if self.payloads is not None:
                row.append(format_payload(self.payloads[i]))
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Front":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ContractError("empty front CSV")
        header = rows[0]
        obj_cols = [i for i, h in enumerate(header) if h.startswith("obj_")]
        if not obj_cols:
            raise ContractError("front CSV has no obj_ columns")
        has_payload = "payload" in header
        pcol = header.index("payload") if has_payload else None
        points = [[float(r[i]) for i in obj_cols] for r in rows[1:] if r]
        payloads = [r[pcol] for r in rows[1:] if r] if has_payload else None
        pts = np.asarray(points, dtype=np.float64).reshape(len(points), len(obj_cols))
        return cls(pts, payloads)


def format_payload(payload) -> str:
    """Render a terminal object as text for CSV export."""
    if isinstance(payload, str):
        return payload
    if isinstance(payload, tuple) and all(isinstance(v, (int, np.integer)) for v in payload):
        return "(" + ",".join(str(int(v)) for v in payload) + ")"
    return str(payload)


def dominates(a, b) -> bool:
    """True iff ``a`` is at least as good as ``b`` everywhere and better somewhere."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.all(a >= b) and np.any(a > b))


def nondominated_mask(points) -> np.ndarray:
    """Boolean mask of the points not dominated by any other point.

    Exact duplicates are all kept; see :func:`nondominated_filter` for the
    deduplicating variant.
    """
    pts = check_points(points)
    n = len(pts)
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        ge = np.all(pts >= pts[i], axis=1)
        gt = np.any(pts > pts[i], axis=1)
        if np.any(ge & gt):
            keep[i] = False
    return keep


def nondominated_filter(points, payloads: Sequence | None = None) -> Front:
    """Return the non-dominated subset of ``points`` as a :class:`Front`.

    Exact duplicates are collapsed to their first occurrence before filtering
    and the survivors keep their input order.
    """
    pts = check_points(points)
    if len(pts) == 0:
        return Front(np.zeros((0, pts.shape[1] if pts.ndim == 2 else 0)),
                     [] if payloads is not None else None, nondominated=True)
    if payloads is not None and len(payloads) != len(pts):
        raise ContractError("payloads and points differ in length")
    seen = set()
    first = []
    for i, p in enumerate(pts):
        key = p.tobytes()
        if key not in seen:
            seen.add(key)
            first.append(i)
    first = np.asarray(first)
    uniq = pts[first]
    keep = nondominated_mask(uniq)
    idx = first[keep]
    kept_payloads = [payloads[i] for i in idx] if payloads is not None else None
    return Front(pts[idx], kept_payloads, nondominated=True)
