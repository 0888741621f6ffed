"""Two-dimensional HyperGrid with classic optimization test functions as rewards."""

from __future__ import annotations

import math

import numpy as np

from ..core import ContractError
from .base import Environment, InvalidAction

INC_0, INC_1, STOP = 0, 1, 2


def branin(x1, x2):
    a, b, c = 1.0, 5.1 / (4 * np.pi**2), 5.0 / np.pi
    r, s, t = 6.0, 10.0, 1.0 / (8 * np.pi)
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1 - t) * np.cos(x1) + s


def currin(x1, x2):
    x2 = np.asarray(x2, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore"):
        factor = np.where(x2 > 0, 1.0 - np.exp(-1.0 / (2.0 * np.where(x2 > 0, x2, 1.0))), 1.0)
    num = 2300 * x1**3 + 1900 * x1**2 + 2092 * x1 + 60
    den = 100 * x1**3 + 500 * x1**2 + 4 * x1 + 20
    return factor * num / den


def sphere(x1, x2):
    return x1**2 + x2**2


def shubert(x1, x2):
    i = np.arange(1, 6).reshape((5,) + (1,) * np.ndim(x1))
    s1 = np.sum(i * np.cos((i + 1) * x1 + i), axis=0)
    s2 = np.sum(i * np.cos((i + 1) * x2 + i), axis=0)
    return s1 * s2


def beale(x1, x2):
    return ((1.5 - x1 + x1 * x2) ** 2 + (2.25 - x1 + x1 * x2**2) ** 2
            + (2.625 - x1 + x1 * x2**3) ** 2)


# name -> (function, (lo1, hi1), (lo2, hi2)); all are minimized on their domains
TEST_FUNCTIONS = {
    "branin": (branin, (-5.0, 10.0), (0.0, 15.0)),
    "currin": (currin, (0.0, 1.0), (0.0, 1.0)),
    "sphere": (sphere, (-5.12, 5.12), (-5.12, 5.12)),
    "shubert": (shubert, (-10.0, 10.0), (-10.0, 10.0)),
    "beale": (beale, (-4.5, 4.5), (-4.5, 4.5)),
}


def objective_table(side: int, names) -> np.ndarray:
    """Normalized rewards for every cell, shape ``(side, side, len(names))``.

    Cell ``(i, j)`` maps to ``(i/(side-1), j/(side-1))`` in the unit square and
    then affinely onto each function's domain. Functions are negated (they are
    minimization benchmarks) and min-max scaled to [0, 1] over the grid.
    """
    u = np.arange(side) / (side - 1)
    U1, U2 = np.meshgrid(u, u, indexing="ij")
    cols = []
    for name in names:
        fn, (a1, b1), (a2, b2) = TEST_FUNCTIONS[name]
        raw = -fn(a1 + (b1 - a1) * U1, a2 + (b2 - a2) * U2)
        lo, hi = raw.min(), raw.max()
        cols.append((raw - lo) / (hi - lo) if hi > lo else np.ones_like(raw))
    return np.stack(cols, axis=-1)


class HyperGrid(Environment):
    """Walk from the top-left corner of an ``side x side`` grid.

    States are ``(i, j, done)``. Actions increment one coordinate or stop, and
    stopping turns the current cell into a terminal state.
    """

    n_actions = 3
    INC_0, INC_1, STOP = INC_0, INC_1, STOP

    def __init__(self, side: int = 8, objectives=("branin", "currin")):
        if side < 2:
            raise ContractError("grid side must be at least 2")
        objectives = tuple(objectives)
        if len(objectives) < 2:
            raise ContractError("select at least two objectives")
        unknown = set(objectives) - set(TEST_FUNCTIONS)
        if unknown:
            raise ContractError(f"unknown objectives {sorted(unknown)}")
        self.side = side
        self.objective_names = objectives
        self.n_objectives = len(objectives)
        self.encoding_dim = 2 * side
        self.table = objective_table(side, objectives)

    def initial_state(self):
        return (0, 0, False)

    def is_terminal(self, state) -> bool:
        return bool(state[2])

    def valid_mask(self, state) -> np.ndarray:
        i, j, done = state
        if done:
            return np.zeros(3, dtype=bool)
        return np.array([i < self.side - 1, j < self.side - 1, True])

    def step(self, state, action: int):
        i, j, done = state
        if done:
            raise InvalidAction("cannot act from a terminal state")
        if action == INC_0 and i < self.side - 1:
            return (i + 1, j, False)
        if action == INC_1 and j < self.side - 1:
            return (i, j + 1, False)
        if action == STOP:
            return (i, j, True)
        raise InvalidAction(f"action {action} invalid at {state}")

    def parents(self, state) -> list:
        i, j, done = state
        if done:
            return [((i, j, False), STOP)]
        out = []
        if i > 0:
            out.append(((i - 1, j, False), INC_0))
        if j > 0:
            out.append(((i, j - 1, False), INC_1))
        return out

    def log_pb(self, state) -> float:
        i, j, done = state
        if done:
            return 0.0
        return -math.log((i > 0) + (j > 0))

    def objectives(self, state) -> np.ndarray:
        i, j = state[0], state[1]
        if not (0 <= i < self.side and 0 <= j < self.side):
            raise ContractError(f"cell {state[:2]} outside the grid")
        return self.table[i, j].copy()

    def encode(self, state) -> np.ndarray:
        v = np.zeros(self.encoding_dim)
        v[state[0]] = 1.0
        v[self.side + state[1]] = 1.0
        return v

    def encode_batch(self, states) -> np.ndarray:
        out = np.zeros((len(states), self.encoding_dim))
        if states:
            ij = np.asarray([s[:2] for s in states])
            rows = np.arange(len(states))
            out[rows, ij[:, 0]] = 1.0
            out[rows, self.side + ij[:, 1]] = 1.0
        return out

    def payload(self, state):
        return (int(state[0]), int(state[1]))

    def terminal_states(self, limit: int = 10**6) -> list:
        return [(i, j, True) for i in range(self.side) for j in range(self.side)]

    def all_objectives(self) -> np.ndarray:
        """Objective vectors for every cell, row-major, shape ``(side**2, d)``."""
        return self.table.reshape(-1, self.n_objectives).copy()


def hypergrid_step(env: HyperGrid, state, action: int):
    return env.step(state, action)


def hypergrid_objectives(env: HyperGrid, cell) -> np.ndarray:
    return env.objectives(tuple(cell) + (True,))
