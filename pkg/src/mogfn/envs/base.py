from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections import deque

import numpy as np

from ..core import ContractError


class InvalidAction(ContractError):
    pass


class Environment(ABC):
    """A finite DAG of states with multi-objective rewards on terminal states.

    States are hashable tuples owned by the caller; the environment itself is
    immutable after construction. Subclasses set ``n_actions``,
    ``n_objectives``, ``encoding_dim`` and ``tree`` (True when every state has
    exactly one parent).
    """

    n_actions: int
    n_objectives: int
    encoding_dim: int
    tree: bool = False

    @abstractmethod
    def initial_state(self):
        ...

    @abstractmethod
    def valid_mask(self, state) -> np.ndarray:
        ...

    @abstractmethod
    def step(self, state, action: int):
        ...

    @abstractmethod
    def is_terminal(self, state) -> bool:
        ...

    @abstractmethod
    def parents(self, state) -> list:
        """All ``(parent_state, action)`` pairs with ``step(parent, action) == state``."""

    @abstractmethod
    def objectives(self, state) -> np.ndarray:
        ...

    @abstractmethod
    def encode(self, state) -> np.ndarray:
        ...

    @abstractmethod
    def payload(self, state):
        """The terminal object a terminal state represents."""

    def valid_actions(self, state) -> list[int]:
        return [int(a) for a in np.flatnonzero(self.valid_mask(state))]

    def encode_batch(self, states) -> np.ndarray:
        if not states:
            return np.zeros((0, self.encoding_dim))
        return np.stack([self.encode(s) for s in states])

    def mask_batch(self, states) -> np.ndarray:
        return np.stack([self.valid_mask(s) for s in states])

    def log_pb(self, state) -> float:
        """Log-probability of the uniform backward policy stepping back from ``state``."""
        return -math.log(len(self.parents(state)))

    def enumerate_states(self, limit: int = 10**6) -> list:
        """All states reachable from the initial state in topological order."""
        s0 = self.initial_state()
        children: dict = {}
        indeg = {s0: 0}
        queue = deque([s0])
        while queue:
            s = queue.popleft()
            if self.is_terminal(s):
                children[s] = []
                continue
            kids = [self.step(s, a) for a in self.valid_actions(s)]
            children[s] = kids
            for k in kids:
                if k not in indeg:
                    indeg[k] = 0
                    queue.append(k)
                    if len(indeg) > limit:
                        raise ContractError(f"state space exceeds {limit} states")
                indeg[k] += 1
        order = []
        ready = deque([s0])
        while ready:
            s = ready.popleft()
            order.append(s)
            for k in children[s]:
                indeg[k] -= 1
                if indeg[k] == 0:
                    ready.append(k)
        return order

    def terminal_states(self, limit: int = 10**6) -> list:
        return [s for s in self.enumerate_states(limit) if self.is_terminal(s)]
