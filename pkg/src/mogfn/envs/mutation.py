"""Sets of point substitutions applied to a base sequence."""

from __future__ import annotations

import numpy as np

from ..core import ContractError
from .base import Environment, InvalidAction
from .ngrams import AMINO_ACIDS


def mutation_apply(x: str, mutations, alphabet=AMINO_ACIDS) -> str:
    """Substitute ``alphabet[v]`` (or ``v`` itself when it is a letter) at each location ``l``."""
    seq = list(x)
    seen = set()
    for loc, tok in mutations:
        if loc in seen:
            raise InvalidAction(f"location {loc} mutated twice")
        if not 0 <= loc < len(seq):
            raise InvalidAction(f"location {loc} outside sequence of length {len(seq)}")
        seen.add(loc)
        seq[loc] = tok if isinstance(tok, str) else alphabet[tok]
    return "".join(seq)


class MutationSet(Environment):
    """Build a set of at most ``max_mutations`` substitutions on one of ``bases``.

    A state is ``(base_index, mutations, done)`` where ``mutations`` is a sorted
    tuple of ``(location, token_index)``. Action ``l * A + v`` writes token
    ``v`` at location ``l``; the last action stops. Mutated locations are
    masked, as are no-op substitutions, and stopping needs at least one
    mutation so the proposal always differs from its base.
    """

    def __init__(self, bases, max_mutations: int = 4, alphabet=AMINO_ACIDS, objective_fn=None,
                 n_objectives: int = 1):
        bases = [str(b) for b in bases]
        if not bases:
            raise ContractError("need at least one base sequence")
        lengths = {len(b) for b in bases}
        if len(lengths) != 1:
            raise ContractError("all base sequences must share one length")
        if max_mutations < 1:
            raise ContractError("max_mutations must be positive")
        self.alphabet = tuple(alphabet)
        self.bases = bases
        self.base_tokens = [tuple(self.alphabet.index(c) for c in b) for b in bases]
        self.length = lengths.pop()
        self.max_mutations = max_mutations
        A = len(self.alphabet)
        self.stop = self.length * A
        self.n_actions = self.stop + 1
        self.encoding_dim = self.length * (A + 1)
        self.objective_fn = objective_fn
        self.n_objectives = n_objectives

    def initial_state(self, base: int = 0):
        return (int(base), (), False)

    def is_terminal(self, state) -> bool:
        return bool(state[2])

    def valid_mask(self, state) -> np.ndarray:
        b, muts, done = state
        mask = np.zeros(self.n_actions, dtype=bool)
        if done:
            return mask
        A = len(self.alphabet)
        if len(muts) < self.max_mutations:
            grid = np.ones((self.length, A), dtype=bool)
            grid[np.arange(self.length), self.base_tokens[b]] = False
            for loc, _ in muts:
                grid[loc] = False
            mask[:self.stop] = grid.ravel()
        if muts:
            mask[self.stop] = True
        return mask

    def step(self, state, action: int):
        b, muts, done = state
        if done:
            raise InvalidAction("cannot act from a terminal state")
        if not self.valid_mask(state)[action]:
            raise InvalidAction(f"action {action} invalid at {state}")
        if action == self.stop:
            return (b, muts, True)
        loc, tok = divmod(int(action), len(self.alphabet))
        return (b, tuple(sorted(muts + ((loc, tok),))), False)

    def parents(self, state) -> list:
        b, muts, done = state
        if done:
            return [((b, muts, False), self.stop)]
        A = len(self.alphabet)
        return [((b, muts[:k] + muts[k + 1:], False), loc * A + tok)
                for k, (loc, tok) in enumerate(muts)]

    def log_pb(self, state) -> float:
        b, muts, done = state
        return 0.0 if done else -float(np.log(len(muts)))

    def sequence(self, state) -> str:
        return mutation_apply(self.bases[state[0]], state[1], self.alphabet)

    def payload(self, state) -> str:
        return self.sequence(state)

    def objectives(self, state) -> np.ndarray:
        if self.objective_fn is None:
            raise ContractError("no objective function attached")
        return np.asarray(self.objective_fn(self.sequence(state)), dtype=np.float64)

    def encode(self, state) -> np.ndarray:
        return self.encode_batch([state])[0]

    def encode_batch(self, states) -> np.ndarray:
        n, L, A = len(states), self.length, len(self.alphabet)
        onehot = np.zeros((n, L, A))
        touched = np.zeros((n, L))
        pos = np.arange(L)
        for r, (b, muts, _) in enumerate(states):
            toks = list(self.base_tokens[b])
            for loc, tok in muts:
                toks[loc] = tok
                touched[r, loc] = 1.0
            onehot[r, pos, toks] = 1.0
        return np.concatenate([onehot.reshape(n, L * A), touched], axis=1)

    def encode_base(self, b: int) -> np.ndarray:
        v = np.zeros((self.length, len(self.alphabet)))
        v[np.arange(self.length), self.base_tokens[b]] = 1.0
        return v.ravel()
