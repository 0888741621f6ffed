"""Left-to-right string generation scored by n-gram occurrence counts."""

from __future__ import annotations

import numpy as np

from ..core import ContractError
from .base import Environment, InvalidAction

AMINO_ACIDS = ("A", "R", "N", "D", "C", "E", "Q", "G", "H", "I",
               "L", "K", "M", "F", "P", "S", "T", "W", "Y", "V")

TASKS = {
    "2-unigrams": ("A", "C"),
    "2-bigrams": ("AC", "CV"),
    "3-unigrams": ("A", "C", "V"),
    "3-bigrams": ("AC", "CV", "VA"),
    "4-unigrams": ("A", "C", "V", "W"),
    "4-bigrams": ("AC", "CV", "VA", "AW"),
}


def ngram_counts(x: str, patterns) -> np.ndarray:
    """Overlapping occurrence count of each pattern in ``x``."""
    out = np.zeros(len(patterns), dtype=np.int64)
    for k, p in enumerate(patterns):
        n = len(p)
        out[k] = sum(1 for i in range(len(x) - n + 1) if x[i:i + n] == p)
    return out


class NGrams(Environment):
    """Append one token per step, or emit end-of-sequence.

    States are ``(tokens, done)`` with ``tokens`` a tuple of alphabet indices.
    Actions ``0..A-1`` append a letter and action ``A`` ends the sequence; the
    empty string cannot be ended and a full-length one can only be ended.
    """

    tree = True

    def __init__(self, patterns=TASKS["3-bigrams"], max_len: int = 36, alphabet=AMINO_ACIDS):
        patterns = tuple(patterns)
        alphabet = tuple(alphabet)
        if not patterns:
            raise ContractError("need at least one pattern")
        if max_len < 1:
            raise ContractError("max_len must be positive")
        for p in patterns:
            if not p or len(p) > max_len:
                raise ContractError(f"pattern {p!r} is empty or longer than max_len")
            if set(p) - set(alphabet):
                raise ContractError(f"pattern {p!r} uses letters outside the alphabet")
        self.patterns = patterns
        self.max_len = max_len
        self.alphabet = alphabet
        self.eos = len(alphabet)
        self.n_actions = len(alphabet) + 1
        self.n_objectives = len(patterns)
        # one column per letter plus a padding column, then the length feature
        self.encoding_dim = max_len * (len(alphabet) + 1) + 1
        self._norm = np.array([max_len - len(p) + 1 for p in patterns], dtype=np.float64)

    def initial_state(self):
        return ((), False)

    def is_terminal(self, state) -> bool:
        return bool(state[1])

    def valid_mask(self, state) -> np.ndarray:
        tokens, done = state
        mask = np.zeros(self.n_actions, dtype=bool)
        if done:
            return mask
        if len(tokens) < self.max_len:
            mask[:self.eos] = True
        if tokens:
            mask[self.eos] = True
        return mask

    def step(self, state, action: int):
        tokens, done = state
        if done:
            raise InvalidAction("cannot act from a terminal state")
        if action == self.eos and tokens:
            return (tokens, True)
        if 0 <= action < self.eos and len(tokens) < self.max_len:
            return (tokens + (int(action),), False)
        raise InvalidAction(f"action {action} invalid at length {len(tokens)}")

    def parents(self, state) -> list:
        tokens, done = state
        if done:
            return [((tokens, False), self.eos)]
        if not tokens:
            return []
        return [((tokens[:-1], False), tokens[-1])]

    def log_pb(self, state) -> float:
        return 0.0

    def to_string(self, tokens) -> str:
        return "".join(self.alphabet[t] for t in tokens)

    def payload(self, state) -> str:
        return self.to_string(state[0])

    def objectives_of(self, x: str) -> np.ndarray:
        return ngram_counts(x, self.patterns) / self._norm

    def objectives(self, state) -> np.ndarray:
        return self.objectives_of(self.payload(state))

    def encode(self, state) -> np.ndarray:
        return self.encode_batch([state])[0]

    def encode_batch(self, states) -> np.ndarray:
        n, L, A1 = len(states), self.max_len, len(self.alphabet) + 1
        toks = np.full((n, L), A1 - 1, dtype=np.int64)
        lengths = np.zeros(n)
        for r, (tokens, _) in enumerate(states):
            toks[r, :len(tokens)] = tokens
            lengths[r] = len(tokens)
        out = np.zeros((n, L * A1 + 1))
        out[np.arange(n)[:, None], np.arange(L)[None, :] * A1 + toks] = 1.0
        out[:, -1] = lengths / L
        return out


def ngram_objectives(x: str, env: NGrams) -> np.ndarray:
    return env.objectives_of(x)
