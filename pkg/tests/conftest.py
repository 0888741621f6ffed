import sys

import numpy as np

from mogfn.envs.base import Environment, InvalidAction


class Bandit(Environment):
    """One decision among ``len(rewards)`` arms, each leading straight to a terminal.

    ``rewards`` has one objective vector per arm.
    """

    tree = True

    def __init__(self, rewards):
        self.rewards = np.asarray(rewards, dtype=np.float64)
        assert self.rewards.ndim == 2
        self.n_actions = len(self.rewards)
        self.n_objectives = self.rewards.shape[1]
        self.encoding_dim = 2

    def initial_state(self):
        return ("root",)

    def valid_mask(self, state):
        return np.full(self.n_actions, state == ("root",))

    def step(self, state, action):
        if state != ("root",) or not 0 <= action < self.n_actions:
            raise InvalidAction("bad action")
        return ("arm", int(action))

    def is_terminal(self, state):
        return state[0] == "arm"

    def parents(self, state):
        return [(("root",), state[1])] if self.is_terminal(state) else []

    def objectives(self, state):
        return self.rewards[state[1]].copy()

    def encode(self, state):
        return np.array([1.0, 0.0]) if state == ("root",) else np.array([0.0, 1.0])

    def payload(self, state):
        return state[1]


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(module.RESULTS):
            terminalreporter.write_line(module.RESULTS[n])
