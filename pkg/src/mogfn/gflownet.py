"""Preference-conditional GFlowNets trained with trajectory balance.

The policy is an MLP over ``state_encoding ++ conditioning`` with one logit per
action, plus a second MLP mapping the conditioning vector to ``log Z``. The
backward policy is analytic (uniform over parents, constant on trees), so the
only learned quantities are the forward policy and ``log Z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .core import Candidate, ContractError, check_preference
from .envs.base import Environment
from .neural import Adam, Mlp, log_softmax, softmax
from .scalarize import Dirichlet, Scalarization, Thermometer, encode_preference

MAX_EXACT_STATES = 10**6
REWARD_FLOOR = 1e-8


def floored_log_reward(scores, beta: float) -> np.ndarray:
    """``beta * log max(s, REWARD_FLOOR)``; the floor acts on the scalarized score."""
    return beta * np.log(np.maximum(np.asarray(scores, dtype=np.float64), REWARD_FLOOR))


class TrainingError(RuntimeError):
    pass


def _rng(random_state) -> np.random.Generator:
    if isinstance(random_state, np.random.Generator):
        return random_state
    if isinstance(random_state, np.random.RandomState):
        return np.random.default_rng(random_state.randint(2**31))
    return np.random.default_rng(random_state)


class ConditionalPolicy:
    """Forward-policy and ``log Z`` networks sharing a conditioning vector.

    ``cond_dim == 0`` gives an unconditional sampler whose ``log Z`` is a
    single learned scalar.
    """

    def __init__(self, state_dim: int, cond_dim: int, n_actions: int, hidden=(64, 64),
                 logz_hidden=(64,), rng=None):
        rng = _rng(rng)
        self.state_dim = state_dim
        self.cond_dim = cond_dim
        self.n_actions = n_actions
        self.policy_net = Mlp([state_dim + cond_dim, *hidden, n_actions], rng)
        if cond_dim > 0:
            self.logz_net = Mlp([cond_dim, *logz_hidden, 1], rng)
        else:
            self.logz_net = Mlp([1, 1], rng)
            self.logz_net.params[0][:] = 0.0
        self.logz_net.params[-1][:] = 0.0

    def copy(self) -> "ConditionalPolicy":
        other = object.__new__(ConditionalPolicy)
        other.__dict__.update(self.__dict__)
        other.policy_net = self.policy_net.copy()
        other.logz_net = self.logz_net.copy()
        return other

    def _logz_input(self, conds: np.ndarray) -> np.ndarray:
        if self.cond_dim == 0:
            return np.ones((len(conds), 1))
        return conds

    def inputs(self, enc: np.ndarray, conds: np.ndarray) -> np.ndarray:
        if self.cond_dim == 0:
            return enc
        return np.concatenate([enc, conds], axis=1)

    def logits(self, enc, conds) -> np.ndarray:
        return self.policy_net.forward(self.inputs(enc, conds))

    def log_z(self, conds) -> np.ndarray:
        conds = np.atleast_2d(np.asarray(conds, dtype=np.float64))
        if self.cond_dim == 0:
            conds = np.zeros((len(conds), 0))
        return self.logz_net.forward(self._logz_input(conds))[:, 0]

    def nets(self) -> dict:
        return {"policy": self.policy_net, "logz": self.logz_net}


@dataclass
class Trajectory:
    """States visited from the initial state to a terminal one, with the actions taken."""

    states: list
    actions: list
    cond: np.ndarray
    preference: np.ndarray | None = None
    log_pf: float = 0.0
    log_pb: float = 0.0
    masks: list = field(default_factory=list, repr=False)

    @property
    def terminal(self):
        return self.states[-1]

    def __len__(self):
        return len(self.actions)


def rollout(policy: ConditionalPolicy, env: Environment, init_states, conds, delta: float,
            rng: np.random.Generator, preferences=None) -> list[Trajectory]:
    """Run trajectories in lockstep, one per initial state.

    Actions come from ``(1 - delta) * P_F + delta * Uniform(valid actions)``;
    ``log_pf`` records the unmixed forward log-probability.
    """
    if not 0.0 <= delta < 1.0:
        raise ContractError("delta must lie in [0, 1)")
    conds = np.atleast_2d(np.asarray(conds, dtype=np.float64))
    n = len(init_states)
    if conds.shape[0] != n:
        raise ContractError("need one conditioning vector per trajectory")
    trajs = [Trajectory([s], [], conds[i], None if preferences is None else preferences[i])
             for i, s in enumerate(init_states)]
    current = list(init_states)
    active = [i for i in range(n) if not env.is_terminal(current[i])]
    while active:
        states = [current[i] for i in active]
        enc = env.encode_batch(states)
        masks = env.mask_batch(states)
        logits = policy.logits(enc, conds[active])
        logp = log_softmax(logits, masks)
        probs = softmax(logits, masks)
        if delta > 0:
            uniform = masks / masks.sum(axis=1, keepdims=True)
            probs = (1.0 - delta) * probs + delta * uniform
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(len(active)) * cdf[:, -1]
        actions = (cdf < u[:, None]).sum(axis=1)
        # guard against float round-off landing on a masked trailing action
        for r in range(len(active)):
            if not masks[r, actions[r]]:
                actions[r] = np.flatnonzero(masks[r])[-1]
        still = []
        for r, i in enumerate(active):
            a = int(actions[r])
            nxt = env.step(current[i], a)
            t = trajs[i]
            t.actions.append(a)
            t.masks.append(masks[r])
            t.states.append(nxt)
            t.log_pf += float(logp[r, a])
            t.log_pb += env.log_pb(nxt)
            current[i] = nxt
            if not env.is_terminal(nxt):
                still.append(i)
        active = still
    return trajs


def _stack_steps(env: Environment, trajs):
    states, actions, owner, masks = [], [], [], []
    for k, t in enumerate(trajs):
        states.extend(t.states[:-1])
        actions.extend(t.actions)
        owner.extend([k] * len(t.actions))
        masks.extend(t.masks if len(t.masks) == len(t.actions)
                     else [env.valid_mask(s) for s in t.states[:-1]])
    return states, np.asarray(actions, dtype=np.int64), np.asarray(owner, dtype=np.int64), np.asarray(masks)


def tb_loss_and_grads(policy: ConditionalPolicy, env: Environment, trajs, log_rewards,
                      backward: str = "analytic"):
    """Mean trajectory-balance loss over ``trajs`` and its parameter gradients.

    Returns ``(loss, policy_grads, logz_grads, residuals)``. ``backward`` picks
    how ``sum log P_B`` is obtained: ``"analytic"`` uses the environment's
    closed form, ``"parents"`` counts parents explicitly.
    """
    B = len(trajs)
    log_rewards = np.asarray(log_rewards, dtype=np.float64)
    if log_rewards.shape != (B,):
        raise ContractError("need one log-reward per trajectory")
    states, actions, owner, masks = _stack_steps(env, trajs)
    conds = np.stack([t.cond for t in trajs]) if policy.cond_dim else np.zeros((B, 0))
    X = policy.inputs(env.encode_batch(states), conds[owner])
    logits, cache = policy.policy_net.forward(X, return_cache=True)
    logp = log_softmax(logits, masks)
    rows = np.arange(len(actions))
    lp_taken = logp[rows, actions]
    sum_lpf = np.bincount(owner, weights=lp_taken, minlength=B)
    if backward == "analytic":
        sum_lpb = np.array([sum(env.log_pb(s) for s in t.states[1:]) for t in trajs])
    elif backward == "parents":
        sum_lpb = np.array([sum(-math.log(len(env.parents(s))) for s in t.states[1:]) for t in trajs])
    else:
        raise ContractError(f"unknown backward mode {backward!r}")
    logz, zcache = policy.logz_net.forward(policy._logz_input(conds), return_cache=True)
    resid = logz[:, 0] + sum_lpf - log_rewards - sum_lpb
    loss = float(np.mean(resid**2))
    g = 2.0 * resid / B
    probs = np.exp(logp)
    dlogits = -probs
    dlogits[rows, actions] += 1.0
    dlogits *= g[owner][:, None]
    pgrads, _ = policy.policy_net.backward(cache, dlogits, input_grad=False)
    zgrads, _ = policy.logz_net.backward(zcache, g[:, None], input_grad=False)
    return loss, pgrads, zgrads, resid


def tb_loss(policy: ConditionalPolicy, env: Environment, traj: Trajectory, reward: float,
            backward: str = "analytic"):
    """Trajectory-balance loss of one trajectory; ``reward`` must be positive."""
    if not reward > 0:
        raise ContractError("reward must be positive; floor it before calling tb_loss")
    loss, pg, zg, _ = tb_loss_and_grads(policy, env, [traj], np.array([math.log(reward)]), backward)
    return loss, pg, zg


def exact_policy_distribution(policy: ConditionalPolicy, env: Environment, cond,
                              states: list | None = None) -> dict:
    """Terminal distribution of the ``delta = 0`` policy by forward flow propagation.

    ``states`` may pass a precomputed topological order of the state space.
    """
    if states is None:
        states = env.enumerate_states(MAX_EXACT_STATES)
    elif len(states) > MAX_EXACT_STATES:
        raise ContractError("state space too large for exact enumeration")
    inner = [s for s in states if not env.is_terminal(s)]
    cond = np.asarray(cond, dtype=np.float64).reshape(1, -1)
    enc = env.encode_batch(inner)
    masks = env.mask_batch(inner)
    logits = policy.logits(enc, np.repeat(cond, len(inner), axis=0))
    probs = softmax(logits, masks)
    row = {s: k for k, s in enumerate(inner)}
    flow = {s: 0.0 for s in states}
    flow[states[0]] = 1.0
    out = {}
    for s in states:
        f = flow[s]
        if env.is_terminal(s):
            out[s] = f
            continue
        if f == 0.0:
            continue
        p = probs[row[s]]
        for a in np.flatnonzero(masks[row[s]]):
            flow[env.step(s, int(a))] += f * p[a]
    return out


def target_distribution(env: Environment, terminals, preference, scalarization: Scalarization,
                        beta: float) -> np.ndarray:
    """Normalized floored ``R(x|w)^beta`` over ``terminals``, computed in log space."""
    R = np.stack([env.objectives(s) for s in terminals])
    logr = floored_log_reward(scalarization.batch(R, preference), beta)
    logr -= logr.max()
    p = np.exp(logr)
    return p / p.sum()


class ConditionalSamplerMixin:
    """Sampling and closed-form diagnostics shared by the preference-conditional estimators."""

    def _setup(self, env: Environment):
        self.env_ = env
        self.scalarizer_ = Scalarization(self.scalarization)
        self.encoding_ = Thermometer(self.thermometer_bins)
        self.prior_ = Dirichlet(self.alpha, env.n_objectives)
        self.rng_ = _rng(self.random_state)
        self.policy_ = ConditionalPolicy(env.encoding_dim, self.encoding_.width(env.n_objectives),
                                         env.n_actions, self.hidden, rng=self.rng_)
        self.loss_curve_ = []
        self.n_skipped_ = 0

    def encode(self, preference) -> np.ndarray:
        return encode_preference(preference, self.encoding_)

    def sample(self, preference, n: int, random_state=None) -> list[Candidate]:
        return sample_candidates(self, preference, n, random_state)

    def exact_distribution(self, preference, states=None) -> dict:
        return exact_policy_distribution(self.policy_, self.env_, self.encode(preference), states)


class PreferenceConditionalGFN(ConditionalSamplerMixin, BaseEstimator):
    """Preference-conditional GFlowNet sampler.

    ``fit(env)`` runs the trajectory-balance training loop: every step draws
    one preference from a symmetric Dirichlet, rolls out ``batch_size``
    trajectories under the ``delta``-mixed policy and takes one Adam step on
    the mean loss, with reward ``max(scalarize(R(x), w), 1e-8) ** beta``.

    After fitting, ``sample(preference, n)`` returns candidates and
    ``exact_distribution``/``l1_gap`` give closed-form diagnostics on small
    environments.
    """

    def __init__(self, beta=1.0, delta=0.05, n_steps=1000, batch_size=128, lr=0.01, lr_logz=0.01,
                 alpha=1.5, scalarization="ws", thermometer_bins=0, hidden=(64, 64),
                 random_state=0, callback=None, callback_every=0):
        self.beta = beta
        self.delta = delta
        self.n_steps = n_steps
        self.batch_size = batch_size
        self.lr = lr
        self.lr_logz = lr_logz
        self.alpha = alpha
        self.scalarization = scalarization
        self.thermometer_bins = thermometer_bins
        self.hidden = hidden
        self.random_state = random_state
        self.callback = callback
        self.callback_every = callback_every

    def _validate(self):
        if not self.beta > 0:
            raise ContractError("beta must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise ContractError("delta must lie in [0, 1)")
        if self.n_steps < 1 or self.batch_size < 1:
            raise ContractError("n_steps and batch_size must be positive")

    def log_reward(self, objectives, preference) -> np.ndarray:
        s = self.scalarizer_.batch(np.atleast_2d(objectives), preference)
        return floored_log_reward(s, self.beta)

    def fit(self, env: Environment, y=None):
        self._validate()
        self._setup(env)
        policy = self.policy_
        opt_pf = Adam(policy.policy_net.params, lr=self.lr)
        opt_z = Adam(policy.logz_net.params, lr=self.lr_logz)
        s0 = env.initial_state()
        for step in range(self.n_steps):
            w = self.prior_.sample(self.rng_)
            cond = np.repeat(self.encode(w)[None, :], self.batch_size, axis=0)
            trajs = rollout(policy, env, [s0] * self.batch_size, cond, self.delta, self.rng_)
            R = np.stack([env.objectives(t.terminal) for t in trajs])
            loss, pg, zg, _ = tb_loss_and_grads(policy, env, trajs, self.log_reward(R, w))
            if not np.isfinite(loss):
                self.n_skipped_ += 1
                self.loss_curve_.append(float("nan"))
                continue
            ok = opt_pf.step(pg)
            ok = opt_z.step(zg) and ok
            if not ok:
                self.n_skipped_ += 1
            self.loss_curve_.append(loss)
            if self.callback is not None and self.callback_every and (step + 1) % self.callback_every == 0:
                self.callback(self, step + 1)
        if self.n_skipped_ > 0.01 * self.n_steps:
            raise TrainingError(f"{self.n_skipped_} of {self.n_steps} steps had non-finite loss or gradients")
        return self

    def l1_gap(self, preference, states=None) -> float:
        return l1_distribution_gap(self, preference, states)


def sample_candidates(model, preference, n: int, random_state=None) -> list[Candidate]:
    """Draw ``n`` i.i.d. terminal objects from a fitted sampler at ``delta = 0``."""
    if n < 1:
        raise ContractError("need at least one sample")
    env = model.env_
    w = check_preference(preference, env.n_objectives)
    rng = _rng(model.rng_ if random_state is None else random_state)
    cond = np.repeat(model.encode(w)[None, :], n, axis=0)
    trajs = rollout(model.policy_, env, [env.initial_state()] * n, cond, 0.0, rng)
    return [Candidate(env.payload(t.terminal), env.objectives(t.terminal)) for t in trajs]


def l1_distribution_gap(model, preference, states=None) -> float:
    """Mean over terminals of ``|pi(x|w) - R(x|w)^beta / Z|``."""
    env = model.env_
    w = check_preference(preference, env.n_objectives)
    dist = model.exact_distribution(w, states)
    terminals = list(dist)
    pi = np.array([dist[s] for s in terminals])
    target = target_distribution(env, terminals, w, model.scalarizer_, model.beta)
    return float(np.mean(np.abs(pi - target)))
