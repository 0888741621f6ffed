"""Preference-conditional REINFORCE, the reward-maximizing counterpart to the GFlowNet sampler."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .core import ContractError
from .envs.base import Environment
from .gflownet import ConditionalPolicy, ConditionalSamplerMixin, TrainingError, _stack_steps, rollout
from .neural import Adam, log_softmax


def reinforce_loss_and_grads(policy: ConditionalPolicy, env: Environment, trajs, returns,
                             baseline: float, entropy_weight: float = 0.0):
    """Surrogate loss ``-mean((G - b) * sum log P_F) - entropy_weight * mean(sum H)``.

    Its gradient is the REINFORCE estimator with a constant baseline ``b``.
    Returns ``(loss, policy_grads)``.
    """
    B = len(trajs)
    returns = np.asarray(returns, dtype=np.float64)
    if returns.shape != (B,):
        raise ContractError("need one return per trajectory")
    states, actions, owner, masks = _stack_steps(env, trajs)
    conds = np.stack([t.cond for t in trajs]) if policy.cond_dim else np.zeros((B, 0))
    X = policy.inputs(env.encode_batch(states), conds[owner])
    logits, cache = policy.policy_net.forward(X, return_cache=True)
    logp = log_softmax(logits, masks)
    probs = np.exp(logp)
    rows = np.arange(len(actions))
    adv = (returns - baseline)[owner]
    safe_logp = np.where(masks, logp, 0.0)
    entropy = -(probs * safe_logp).sum(axis=1)
    loss = -float(np.sum(adv * logp[rows, actions]) / B) - entropy_weight * float(entropy.sum() / B)
    dlogits = probs.copy()
    dlogits[rows, actions] -= 1.0
    dlogits *= adv[:, None] / B
    if entropy_weight:
        # dH/dz_j = -p_j (log p_j + H)
        dlogits += entropy_weight / B * probs * (safe_logp + entropy[:, None])
    grads, _ = policy.policy_net.backward(cache, dlogits, input_grad=False)
    return loss, grads


class MOReinforce(ConditionalSamplerMixin, BaseEstimator):
    """Preference-conditional policy trained with REINFORCE on the scalarized reward.

    Each step draws one preference, rolls out ``batch_size`` on-policy
    trajectories and follows ``(G - b) * grad sum log P_F`` where ``G`` is the
    scalarized terminal reward and ``b`` a single moving-average baseline.
    """

    def __init__(self, lr=1e-3, batch_size=128, n_steps=1000, entropy_weight=0.0, baseline_decay=0.99,
                 alpha=1.5, scalarization="ws", thermometer_bins=0, hidden=(64, 64), random_state=0,
                 callback=None, callback_every=0):
        self.lr = lr
        self.batch_size = batch_size
        self.n_steps = n_steps
        self.entropy_weight = entropy_weight
        self.baseline_decay = baseline_decay
        self.alpha = alpha
        self.scalarization = scalarization
        self.thermometer_bins = thermometer_bins
        self.hidden = hidden
        self.random_state = random_state
        self.callback = callback
        self.callback_every = callback_every

    def fit(self, env: Environment, y=None):
        if not 0.0 <= self.baseline_decay < 1.0:
            raise ContractError("baseline_decay must lie in [0, 1)")
        if self.n_steps < 1 or self.batch_size < 1:
            raise ContractError("n_steps and batch_size must be positive")
        self._setup(env)
        policy = self.policy_
        opt = Adam(policy.policy_net.params, lr=self.lr)
        s0 = env.initial_state()
        self.baseline_ = None
        for step in range(self.n_steps):
            w = self.prior_.sample(self.rng_)
            cond = np.repeat(self.encode(w)[None, :], self.batch_size, axis=0)
            trajs = rollout(policy, env, [s0] * self.batch_size, cond, 0.0, self.rng_)
            R = np.stack([env.objectives(t.terminal) for t in trajs])
            G = self.scalarizer_.batch(R, w)
            if self.baseline_ is None:
                self.baseline_ = float(G.mean())
            loss, grads = reinforce_loss_and_grads(policy, env, trajs, G, self.baseline_,
                                                   self.entropy_weight)
            if not (np.isfinite(loss) and opt.step(grads)):
                self.n_skipped_ += 1
            self.loss_curve_.append(loss)
            self.baseline_ = self.baseline_decay * self.baseline_ + (1 - self.baseline_decay) * float(G.mean())
            if self.callback is not None and self.callback_every and (step + 1) % self.callback_every == 0:
                self.callback(self, step + 1)
        if self.n_skipped_ > 0.01 * self.n_steps:
            raise TrainingError(f"{self.n_skipped_} of {self.n_steps} steps had non-finite loss or gradients")
        return self
