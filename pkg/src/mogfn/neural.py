"""A small dense-network engine: MLP forward/backward, Adam, masked softmax.

Float64 throughout. Networks operate on batches (``(n, in)`` arrays); a 1-D
input is treated as a batch of one and the output is squeezed back.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ContractError

LEAKY_SLOPE = 0.01
MASK_PENALTY = -1e9


class Mlp:
    """Fully connected network, LeakyReLU on hidden layers, linear output."""

    def __init__(self, sizes, rng: np.random.Generator | None = None):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ContractError(f"invalid layer sizes {sizes}")
        self.sizes = sizes
        rng = np.random.default_rng(0) if rng is None else rng
        self.params: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            self.params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.params.append(rng.uniform(-bound, bound, size=fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    def copy(self) -> "Mlp":
        other = object.__new__(Mlp)
        other.sizes = list(self.sizes)
        other.params = [p.copy() for p in self.params]
        return other

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        X = x[None, :] if squeeze else x
        if X.ndim != 2 or X.shape[1] != self.sizes[0]:
            raise ContractError(f"expected input width {self.sizes[0]}, got shape {x.shape}")
        return X, squeeze

    def forward(self, x, return_cache: bool = False):
        X, squeeze = self._check_input(x)
        cache = [X]
        h = X
        for k in range(self.n_layers):
            W, b = self.params[2 * k], self.params[2 * k + 1]
            z = h @ W + b
            if k < self.n_layers - 1:
                h = np.where(z > 0, z, LEAKY_SLOPE * z)
                cache.append(z)
                cache.append(h)
            else:
                h = z
        out = h[0] if squeeze else h
        if return_cache:
            return out, (cache, squeeze)
        return out

    __call__ = forward

    def backward(self, cache, upstream, input_grad: bool = True):
        """Gradients of ``sum(upstream * forward(x))``.

        Returns ``(param_grads, input_grad)`` with ``param_grads`` aligned to
        :attr:`params`; the input gradient is None when not requested.
        """
        acts, squeeze = cache
        G = np.asarray(upstream, dtype=np.float64)
        if squeeze:
            G = G[None, :]
        if G.shape != (acts[0].shape[0], self.sizes[-1]):
            raise ContractError(f"upstream shape {G.shape} does not match output")
        grads = [None] * len(self.params)
        for k in reversed(range(self.n_layers)):
            h_in = acts[0] if k == 0 else acts[2 * k]
            W = self.params[2 * k]
            grads[2 * k] = h_in.T @ G
            grads[2 * k + 1] = G.sum(axis=0)
            if k == 0 and not input_grad:
                return grads, None
            G = G @ W.T
            if k > 0:
                z = acts[2 * k - 1]
                G = G * np.where(z > 0, 1.0, LEAKY_SLOPE)
        return grads, (G[0] if squeeze else G)

    def state_dict(self) -> dict:
        out = {}
        for k in range(self.n_layers):
            out[f"layer{k}.weight"] = self.params[2 * k]
            out[f"layer{k}.bias"] = self.params[2 * k + 1]
        return out

    def load_state_dict(self, state: dict):
        for k in range(self.n_layers):
            for j, name in enumerate((f"layer{k}.weight", f"layer{k}.bias")):
                arr = np.asarray(state[name], dtype=np.float64)
                if arr.shape != self.params[2 * k + j].shape:
                    raise ContractError(f"shape mismatch for {name}")
                self.params[2 * k + j] = arr.copy()


@dataclass
class AdamState:
    shapes: list
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    skipped: int = 0

    def __post_init__(self):
        if not self.m:
            self.m = [np.zeros(s) for s in self.shapes]
            self.v = [np.zeros(s) for s in self.shapes]


class Adam:
    """Bias-corrected Adam over a list of arrays, updated in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.state = AdamState([p.shape for p in params], lr, beta1, beta2, eps)

    def step(self, grads) -> bool:
        """Apply one update. Returns False (and leaves params alone) on non-finite grads."""
        return adam_step(self.params, grads, self.state)


def adam_step(params, grads, state: AdamState) -> bool:
    if len(params) != len(grads):
        raise ContractError("params and grads differ in length")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ContractError(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")
    if not all(np.all(np.isfinite(g)) for g in grads):
        state.skipped += 1
        return False
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return True


def masked_logits(logits, mask=None) -> np.ndarray:
    logits = np.asarray(logits, dtype=np.float64)
    if mask is None:
        return logits
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != logits.shape:
        raise ContractError("mask shape does not match logits")
    if not np.all(mask.any(axis=-1)):
        raise ContractError("every row needs at least one unmasked entry")
    return np.where(mask, logits, logits + MASK_PENALTY)


def log_softmax(logits, mask=None) -> np.ndarray:
    z = masked_logits(logits, mask)
    z = z - z.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    if mask is not None:
        out = np.where(mask, out, -np.inf)
    return out


def softmax(logits, mask=None) -> np.ndarray:
    """Numerically stable softmax; masked entries get exactly zero probability."""
    z = masked_logits(logits, mask)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    if mask is not None:
        e = np.where(mask, e, 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def save_checkpoint(path, nets: dict):
    """Write named networks to JSON; floats round-trip exactly via ``repr``."""
    blob = {}
    for net_name, net in nets.items():
        blob[net_name] = {
            "sizes": net.sizes,
            "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                       for k, v in net.state_dict().items()},
        }
    with open(path, "w") as fh:
        json.dump(blob, fh)


def load_checkpoint(path) -> dict:
    with open(path) as fh:
        blob = json.load(fh)
    nets = {}
    for net_name, spec in blob.items():
        net = Mlp(spec["sizes"])
        net.load_state_dict({k: np.asarray(v["data"], dtype=np.float64).reshape(v["shape"])
                             for k, v in spec["params"].items()})
        nets[net_name] = net
    return nets
