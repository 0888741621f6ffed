"""Multi-objective active learning with a GFlowNet mutation proposer.

Each round fits a bootstrap ensemble on k-mer features, trains a GFlowNet to
propose mutation sets on the current Pareto-optimal sequences using a
member-averaged hypervolume improvement as reward, greedily assembles a batch,
and queries the oracle.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import ContractError, Front, check_points, nondominated_filter
from .envs.mutation import MutationSet, mutation_apply
from .envs.ngrams import AMINO_ACIDS
from .gflownet import ConditionalPolicy, TrainingError, _rng, floored_log_reward, rollout, tb_loss_and_grads
from .metrics import hypervolume
from .neural import Adam, Mlp

log = logging.getLogger(__name__)


def featurize(x: str, k: int = 2, alphabet=AMINO_ACIDS, max_len: int | None = None) -> np.ndarray:
    """Normalized counts of every k'-mer for k' = 1..k, then ``len(x) / max_len``."""
    if k < 1:
        raise ContractError("k must be at least 1")
    index = {c: i for i, c in enumerate(alphabet)}
    A = len(alphabet)
    parts = []
    for kk in range(1, k + 1):
        counts = np.zeros(A**kk)
        windows = len(x) - kk + 1
        if windows > 0:
            for i in range(windows):
                code = 0
                for c in x[i:i + kk]:
                    code = code * A + index[c]
                counts[code] += 1
            counts /= windows
        parts.append(counts)
    parts.append(np.array([len(x) / (max_len or max(len(x), 1))]))
    return np.concatenate(parts)


def kmer_names(k: int, alphabet=AMINO_ACIDS) -> list[str]:
    names = []
    for kk in range(1, k + 1):
        names.extend("".join(t) for t in itertools.product(alphabet, repeat=kk))
    return names + ["length"]


class KmerFeaturizer(TransformerMixin, BaseEstimator):
    """Stateless transformer from sequences to k-mer frequency features."""

    def __init__(self, k=2, alphabet=AMINO_ACIDS, max_len=None):
        self.k = k
        self.alphabet = alphabet
        self.max_len = max_len

    def fit(self, X, y=None):
        self.n_features_out_ = len(kmer_names(self.k, self.alphabet))
        return self

    def transform(self, X):
        X = list(X)
        if not X:
            return np.zeros((0, len(kmer_names(self.k, self.alphabet))))
        return np.stack([featurize(x, self.k, self.alphabet, self.max_len) for x in X])

    def get_feature_names_out(self, input_features=None):
        return np.asarray(kmer_names(self.k, self.alphabet), dtype=object)


def mse_loss_and_grads(net: Mlp, X, Y):
    """Mean squared error over all outputs and its parameter gradients."""
    pred, cache = net.forward(X, return_cache=True)
    diff = pred - Y
    loss = float(np.mean(diff**2))
    grads, _ = net.backward(cache, 2.0 * diff / diff.size, input_grad=False)
    return loss, grads


class BootstrapEnsembleRegressor(RegressorMixin, BaseEstimator):
    """Ensemble of MLP regressors, each fit on its own bootstrap resample.

    Member predictions stand in for posterior function draws; their spread is
    the model's uncertainty.
    """

    def __init__(self, n_members=5, hidden=(64,), epochs=200, lr=1e-2, random_state=0):
        self.n_members = n_members
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, multi_output=True, dtype=np.float64)
        if len(X) < 2:
            raise ContractError("need at least two training points")
        if self.n_members < 1:
            raise ContractError("need at least one member")
        Y = y.reshape(len(y), -1)
        self.n_outputs_ = Y.shape[1]
        self.n_features_in_ = X.shape[1]
        rng = _rng(self.random_state)
        self.members_, self.bootstrap_indices_ = [], []
        for _ in range(self.n_members):
            idx = rng.integers(0, len(X), size=len(X))
            net = Mlp([X.shape[1], *self.hidden, self.n_outputs_], rng)
            net.params[-1][:] = Y[idx].mean(axis=0)
            opt = Adam(net.params, lr=self.lr)
            for _ in range(self.epochs):
                _, grads = mse_loss_and_grads(net, X[idx], Y[idx])
                opt.step(grads)
            self.members_.append(net)
            self.bootstrap_indices_.append(idx)
        return self

    def predict_members(self, X) -> np.ndarray:
        """Raw member predictions, shape ``(n_members, n_samples, n_outputs)``."""
        check_is_fitted(self, "members_")
        X = check_array(X, dtype=np.float64)
        return np.stack([m.forward(X) for m in self.members_])

    def predict(self, X):
        return self.predict_members(X).mean(axis=0)

    def predict_std(self, X):
        return self.predict_members(X).std(axis=0)


def posterior_draw(surrogate: BootstrapEnsembleRegressor, t: int, X) -> np.ndarray:
    """Member ``t``'s prediction clamped to [0, 1]."""
    check_is_fitted(surrogate, "members_")
    if not 0 <= t < len(surrogate.members_):
        raise ContractError(f"member index {t} out of range")
    X = check_array(np.atleast_2d(X), dtype=np.float64)
    return np.clip(surrogate.members_[t].forward(X), 0.0, 1.0)


def _covered(y, front, tol: float = 1e-12) -> bool:
    # tolerance absorbs BLAS round-off between batched and single-row predictions
    return len(front) > 0 and bool(np.any(np.all(front >= y - tol, axis=1)))


def hvi(y, pool, ref=None) -> float:
    """Hypervolume gained by adding ``y`` to ``pool``; exactly 0 when ``y`` is weakly dominated."""
    P = check_points(getattr(pool, "points", pool))
    y = np.asarray(y, dtype=np.float64)
    if len(P) and P.shape[1] != y.shape[0]:
        raise ContractError("dimension mismatch")
    if _covered(y, P):
        return 0.0
    base = hypervolume(P, ref) if len(P) else 0.0
    union = np.vstack([P, y[None, :]]) if len(P) else y[None, :]
    return max(hypervolume(union, ref) - base, 0.0)


class NEHVI:
    """Member-averaged hypervolume improvement over the current Pareto pool.

    For member ``t`` the reference set is that member's (clamped) predictions
    on the pool sequences plus on every sequence already committed to the
    batch, so a committed candidate scores zero when proposed again.
    """

    def __init__(self, surrogate, featurizer, pool_sequences, ref=None):
        self.surrogate = surrogate
        self.featurizer = featurizer
        self.pool = list(pool_sequences)
        self.ref = ref
        self.committed: list[str] = []
        self._refresh()

    def _draws(self, seqs) -> np.ndarray:
        X = self.featurizer.transform(seqs)
        return np.clip(self.surrogate.predict_members(X), 0.0, 1.0)

    def _refresh(self):
        draws = self._draws(self.pool + self.committed)
        self._fronts = [nondominated_filter(d).points for d in draws]
        self._base = [hypervolume(f, self.ref) for f in self._fronts]
        self._cache: dict[str, float] = {}

    def commit(self, seq: str):
        self.committed.append(seq)
        self._refresh()

    def __call__(self, seqs) -> np.ndarray:
        """Scores before flooring, one per sequence."""
        seqs = list(seqs)
        todo = sorted({s for s in seqs if s not in self._cache})
        if todo:
            draws = self._draws(todo)
            for j, s in enumerate(todo):
                gains = []
                for t, front in enumerate(self._fronts):
                    y = draws[t, j]
                    if _covered(y, front):
                        gains.append(0.0)
                    else:
                        gains.append(max(hypervolume(np.vstack([front, y]), self.ref) - self._base[t], 0.0))
                self._cache[s] = float(np.mean(gains))
        return np.array([self._cache[s] for s in seqs])


def nehvi_score(x: str, surrogate, featurizer, pool_sequences, committed=(), ref=None) -> float:
    acq = NEHVI(surrogate, featurizer, pool_sequences, ref)
    for c in committed:
        acq.commit(c)
    return float(acq([x])[0])


class MutationProposer(BaseEstimator):
    """GFlowNet over mutation sets, conditioned on the base sequence being edited.

    ``fit(bases, acquisition)`` trains with reward ``max(acquisition(x'), 1e-8)
    ** beta`` where ``x'`` is a base (drawn uniformly per episode) with the
    sampled substitutions applied.
    """

    def __init__(self, beta=16.0, delta=0.05, n_steps=200, batch_size=16, lr=1e-3, lr_logz=0.05,
                 max_mutations=4, hidden=(64, 64), random_state=0):
        self.beta = beta
        self.delta = delta
        self.n_steps = n_steps
        self.batch_size = batch_size
        self.lr = lr
        self.lr_logz = lr_logz
        self.max_mutations = max_mutations
        self.hidden = hidden
        self.random_state = random_state

    def fit(self, bases, acquisition):
        bases = list(bases)
        if not bases:
            raise ContractError("the Pareto pool is empty")
        if not self.beta > 0:
            raise ContractError("beta must be positive")
        env = MutationSet(bases, self.max_mutations)
        self.env_ = env
        self.rng_ = _rng(self.random_state)
        self.conds_ = np.stack([env.encode_base(b) for b in range(len(bases))])
        self.policy_ = ConditionalPolicy(env.encoding_dim, self.conds_.shape[1], env.n_actions,
                                         self.hidden, rng=self.rng_)
        opt_pf = Adam(self.policy_.policy_net.params, lr=self.lr)
        opt_z = Adam(self.policy_.logz_net.params, lr=self.lr_logz)
        self.loss_curve_ = []
        skipped = 0
        for _ in range(self.n_steps):
            trajs = self._rollout(self.batch_size, self.delta, self.rng_)
            scores = acquisition([env.sequence(t.terminal) for t in trajs])
            logr = floored_log_reward(scores, self.beta)
            loss, pg, zg, _ = tb_loss_and_grads(self.policy_, env, trajs, logr)
            if not (np.isfinite(loss) and opt_pf.step(pg) and opt_z.step(zg)):
                skipped += 1
            self.loss_curve_.append(loss)
        if skipped > 0.01 * self.n_steps:
            raise TrainingError(f"{skipped} of {self.n_steps} proposer steps were non-finite")
        return self

    def _rollout(self, n, delta, rng):
        picks = rng.integers(0, len(self.env_.bases), size=n)
        init = [self.env_.initial_state(int(b)) for b in picks]
        return rollout(self.policy_, self.env_, init, self.conds_[picks], delta, rng)

    def propose(self, n: int, random_state=None) -> list[str]:
        rng = self.rng_ if random_state is None else _rng(random_state)
        return [self.env_.sequence(t.terminal) for t in self._rollout(n, 0.0, rng)]


def random_mutants(bases, n: int, max_mutations: int, rng, alphabet=AMINO_ACIDS) -> list[str]:
    """``n`` sequences from uniformly chosen bases with 1..max_mutations random substitutions."""
    out = []
    A = len(alphabet)
    for _ in range(n):
        base = bases[int(rng.integers(len(bases)))]
        k = int(rng.integers(1, min(max_mutations, len(base)) + 1))
        locs = rng.choice(len(base), size=k, replace=False)
        muts = []
        for loc in locs:
            cur = alphabet.index(base[loc])
            tok = (cur + int(rng.integers(1, A))) % A
            muts.append((int(loc), tok))
        out.append(mutation_apply(base, muts, alphabet))
    return out


@dataclass
class ALConfig:
    n_rounds: int = 16
    batch_size: int = 16
    n_initial: int = 32
    seq_len: int = 24
    n_members: int = 5
    kmer: int = 2
    surrogate_hidden: tuple = (64,)
    surrogate_epochs: int = 150
    surrogate_lr: float = 1e-2
    max_mutations: int = 4
    beta: float = 16.0
    beta_decrement: float = 1.0
    delta: float = 0.05
    proposer_steps: int = 100
    proposer_batch: int = 16
    lr: float = 1e-3
    lr_logz: float = 0.05
    n_proposals: int = 128
    max_retries: int = 3
    hv_ref: float = -0.1
    seed: int = 0

    def __post_init__(self):
        self.surrogate_hidden = tuple(self.surrogate_hidden)
        if self.batch_size < 1 or self.n_rounds < 0 or self.n_initial < 2:
            raise ContractError("invalid round/batch sizes")
        if self.n_members < 1:
            raise ContractError("n_members must be positive")
        if self.beta < 1 or self.beta_decrement < 0:
            raise ContractError("beta must be >= 1 and beta_decrement >= 0")
        if self.max_mutations < 1:
            raise ContractError("max_mutations must be positive")


class MeteredOracle:
    """Counts how many sequences were sent to an objective function."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, seqs) -> np.ndarray:
        seqs = list(seqs)
        self.calls += len(seqs)
        return np.stack([np.asarray(self.fn(s), dtype=np.float64) for s in seqs])


@dataclass
class ALResult:
    sequences: list
    objectives: np.ndarray
    rounds: list = field(default_factory=list)

    @property
    def relative_hv(self) -> list[float]:
        return [r["relative_hv"] for r in self.rounds]

    def front(self) -> Front:
        return nondominated_filter(self.objectives, self.sequences)


def run_al_loop(oracle, cfg: ALConfig, proposer: str = "mogfn", initial=None, on_round=None) -> ALResult:
    """Run the active-learning rounds and record relative hypervolume after each.

    ``proposer`` is ``"mogfn"`` (GFlowNet proposals, greedy NEHVI batch
    selection) or ``"random"`` (uniformly random mutants of the Pareto pool).
    """
    if proposer not in ("mogfn", "random"):
        raise ContractError(f"unknown proposer {proposer!r}")
    rng = np.random.default_rng(cfg.seed)
    metered = MeteredOracle(oracle)
    if initial is None:
        initial = []
        while len(initial) < cfg.n_initial:
            s = "".join(AMINO_ACIDS[i] for i in rng.integers(0, len(AMINO_ACIDS), size=cfg.seq_len))
            if s not in initial:
                initial.append(s)
    seqs = list(dict.fromkeys(initial))
    Y = metered(seqs)
    d = Y.shape[1]
    ref = np.full(d, cfg.hv_ref)
    hv0 = hypervolume(Y, ref)
    if hv0 <= 0:
        raise ContractError("initial dataset has zero hypervolume; lower hv_ref")
    result = ALResult(seqs, Y)
    beta = float(cfg.beta)
    featurizer = KmerFeaturizer(cfg.kmer, max_len=cfg.seq_len).fit(seqs)

    def record(i, fallback=0):
        rec = {"round": i, "oracle_calls": metered.calls,
               "relative_hv": hypervolume(result.objectives, ref) / hv0,
               "beta": beta, "fallback_fills": fallback}
        result.rounds.append(rec)
        if on_round is not None:
            on_round(rec, result)

    record(0)
    for i in range(1, cfg.n_rounds + 1):
        known = set(result.sequences)
        pool = result.front().payloads
        if proposer == "random":
            batch = _fill_random(pool, known, cfg.batch_size, cfg.max_mutations, rng)
            fallback = 0
        else:
            X = featurizer.transform(result.sequences)
            surrogate = BootstrapEnsembleRegressor(cfg.n_members, cfg.surrogate_hidden, cfg.surrogate_epochs,
                                                   cfg.surrogate_lr, random_state=rng.integers(2**31))
            surrogate.fit(X, result.objectives)
            acq = NEHVI(surrogate, featurizer, pool, ref)
            model = MutationProposer(beta, cfg.delta, cfg.proposer_steps, cfg.proposer_batch, cfg.lr,
                                     cfg.lr_logz, cfg.max_mutations, random_state=rng.integers(2**31))
            model.fit(pool, acq)
            batch, fallback = _greedy_batch(model, acq, known, cfg, rng)
        result.sequences = result.sequences + batch
        result.objectives = np.vstack([result.objectives, metered(batch)])
        beta = max(1.0, beta - cfg.beta_decrement)
        record(i, fallback)
    return result


def _fill_random(pool, known, n, max_mutations, rng) -> list[str]:
    out: list[str] = []
    taken = set(known)
    while len(out) < n:
        for s in random_mutants(pool, n - len(out), max_mutations, rng):
            if s not in taken:
                taken.add(s)
                out.append(s)
    return out


def _greedy_batch(model: MutationProposer, acq: NEHVI, known, cfg: ALConfig, rng):
    candidates: list[str] = []
    seen = set(known)
    for _ in range(cfg.max_retries):
        for s in model.propose(cfg.n_proposals, rng):
            if s not in seen:
                seen.add(s)
                candidates.append(s)
        if len(candidates) >= cfg.batch_size:
            break
    fallback = 0
    if len(candidates) < cfg.batch_size:
        fallback = cfg.batch_size - len(candidates)
        log.info("proposer produced %d unique candidates; filling %d at random", len(candidates), fallback)
        candidates += _fill_random(acq.pool, seen, fallback, cfg.max_mutations, rng)
    batch = []
    remaining = list(candidates)
    while len(batch) < cfg.batch_size:
        scores = acq(remaining)
        j = int(np.argmax(scores))
        batch.append(remaining.pop(j))
        acq.commit(batch[-1])
    return batch, fallback


def config_dict(cfg: ALConfig) -> dict:
    out = asdict(cfg)
    out["surrogate_hidden"] = list(cfg.surrogate_hidden)
    return out
