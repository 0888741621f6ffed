"""Command-line experiment runner.

Every run writes into its output directory: ``config.json``,
``preferences.json``, ``train_log.jsonl``, ``front.csv``, ``metrics.csv`` and
``summary.json``. All files are written atomically.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, config_from_dict, parse_config
from .core import ContractError, Front, nondominated_filter
from .envs import HyperGrid, NGrams
from .evaluate import evaluate_sampler, r2_reference_vectors
from .gflownet import PreferenceConditionalGFN, TrainingError
from .metrics import gd_plus, hypervolume, lattice_preferences, r2_indicator, topk_diversity, topk_reward
from .mobo import config_dict, run_al_loop
from .reinforce import MOReinforce
from .scalarize import Scalarization

log = logging.getLogger("mogfn")

METRIC_KEYS = ("hv", "r2", "gd_plus", "topk_reward", "topk_diversity")


# --- file helpers ---

def atomic_write(path, text: str):
    """Write ``text`` to ``path`` via a temporary file in the same directory and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def git_blob_hash(text: str) -> str:
    """Content hash computed the way ``git hash-object`` does."""
    data = text.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


# --- pipelines ---

def make_env(cfg: ExperimentConfig):
    if cfg.task == "hypergrid":
        return HyperGrid(cfg.env.side, cfg.env.objectives)
    return NGrams(cfg.env.patterns, cfg.env.max_len)


def make_sampler(cfg: ExperimentConfig, callback=None):
    t = cfg.train
    common = dict(n_steps=t.n_steps, batch_size=t.batch_size, lr=t.lr, alpha=t.alpha,
                  scalarization=t.scalarization, thermometer_bins=t.thermometer_bins, hidden=t.hidden,
                  random_state=cfg.seed, callback=callback, callback_every=cfg.eval.interval)
    if cfg.method == "mogfn_pc":
        return PreferenceConditionalGFN(beta=t.beta, delta=t.delta, lr_logz=t.lr_logz, **common)
    return MOReinforce(entropy_weight=t.entropy_weight, baseline_decay=t.baseline_decay, **common)


def true_front(env) -> Front | None:
    if isinstance(env, HyperGrid):
        return nondominated_filter(env.all_objectives(),
                                   [env.payload(s) for s in env.terminal_states()])
    return None


def _metrics_row(ev: dict) -> dict:
    return {k: ev[k] for k in METRIC_KEYS if k in ev}


def run_sampler(cfg: ExperimentConfig, exact: bool = False) -> dict:
    env = make_env(cfg)
    prefs = lattice_preferences(env.n_objectives, cfg.eval.n_preferences, cfg.eval.preference_seed)
    truth = true_front(env)
    rows = []

    def evaluate(model):
        return evaluate_sampler(model, prefs, cfg.eval.n_samples, cfg.eval.k, random_state=cfg.seed,
                                truth=truth)

    def callback(model, step):
        losses = model.loss_curve_[len(model.loss_curve_) - cfg.eval.interval:]
        row = {"step": step, "loss": float(np.nanmean(losses))}
        row.update(_metrics_row(evaluate(model)))
        rows.append(row)

    model = make_sampler(cfg, callback if cfg.eval.interval else None)
    model.fit(env)
    ev = evaluate(model)
    if not rows or rows[-1]["step"] != cfg.train.n_steps:
        tail = model.loss_curve_[-max(cfg.eval.interval, 1):]
        rows.append({"step": cfg.train.n_steps, "loss": float(np.nanmean(tail)), **_metrics_row(ev)})
    extra = {}
    if exact:
        if not isinstance(env, HyperGrid):
            raise ConfigError("exact-check needs task 'hypergrid'")
        states = env.enumerate_states()
        gaps = [model.l1_gap(w, states) for w in prefs]
        extra["l1_gap"] = float(np.mean(gaps))
        extra["l1_gap_per_preference"] = [float(g) for g in gaps]
    return {"preferences": prefs, "log": rows, "front": ev["front"], "metrics": _metrics_row(ev),
            "extra": extra}


def run_active_learning(cfg: ExperimentConfig) -> dict:
    env = NGrams(cfg.env.patterns, cfg.env.max_len)
    proposer = "mogfn" if cfg.method == "mogfn_al" else "random"
    rows = []
    res = run_al_loop(env.objectives_of, cfg.al, proposer=proposer,
                      on_round=lambda rec, _: rows.append(dict(rec)))
    front = res.front()
    ref = np.full(env.n_objectives, cfg.al.hv_ref)
    metrics = {
        "hv": hypervolume(front, ref),
        "r2": r2_indicator(front, r2_reference_vectors(env.n_objectives)),
        "relative_hv": res.relative_hv[-1],
        "oracle_calls": res.rounds[-1]["oracle_calls"],
    }
    return {"preferences": np.zeros((0, env.n_objectives)), "log": rows, "front": front,
            "metrics": metrics, "extra": {"relative_hv": res.relative_hv, "al": config_dict(cfg.al)}}


def run_experiment(cfg: ExperimentConfig, out_dir=None, exact: bool = False) -> dict:
    """Run the configured pipeline and write its artifacts. Returns the summary dict."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = run_active_learning(cfg) if cfg.task == "al" else run_sampler(cfg, exact)
    wall = time.perf_counter() - start

    front_csv = result["front"].to_csv()
    metric_names = list(result["metrics"])
    atomic_write(out / "config.json", cfg.to_json())
    atomic_write(out / "preferences.json", json.dumps(np.asarray(result["preferences"]).tolist()) + "\n")
    atomic_write(out / "train_log.jsonl", "".join(json.dumps(r, sort_keys=True) + "\n" for r in result["log"]))
    atomic_write(out / "front.csv", front_csv)
    atomic_write(out / "metrics.csv",
                 csv_text(metric_names, [[_fmt(result["metrics"][k]) for k in metric_names]]))
    summary = {
        "task": cfg.task,
        "method": cfg.method,
        "seed": cfg.seed,
        "config_hash": cfg.hash(),
        "front_hash": git_blob_hash(front_csv),
        "front_size": len(result["front"]),
        "wall_time_s": wall,
        "metrics": {k: float(v) for k, v in result["metrics"].items()},
        **result["extra"],
    }
    atomic_write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


# --- standalone metrics and comparison ---

def front_metrics(front: Front, truth: Front | None = None, k: int = 10, ref=None) -> dict:
    """Indicators of a saved front; top-k uses the equal-weight sum as the ranking reward."""
    d = front.dim
    out = {"hv": hypervolume(front, ref), "r2": r2_indicator(front, r2_reference_vectors(d))}
    if truth is not None:
        out["gd_plus"] = gd_plus(front, truth)
    k = min(k, len(front))
    rewards = Scalarization("ws").batch(front.points, np.full(d, 1.0 / d))
    out["topk_reward"] = topk_reward([rewards], k)
    if k >= 2 and front.payloads is not None:
        order = np.argsort(-rewards, kind="stable")
        payloads = [front.payloads[i] for i in order]
        out["topk_diversity"] = topk_diversity([payloads], k)
    return out


def _read_front(path) -> Front:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"front file {path} does not exist")
    front = Front.from_csv(path.read_text())
    if front.payloads is not None:
        front.payloads = [_parse_payload(p) for p in front.payloads]
    return front


def _parse_payload(p: str):
    if p.startswith("(") and p.endswith(")"):
        return tuple(int(v) for v in p[1:-1].split(","))
    return p


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = json.dumps(v) if isinstance(v, list) else v
    return out


def compare_runs(dirs) -> str:
    """CSV with one row per run: the config fields that differ between runs, then final metrics."""
    runs = []
    for d in dirs:
        d = Path(d)
        if not d.is_dir():
            raise ConfigError(f"run directory {d} does not exist")
        cfg = json.loads((d / "config.json").read_text())
        summary = json.loads((d / "summary.json").read_text())
        runs.append((d, cfg, summary))
    if not runs:
        raise ConfigError("nothing to compare")
    first = runs[0][1]
    for d, cfg, _ in runs[1:]:
        if cfg["task"] != first["task"] or cfg["eval"] != first["eval"]:
            raise ConfigError(f"run {d} has a different task or evaluation block")
    flat = [_flatten({k: v for k, v in c.items() if k != "output_dir"}) for _, c, _ in runs]
    keys = sorted({k for f in flat for k in f})
    deltas = [k for k in keys if len({json.dumps(f.get(k)) for f in flat}) > 1]
    metric_names = []
    for _, _, s in runs:
        metric_names += [m for m in s["metrics"] if m not in metric_names]
    rows = []
    for (d, _, s), f in zip(runs, flat):
        rows.append([str(d)] + [f.get(k) for k in deltas] + [_fmt(s["metrics"].get(m, "")) for m in metric_names])
    return csv_text(["run"] + deltas + metric_names, rows)


# --- entry point ---

COMMAND_METHODS = {"train-pc": ("mogfn_pc",), "train-rl": ("moreinforce",), "run-al": ("mogfn_al", "random"),
                   "exact-check": ("mogfn_pc",)}


def _load(args) -> ExperimentConfig:
    cfg = parse_config(args.config)
    if args.seed is not None:
        data = cfg.to_dict()
        data["seed"] = args.seed
        if cfg.task == "al":
            data["al"]["seed"] = args.seed
        cfg = config_from_dict(data)
    allowed = COMMAND_METHODS[args.command]
    if cfg.method not in allowed:
        raise ConfigError(f"{args.command} runs method(s) {allowed}, config has {cfg.method!r}")
    if args.command == "exact-check" and cfg.task != "hypergrid":
        raise ConfigError("exact-check needs task 'hypergrid'")
    if args.command == "run-al" and cfg.task != "al":
        raise ConfigError("run-al needs task 'al'")
    if args.command in ("train-pc", "train-rl") and cfg.task == "al":
        raise ConfigError(f"{args.command} needs task 'hypergrid' or 'ngrams'")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mogfn", description="Multi-objective GFlowNet experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("train-pc", "train a preference-conditional GFlowNet"),
                        ("train-rl", "train the REINFORCE baseline"),
                        ("run-al", "run the active-learning loop"),
                        ("exact-check", "train on a HyperGrid and compare to the exact target")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    p = sub.add_parser("metrics", help="indicators of a saved front CSV")
    p.add_argument("--front", required=True)
    p.add_argument("--truth", default=None, help="true Pareto front CSV for GD+")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", default=None, help="write the CSV row here instead of stdout")
    p = sub.add_parser("compare", help="tabulate config deltas and final metrics of several runs")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "metrics":
            truth = _read_front(args.truth) if args.truth else None
            m = front_metrics(_read_front(args.front), truth, args.k)
            text = csv_text(list(m), [[_fmt(v) for v in m.values()]])
        elif args.command == "compare":
            text = compare_runs(args.runs)
        else:
            cfg = _load(args)
            summary = run_experiment(cfg, args.out, exact=args.command == "exact-check")
            text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
        if getattr(args, "out", None) and args.command in ("metrics", "compare"):
            atomic_write(args.out, text)
        else:
            sys.stdout.write(text)
    except (ContractError, TrainingError, OSError, json.JSONDecodeError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
