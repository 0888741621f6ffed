import csv
import json

import pytest

from mogfn.cli import compare_runs, git_blob_hash, main, run_experiment
from mogfn.config import ConfigError, config_from_dict, parse_config

TINY_GRID = {"task": "hypergrid", "method": "mogfn_pc", "env": {"side": 4},
             "train": {"n_steps": 30, "batch_size": 8}, "eval": {"interval": 10, "n_samples": 16, "k": 4}}
TINY_NGRAMS = {"task": "ngrams", "method": "moreinforce", "env": {"max_len": 6},
               "train": {"n_steps": 6, "batch_size": 4}, "eval": {"interval": 3, "n_samples": 8, "k": 3,
                                                                  "n_preferences": 4}}
TINY_AL = {"task": "al", "method": "random", "env": {"max_len": 8},
           "al": {"n_rounds": 2, "batch_size": 3, "n_initial": 6}}


def write(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_minimal_hypergrid_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, {"task": "hypergrid", "method": "mogfn_pc"}))
    assert cfg.train.alpha == 1.5 and cfg.train.lr == 0.01 and cfg.train.batch_size == 128


def test_beta_zero_rejected():
    with pytest.raises(ConfigError, match="beta"):
        config_from_dict({"task": "hypergrid", "method": "mogfn_pc", "train": {"beta": 0}})


@pytest.mark.parametrize("data, field", [
    ({"task": "hypergrid", "method": "mogfn_pc", "bogus": 1}, "bogus"),
    ({"task": "hypergrid", "method": "mogfn_pc", "train": {"betta": 2}}, "betta"),
    ({"task": "hypergrid"}, "method"),
    ({"task": "hypergrid", "method": "mogfn_al"}, "method"),
    ({"task": "hypergrid", "method": "mogfn_pc", "train": {"n_steps": "many"}}, "train.n_steps"),
    ({"task": "hypergrid", "method": "mogfn_pc", "env": {"objectives": ["branin", "nope"]}}, "env.objectives"),
    ({"task": "al", "method": "random", "al": {"batch_size": 0}}, "al"),
])
def test_invalid_configs_name_the_field(data, field):
    with pytest.raises(ConfigError, match=field):
        config_from_dict(data)


@pytest.mark.parametrize("data", [TINY_GRID, TINY_NGRAMS, TINY_AL])
def test_config_roundtrip(data):
    cfg = config_from_dict(data)
    again = config_from_dict(json.loads(cfg.to_json()))
    assert again == cfg
    assert again.hash() == cfg.hash()


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.json")


def test_exact_check_artifacts(tmp_path):
    out = tmp_path / "run"
    code = main(["exact-check", "--config", str(write(tmp_path, TINY_GRID)), "--out", str(out)])
    assert code == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"config.json", "preferences.json", "train_log.jsonl", "front.csv", "metrics.csv",
                     "summary.json"}
    summary = json.loads((out / "summary.json").read_text())
    assert {"seed", "config_hash", "front_hash", "wall_time_s", "l1_gap"} <= set(summary)
    assert summary["front_hash"] == git_blob_hash((out / "front.csv").read_text())
    rows = [json.loads(line) for line in (out / "train_log.jsonl").read_text().splitlines()]
    assert [r["step"] for r in rows] == [10, 20, 30]
    assert set(rows[0]) == {"step", "loss", "hv", "r2", "gd_plus", "topk_reward", "topk_diversity"}
    header = next(csv.reader((out / "metrics.csv").open()))
    assert header == ["hv", "r2", "gd_plus", "topk_reward", "topk_diversity"]
    assert not list(out.glob(".*.tmp"))


def test_ngrams_run_logs_each_interval(tmp_path):
    out = tmp_path / "ng"
    assert main(["train-rl", "--config", str(write(tmp_path, TINY_NGRAMS)), "--out", str(out)]) == 0
    rows = [json.loads(line) for line in (out / "train_log.jsonl").read_text().splitlines()]
    assert [r["step"] for r in rows] == [3, 6]
    assert "topk_diversity" in rows[0]


def test_al_run_logs_relative_hv(tmp_path):
    out = tmp_path / "al"
    assert main(["run-al", "--config", str(write(tmp_path, TINY_AL)), "--out", str(out)]) == 0
    rows = [json.loads(line) for line in (out / "train_log.jsonl").read_text().splitlines()]
    assert [r["round"] for r in rows] == [0, 1, 2]
    assert rows[0]["relative_hv"] == 1.0
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["relative_hv"]) == 3


def test_seed_flag_overrides(tmp_path):
    out = tmp_path / "s"
    main(["train-pc", "--config", str(write(tmp_path, TINY_GRID)), "--seed", "7", "--out", str(out)])
    assert json.loads((out / "summary.json").read_text())["seed"] == 7
    assert json.loads((out / "config.json").read_text())["seed"] == 7


def test_same_seed_same_artifacts(tmp_path):
    cfg = config_from_dict(TINY_GRID)
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b")
    assert a["front_hash"] == b["front_hash"] and a["config_hash"] == b["config_hash"]
    for name in ("front.csv", "metrics.csv", "train_log.jsonl", "preferences.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_command_method_mismatch(tmp_path, capsys):
    code = main(["train-rl", "--config", str(write(tmp_path, TINY_GRID))])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError"


def test_compare(tmp_path):
    base = dict(TINY_GRID)
    dirs = []
    for beta in (16, 32, 48):
        data = json.loads(json.dumps(base))
        data["train"]["beta"] = beta
        d = tmp_path / f"b{beta}"
        run_experiment(config_from_dict(data), d)
        dirs.append(d)
    rows = list(csv.DictReader(compare_runs(dirs).splitlines()))
    assert [float(r["train.beta"]) for r in rows] == [16, 32, 48]
    same = list(csv.DictReader(compare_runs([dirs[0], dirs[0]]).splitlines()))
    assert {k: v for k, v in same[0].items()} == same[1]
    with pytest.raises(ConfigError):
        compare_runs([tmp_path / "missing"])


def test_compare_rejects_different_tasks(tmp_path):
    run_experiment(config_from_dict(TINY_GRID), tmp_path / "g")
    run_experiment(config_from_dict(TINY_NGRAMS), tmp_path / "n")
    with pytest.raises(ConfigError):
        compare_runs([tmp_path / "g", tmp_path / "n"])


def test_metrics_command(tmp_path, capsys):
    out = tmp_path / "run"
    run_experiment(config_from_dict(TINY_GRID), out)
    capsys.readouterr()
    assert main(["metrics", "--front", str(out / "front.csv"), "--truth", str(out / "front.csv")]) == 0
    rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert float(rows[0]["gd_plus"]) == 0.0
    assert main(["metrics", "--front", str(tmp_path / "nope.csv")]) == 2
