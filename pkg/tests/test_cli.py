import json
import subprocess
import sys

import pytest

from crowdledger.cli import (
    ConfigParseError,
    ConfigValidationError,
    main,
    parse_config,
    parse_config_dict,
)

TINY_SCENARIO = {
    "n_users": 24,
    "n_stories": 30,
    "n_votes": 400,
    "seed": 7,
    "training": {"epochs": 4, "story_epochs": 10, "batch_size": 32},
}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


# ---------------------------------------------------------------- config file


def test_parse_config_minimal_defaults(tmp_path):
    path = write_config(tmp_path, {"n_users": 100, "n_stories": 200, "n_votes": 1000, "seed": 7})
    config = parse_config(path)
    s = config.scenario
    assert s.consensus_threshold == 0.5
    assert s.blend_alpha == 0.5
    assert s.equilibrium.tau == 0.9
    assert s.equilibrium.c_min == 10
    assert s.max_votes_per_story == 50
    assert s.rewards.voter_correct == 1 and s.rewards.poster_false == -4
    assert s.seed == 7
    assert sum(s.population.percentages.values()) == pytest.approx(100.0)


def test_parse_config_rejects_unknown_keys():
    with pytest.raises(ConfigValidationError):
        parse_config_dict({"n_users": 10, "foo": 1})
    with pytest.raises(ConfigValidationError):
        parse_config_dict({"population": {"percentages": {"ghost": 100}}})
    with pytest.raises(ConfigValidationError):
        parse_config_dict({"training": {"momentum": 0.9}})


def test_parse_config_rejects_bad_percentages():
    with pytest.raises(ConfigValidationError):
        parse_config_dict(
            {"population": {"percentages": {"normal": 60, "troll": 30}}}
        )


def test_parse_config_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigParseError):
        parse_config(path)


def test_config_digest_is_stable(tmp_path):
    doc = {"n_users": 100, "n_stories": 200, "n_votes": 1000, "seed": 1}
    a = parse_config(write_config(tmp_path, doc, "a.json"))
    b = parse_config(write_config(tmp_path, doc, "b.json"))
    assert a.digest() == b.digest()


# ------------------------------------------------------------------- commands


def run_cli(*argv):
    return main(list(argv))


def test_simulate_writes_artifacts(tmp_path):
    config = write_config(tmp_path, TINY_SCENARIO)
    out = tmp_path / "run"
    assert run_cli("simulate", "--config", str(config), "--out", str(out)) == 0
    for name in ("events.csv", "chain.jsonl", "settlements.csv",
                 "reputation_trajectory.csv", "reputations.csv", "metrics.json",
                 "manifest.json"):
        assert (out / name).exists(), name
    header = (out / "reputation_trajectory.csv").read_text().splitlines()[0]
    assert header.startswith("step,normal,troll,random,traitor")
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 7
    assert manifest["versions"]["backend"] in ("cython", "numpy")


def test_simulate_deterministic_artifacts(tmp_path):
    config = write_config(tmp_path, TINY_SCENARIO)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run_cli("simulate", "--config", str(config), "--out", str(out1)) == 0
    assert run_cli("simulate", "--config", str(config), "--out", str(out2)) == 0
    for name in ("events.csv", "chain.jsonl", "settlements.csv",
                 "reputation_trajectory.csv", "reputations.csv", "metrics.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_evaluate_without_checkpoints_exits_one(tmp_path, capsys):
    config = write_config(tmp_path, TINY_SCENARIO)
    code = run_cli("evaluate", "--config", str(config), "--models", str(tmp_path / "none"),
                   "--out", str(tmp_path / "out"))
    assert code == 1
    assert "checkpoint" in capsys.readouterr().err


def test_train_then_evaluate_round_trip(tmp_path):
    config = write_config(tmp_path, TINY_SCENARIO)
    models = tmp_path / "models"
    assert run_cli("train", "--config", str(config), "--out", str(models)) == 0
    assert (models / "action.ckpt").exists() and (models / "story.ckpt").exists()
    assert (models / "training_history.csv").exists()
    out = tmp_path / "eval"
    code = run_cli("evaluate", "--config", str(config), "--seed", "99",
                   "--models", str(models), "--out", str(out))
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert "detection" in metrics
    assert 0.0 <= metrics["accuracy"] <= 1.0


def test_corrupt_checkpoint_is_runtime_error(tmp_path, capsys):
    config = write_config(tmp_path, TINY_SCENARIO)
    models = tmp_path / "models"
    models.mkdir()
    (models / "action.ckpt").write_bytes(b"JUNKJUNKJUNK")
    (models / "story.ckpt").write_bytes(b"JUNKJUNKJUNK")
    code = run_cli("evaluate", "--config", str(config), "--models", str(models),
                   "--out", str(tmp_path / "out"))
    assert code == 2


def test_sweep_crowd_mode_with_regression(tmp_path):
    spec = {
        "usv": [[30, 20, 200]],
        "random_mixes": {"count": 30, "normal_min": 30, "normal_max": 70},
        "base_seed": 3,
        "mode": "crowd",
    }
    path = write_config(tmp_path, spec, "sweep.json")
    out = tmp_path / "sweep"
    assert run_cli("sweep", "--config", str(path), "--out", str(out)) == 0
    lines = (out / "sweep_metrics.csv").read_text().splitlines()
    assert len(lines) == 31  # header + one row per run
    assert (out / "ols_summary.json").exists()
    table = (out / "ols_table.txt").read_text()
    assert "troll" in table and "R^2" in table


def test_sweep_roc_replicates(tmp_path):
    spec = {
        "usv": [[30, 20, 200]],
        "mixes": [{"normal": 70, "troll": 5, "random": 5, "traitor": 5,
                   "orchestrated": 5, "target": 10}],
        "replicates": 5,
        "base_seed": 11,
        "mode": "crowd",
        "roc": True,
    }
    path = write_config(tmp_path, spec, "roc.json")
    out = tmp_path / "roc"
    assert run_cli("sweep", "--config", str(path), "--out", str(out)) == 0
    roc_lines = (out / "roc.csv").read_text().splitlines()
    assert roc_lines[0] == "replicate,fpr,tpr"
    assert len({line.split(",")[0] for line in roc_lines[1:]}) == 5
    band_lines = (out / "roc_band.csv").read_text().splitlines()
    assert band_lines[0] == "fpr,tpr_mean,tpr_lo,tpr_hi"
    assert len(band_lines) == 22


def test_sweep_empty_grid_exits_one(tmp_path, capsys):
    path = write_config(tmp_path, {"usv": [], "mixes": []}, "empty.json")
    assert run_cli("sweep", "--config", str(path), "--out", str(tmp_path / "x")) == 1


def test_report_renders_figures(tmp_path):
    config = write_config(tmp_path, TINY_SCENARIO)
    run_dir = tmp_path / "run"
    assert run_cli("simulate", "--config", str(config), "--out", str(run_dir)) == 0
    out = tmp_path / "figures"
    assert run_cli("report", str(run_dir), "--out", str(out)) == 0
    svgs = list(out.glob("*.svg"))
    assert len(svgs) >= 2
    for svg in svgs:
        content = svg.read_text()
        assert content.startswith("<svg") and content.rstrip().endswith("</svg>")
    summary = json.loads((out / "report_summary.json").read_text())
    assert summary["runs"][0]["figures"]


def test_report_missing_artifacts_exits_one(tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert run_cli("report", str(empty), "--out", str(tmp_path / "f")) == 1


def test_out_env_var_sets_default_root(tmp_path, monkeypatch):
    config = write_config(tmp_path, TINY_SCENARIO)
    monkeypatch.setenv("CROWDLEDGER_OUT", str(tmp_path / "envroot"))
    monkeypatch.chdir(tmp_path)
    assert run_cli("simulate", "--config", str(config)) == 0
    assert (tmp_path / "envroot" / "simulate-seed7" / "events.csv").exists()


def test_console_entry_point_runs(tmp_path):
    config = write_config(tmp_path, TINY_SCENARIO)
    out = tmp_path / "sub"
    proc = subprocess.run(
        [sys.executable, "-m", "crowdledger.cli", "simulate",
         "--config", str(config), "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "events.csv").exists()
