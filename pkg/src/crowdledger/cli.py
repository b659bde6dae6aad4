"""Batch front end: simulate / train / evaluate / sweep / birdwatch / report.

Scenario configs are strict JSON (unknown keys rejected, defaults filled);
every command writes CSV/JSON/JSONL artifacts plus a run manifest into its
output directory.  Exit codes: 0 success, 1 config/validation error, 2
runtime error.  The CROWDLEDGER_OUT environment variable overrides the
default output root.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

import crowdledger
from crowdledger import birdwatch as bw
from crowdledger import metrics as metrics_mod
from crowdledger import pipeline, report
from crowdledger.classifiers import ActionClassifier, ClassifierPair, StoryClassifier, TrainingRun
from crowdledger.dynamics import EquilibriumParams
from crowdledger.engine import ConfigError, ScenarioConfig, SimulationResult, run_simulation
from crowdledger.events import write_event_csv
from crowdledger.ledger import RewardPolicy, export_jsonl
from crowdledger.metrics import attack_impact_regression, format_ols_table, roc_auc
from crowdledger.population import BehaviorType, PopulationConfig


class ConfigParseError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    pass


class MissingArtifactsError(Exception):
    pass


_TOP_KEYS = {
    "n_users", "n_stories", "n_votes", "true_ratio", "seed", "population",
    "equilibrium", "max_votes_per_story", "consensus_threshold", "blend_alpha",
    "rewards", "training",
}
_POPULATION_KEYS = {"percentages", "accuracy_normal", "traitor_honest_fraction", "seed"}
_PERCENTAGE_KEYS = {
    "normal", "troll", "random", "traitor", "orchestrated",
    "orch_slander", "orch_whitewash", "target",
}
_EQUILIBRIUM_KEYS = {"tau", "c_min"}
_REWARD_KEYS = {"voter_correct", "voter_wrong", "poster_true", "poster_false",
                "judge_poster_by_truth"}
_TRAINING_KEYS = {"epochs", "batch_size", "validation_fraction", "learning_rate",
                  "story_epochs", "story_batch_size", "story_learning_rate",
                  "target_mode", "seed", "bootstrap_scale"}


@dataclass(frozen=True)
class FullConfig:
    scenario: ScenarioConfig
    training: pipeline.TrainingSettings
    raw: dict = field(default_factory=dict)

    def digest(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _reject_unknown(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigValidationError(f"unknown key(s) in {where}: {sorted(unknown)}")


def parse_config_dict(doc: dict) -> FullConfig:
    if not isinstance(doc, dict):
        raise ConfigValidationError("config document must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "config")

    pop_doc = doc.get("population", {})
    _reject_unknown(pop_doc, _POPULATION_KEYS, "population")
    pct_doc = pop_doc.get("percentages")
    if pct_doc is None:
        percentages = dict(DEFAULT_MIX_NAMES)
    else:
        _reject_unknown(pct_doc, _PERCENTAGE_KEYS, "population.percentages")
        percentages = {k: float(v) for k, v in pct_doc.items()}
    try:
        pct = pipeline.mix_to_percentages(percentages)
    except ValueError as exc:
        raise ConfigValidationError(str(exc)) from exc
    population = PopulationConfig(
        percentages=pct,
        accuracy_normal=float(pop_doc.get("accuracy_normal", 0.9)),
        traitor_honest_fraction=float(pop_doc.get("traitor_honest_fraction", 0.6)),
        seed=pop_doc.get("seed"),
    )

    eq_doc = doc.get("equilibrium", {})
    _reject_unknown(eq_doc, _EQUILIBRIUM_KEYS, "equilibrium")
    try:
        equilibrium = EquilibriumParams(
            tau=float(eq_doc.get("tau", 0.9)), c_min=int(eq_doc.get("c_min", 10))
        )
    except ValueError as exc:
        raise ConfigValidationError(str(exc)) from exc

    rw_doc = doc.get("rewards", {})
    _reject_unknown(rw_doc, _REWARD_KEYS, "rewards")
    rewards = RewardPolicy(
        voter_correct=int(rw_doc.get("voter_correct", 1)),
        voter_wrong=int(rw_doc.get("voter_wrong", -2)),
        poster_true=int(rw_doc.get("poster_true", 2)),
        poster_false=int(rw_doc.get("poster_false", -4)),
        judge_poster_by_truth=bool(rw_doc.get("judge_poster_by_truth", False)),
    )

    scenario = ScenarioConfig(
        n_users=int(doc.get("n_users", 100)),
        n_stories=int(doc.get("n_stories", 200)),
        n_votes=int(doc.get("n_votes", 1000)),
        true_ratio=float(doc.get("true_ratio", 0.5)),
        population=population,
        equilibrium=equilibrium,
        max_votes_per_story=int(doc.get("max_votes_per_story", 50)),
        consensus_threshold=float(doc.get("consensus_threshold", 0.5)),
        blend_alpha=float(doc.get("blend_alpha", 0.5)),
        rewards=rewards,
        seed=int(doc.get("seed", 0)),
    )
    try:
        scenario.validate()
    except ConfigError as exc:
        raise ConfigValidationError(str(exc)) from exc

    tr_doc = doc.get("training", {})
    _reject_unknown(tr_doc, _TRAINING_KEYS, "training")
    action_cfg = TrainingRun(
        epochs=int(tr_doc.get("epochs", 12)),
        batch_size=int(tr_doc.get("batch_size", 64)),
        validation_fraction=float(tr_doc.get("validation_fraction", 0.2)),
        learning_rate=float(tr_doc.get("learning_rate", 3e-3)),
        seed=int(tr_doc.get("seed", 0)),
    )
    story_cfg = TrainingRun(
        epochs=int(tr_doc.get("story_epochs", 40)),
        batch_size=int(tr_doc.get("story_batch_size", 32)),
        validation_fraction=float(tr_doc.get("validation_fraction", 0.2)),
        learning_rate=float(tr_doc.get("story_learning_rate", 3e-3)),
        seed=int(tr_doc.get("seed", 0)),
    )
    training = pipeline.TrainingSettings(
        action=action_cfg, story=story_cfg,
        target_mode=tr_doc.get("target_mode", "contribution"),
        bootstrap_scale=int(tr_doc.get("bootstrap_scale", 3)),
    )
    return FullConfig(scenario=scenario, training=training, raw=doc)


DEFAULT_MIX_NAMES = {
    "normal": 70.0, "troll": 5.0, "random": 5.0, "traitor": 5.0,
    "orchestrated": 5.0, "target": 10.0,
}


def parse_config(path) -> FullConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigParseError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config_dict(doc)


# ------------------------------------------------------------------ artifacts


def _out_dir(args, command: str, seed: int) -> Path:
    if args.out:
        path = Path(args.out)
    else:
        root = os.environ.get("CROWDLEDGER_OUT", "runs")
        path = Path(root) / f"{command}-seed{seed}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(out: Path, command: str, config: FullConfig | None, seed: int,
                    outputs: list[str], started: float) -> None:
    manifest = {
        "command": command,
        "config_digest": config.digest() if config else None,
        "seed": seed,
        "outputs": sorted(outputs),
        "versions": {
            "crowdledger": crowdledger.__version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "backend": crowdledger.neural.BACKEND,
        },
        "duration_s": time.time() - started,
    }
    tmp = out / "manifest.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, out / "manifest.json")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


BEHAVIOR_COLUMNS = [b.value for b in BehaviorType]


def _write_run_artifacts(out: Path, result: SimulationResult, report_doc: dict) -> list[str]:
    write_event_csv(result.events, out / "events.csv")
    export_jsonl(result.chain, out / "chain.jsonl")
    _write_csv(
        out / "settlements.csv",
        ["story", "step", "n_votes", "crowd_score", "classifier_score", "final_score",
         "label", "forced"],
        [
            [s.story_id, s.step, s.n_votes, repr(s.crowd_score), repr(s.classifier_score),
             repr(s.final_score), s.consensus_label, int(s.forced)]
            for s in sorted(result.settlements, key=lambda s: (s.step, s.story_id))
        ],
    )
    _write_csv(
        out / "reputation_trajectory.csv",
        ["step"] + BEHAVIOR_COLUMNS,
        [
            [row["step"]] + [repr(row[c]) if c in row else "" for c in BEHAVIOR_COLUMNS]
            for row in result.reputation_trace
        ],
    )
    _write_csv(
        out / "reputations.csv",
        ["user", "behavior", "reputation"],
        [
            [a.id, a.behavior.value, result.chain.accounts.get(a.id, 0)]
            for a in result.agents
        ],
    )
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(report_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ["events.csv", "chain.jsonl", "settlements.csv", "reputation_trajectory.csv",
            "reputations.csv", "metrics.json"]


# ------------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    started = time.time()
    config = parse_config(args.config)
    scenario = _apply_overrides(config.scenario, args)
    models = _load_models(args.models) if args.models else None
    out = _out_dir(args, "simulate", scenario.seed)
    result = run_simulation(scenario, models=models)
    report_doc = pipeline.run_metrics(result, models)
    outputs = _write_run_artifacts(out, result, report_doc)
    _write_manifest(out, "simulate", config, scenario.seed, outputs, started)
    print(f"simulate: {len(result.settlements)} settlements, "
          f"accuracy {report_doc['accuracy']:.3f} -> {out}")
    return 0


def cmd_train(args) -> int:
    started = time.time()
    config = parse_config(args.config)
    scenario = _apply_overrides(config.scenario, args)
    out = _out_dir(args, "train", scenario.seed)
    pair, bootstrap, histories = pipeline.bootstrap_train(scenario, config.training)
    pair.action.save(out / "action.ckpt")
    pair.story.save(out / "story.ckpt")
    write_event_csv(bootstrap.events, out / "events.csv")
    rows = []
    for epoch, loss in enumerate(histories["action_loss"]):
        rows.append(["action", epoch, repr(loss)])
    for epoch, loss in enumerate(histories["story_loss"]):
        rows.append(["story", epoch, repr(loss)])
    _write_csv(out / "training_history.csv", ["model", "epoch", "loss"], rows)
    outputs = ["action.ckpt", "story.ckpt", "events.csv", "training_history.csv"]
    _write_manifest(out, "train", config, scenario.seed, outputs, started)
    val = histories["story_validation_accuracy"]
    print(f"train: story validation accuracy "
          f"{'n/a' if val is None else f'{val:.3f}'} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    started = time.time()
    config = parse_config(args.config)
    scenario = _apply_overrides(config.scenario, args)
    models = _load_models(args.models)
    out = _out_dir(args, "evaluate", scenario.seed)
    result = run_simulation(scenario, models=models)
    report_doc = pipeline.run_metrics(result, models)
    outputs = _write_run_artifacts(out, result, report_doc)
    _write_manifest(out, "evaluate", config, scenario.seed, outputs, started)
    print(f"evaluate: accuracy {report_doc['accuracy']:.3f} "
          f"f1 {report_doc['f1']:.3f} -> {out}")
    return 0


def _load_models(models_dir) -> ClassifierPair:
    if not models_dir:
        raise ConfigValidationError("--models is required (directory with checkpoints)")
    directory = Path(models_dir)
    action_path = directory / "action.ckpt"
    story_path = directory / "story.ckpt"
    if not action_path.exists() or not story_path.exists():
        raise ConfigValidationError(f"no checkpoints under {directory}")
    return ClassifierPair(ActionClassifier.load(action_path), StoryClassifier.load(story_path))


def _apply_overrides(scenario: ScenarioConfig, args) -> ScenarioConfig:
    if getattr(args, "seed", None) is not None:
        scenario = replace(scenario, seed=args.seed)
    if getattr(args, "alpha", None) is not None:
        scenario = replace(scenario, blend_alpha=args.alpha)
    scenario.validate()
    return scenario


_SWEEP_KEYS = {"usv", "mixes", "random_mixes", "replicates", "base_seed", "mode", "roc"}
_RANDOM_MIX_KEYS = {"count", "normal_min", "normal_max", "min_share"}


def _sweep_cells(spec: dict, runs_override) -> tuple[list, dict]:
    _reject_unknown(spec, _SWEEP_KEYS, "sweep spec")
    usv_list = [tuple(int(v) for v in usv) for usv in spec.get("usv", [[100, 200, 1000]])]
    base_seed = int(spec.get("base_seed", 1))
    replicates = int(spec.get("replicates", 1))
    mode = spec.get("mode", "crowd")
    if mode not in ("crowd", "full"):
        raise ConfigValidationError(f"sweep mode must be crowd|full, got {mode!r}")
    if "mixes" in spec:
        mixes = spec["mixes"]
        for mix in mixes:
            _reject_unknown(mix, _PERCENTAGE_KEYS, "sweep mix")
            if abs(sum(mix.values()) - 100.0) > 1e-9:
                raise ConfigValidationError(f"sweep mix sums to {sum(mix.values())}, expected 100")
    else:
        rm = spec.get("random_mixes", {})
        _reject_unknown(rm, _RANDOM_MIX_KEYS, "random_mixes")
        count = runs_override or int(rm.get("count", 100))
        rng = np.random.default_rng(base_seed)
        mixes = pipeline.random_attack_mixes(
            count,
            rng,
            normal_min=int(rm.get("normal_min", 30)),
            normal_max=int(rm.get("normal_max", 70)),
            min_share=int(rm.get("min_share", 5)),
        )
    cells = []
    index = 0
    for usv in usv_list:
        for mix in mixes:
            for _ in range(replicates):
                cells.append((usv, mix, base_seed + index))
                index += 1
    if not cells:
        raise ConfigValidationError("sweep grid is empty")
    return cells, {"mode": mode, "roc": bool(spec.get("roc", False))}


def _run_cell(payload):
    scenario_doc, usv, mix, seed, mode = payload
    config = parse_config_dict(scenario_doc)
    return pipeline.sweep_run(config.scenario, mix, usv, seed, mode, config.training)


def cmd_sweep(args) -> int:
    started = time.time()
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise ConfigParseError(f"cannot read sweep spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"sweep spec is not valid JSON: {exc}") from exc
    scenario_doc = spec.pop("scenario", {})
    cells, options = _sweep_cells(spec, args.runs)
    base_seed = int(spec.get("base_seed", 1))
    out = _out_dir(args, "sweep", base_seed)

    payloads = [(scenario_doc, usv, mix, seed, options["mode"]) for usv, mix, seed in cells]
    if args.jobs and args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_run_cell, payloads))
    else:
        rows = [_run_cell(p) for p in payloads]

    header = ["n_users", "n_stories", "n_votes", "seed", "normal", "troll", "random",
              "traitor", "orchestrated", "target", "precision", "recall", "f1", "accuracy"]
    _write_csv(
        out / "sweep_metrics.csv", header,
        [[repr(r[k]) if isinstance(r[k], float) else r[k] for k in header] for r in rows],
    )
    outputs = ["sweep_metrics.csv"]

    if len(rows) >= 30:
        ols = attack_impact_regression(rows)
        summary = {
            metric: {
                "coefficients": res.coefficients.tolist(),
                "std_errors": res.std_errors.tolist(),
                "t_statistics": res.t_statistics.tolist(),
                "p_values": res.p_values.tolist(),
                "r_squared": res.r_squared,
                "terms": ["intercept", *metrics_mod.ATTACK_REGRESSORS],
            }
            for metric, res in ols.items()
        }
        with open(out / "ols_summary.json", "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(out / "ols_table.txt", "w", encoding="utf-8") as fh:
            fh.write(format_ols_table(ols))
        outputs += ["ols_summary.json", "ols_table.txt"]

    if options["roc"]:
        curves = []
        roc_rows = []
        for i, row in enumerate(rows):
            scores = [s for s, _ in row["_scores"]]
            labels = [t for _, t in row["_scores"]]
            curve = roc_auc(scores, labels)
            curves.append(curve.points)
            for fpr, tpr in curve.points:
                roc_rows.append([i, repr(fpr), repr(tpr)])
        _write_csv(out / "roc.csv", ["replicate", "fpr", "tpr"], roc_rows)
        band = pipeline.roc_band(curves)
        _write_csv(
            out / "roc_band.csv",
            ["fpr", "tpr_mean", "tpr_lo", "tpr_hi"],
            [[repr(a), repr(b), repr(c), repr(d)] for a, b, c, d in band],
        )
        outputs += ["roc.csv", "roc_band.csv"]

    _write_manifest(out, "sweep", None, base_seed, outputs, started)
    print(f"sweep: {len(rows)} runs -> {out}")
    return 0


def cmd_birdwatch(args) -> int:
    started = time.time()
    notes = bw.parse_notes(args.notes)
    ratings = bw.parse_ratings(args.ratings)
    dataset = bw.to_votes(notes.records, ratings.records)
    dataset.dropped_contradictory = ratings.contradictory
    dataset, dup_fraction = bw.dedup(dataset)
    split = bw.temporal_split(dataset, args.train_fraction)
    out = _out_dir(args, "birdwatch", 0)
    labels = bw.load_labels(args.labels) if args.labels else {}
    write_event_csv(bw.dataset_to_events(dataset, labels), out / "events.csv")
    report_doc = {
        "notes": len(notes.records),
        "notes_skipped": notes.skipped,
        "ratings": len(ratings.records),
        "ratings_skipped": ratings.skipped,
        "ratings_contradictory": ratings.contradictory,
        "ratings_none_dropped": dataset.dropped_none,
        "ratings_orphaned": dataset.dropped_orphans,
        "votes": len(dataset.votes),
        "duplicate_fraction": dup_fraction,
        "users": len(dataset.user_ids),
        "tweets": len(dataset.tweet_ids),
        "train_votes": len(split.train.votes),
        "test_votes": len(split.test.votes),
        "straddled_stories": split.straddled,
    }
    outputs = ["events.csv", "import_report.json"]
    if labels:
        study = bw.run_case_study(split, labels)
        report_doc["comparison"] = study.rows
        _write_csv(
            out / "comparison.csv",
            ["system", "precision", "recall", "f1"],
            [
                [name, repr(row["precision"]), repr(row["recall"]), repr(row["f1"])]
                for name, row in study.rows.items()
            ],
        )
        outputs.append("comparison.csv")
        print(study.table())
    with open(out / "import_report.json", "w", encoding="utf-8") as fh:
        json.dump(report_doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "birdwatch", None, 0, outputs, started)
    print(f"birdwatch: {len(dataset.votes)} votes "
          f"({dup_fraction:.1%} duplicates removed) -> {out}")
    return 0


def cmd_report(args) -> int:
    started = time.time()
    rendered = []
    out = Path(args.out) if args.out else Path(args.run_dirs[0])
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"runs": []}
    for run_dir in args.run_dirs:
        run = Path(run_dir)
        produced = {}
        traj = run / "reputation_trajectory.csv"
        if traj.exists():
            cols = report.read_csv_columns(traj)
            steps = [float(v) for v in cols["step"]]
            series = {}
            for name in BEHAVIOR_COLUMNS:
                if name in cols and any(v != "" for v in cols[name]):
                    series[name] = (steps, [float(v) for v in cols[name]])
            target = out / f"{run.name}-reputation_means.svg"
            report.line_plot(series, "mean reputation by user type", "step", "reputation", target)
            produced["reputation_means"] = target.name
        reps = run / "reputations.csv"
        if reps.exists():
            cols = report.read_csv_columns(reps)
            groups: dict[str, list[float]] = {}
            for behavior, value in zip(cols["behavior"], cols["reputation"]):
                groups.setdefault(behavior, []).append(float(value))
            target = out / f"{run.name}-reputation_hist.svg"
            report.histogram_grid(groups, "final reputation distribution", target)
            produced["reputation_hist"] = target.name
        roc_file = run / "roc.csv"
        if roc_file.exists():
            cols = report.read_csv_columns(roc_file)
            curves: dict[str, list[tuple[float, float]]] = {}
            for rep, fpr, tpr in zip(cols["replicate"], cols["fpr"], cols["tpr"]):
                curves.setdefault(f"replicate {rep}", []).append((float(fpr), float(tpr)))
            band = []
            band_file = run / "roc_band.csv"
            if band_file.exists():
                bc = report.read_csv_columns(band_file)
                band = [
                    (float(f), float(lo), float(hi))
                    for f, lo, hi in zip(bc["fpr"], bc["tpr_lo"], bc["tpr_hi"])
                ]
            target = out / f"{run.name}-roc.svg"
            report.roc_plot(curves, "ROC", target, band=band)
            produced["roc"] = target.name
        if not produced:
            raise MissingArtifactsError(f"{run}: no renderable artifacts found")
        summary["runs"].append({"dir": str(run), "figures": produced})
        rendered.extend(produced.values())
    with open(out / "report_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(out, "report", None, 0, rendered + ["report_summary.json"], started)
    print(f"report: {len(rendered)} figure(s) -> {out}")
    return 0


# ---------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdledger",
        description="Deterministic crowd-truth simulation and evaluation suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="scenario config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--alpha", type=float, default=None, help="override blend weight")

    p = sub.add_parser("simulate", help="run one seeded simulation")
    common(p)
    p.add_argument("--models", default=None, help="checkpoint dir to blend with")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="bootstrap run plus both training stages")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="fresh run with trained models")
    common(p)
    p.add_argument("--models", required=True, help="checkpoint dir from train")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="grid of runs plus attack-impact regression")
    p.add_argument("--config", required=True, help="sweep spec JSON")
    p.add_argument("--out", default=None)
    p.add_argument("--runs", type=int, default=None, help="override random mix count")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("birdwatch", help="ingest community-note data and compare")
    p.add_argument("--notes", required=True, help="notes TSV")
    p.add_argument("--ratings", required=True, help="ratings TSV")
    p.add_argument("--labels", default=None, help="tweetId,label CSV")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_birdwatch)

    p = sub.add_parser("report", help="render SVG figures from run artifacts")
    p.add_argument("run_dirs", nargs="+", help="completed run directories")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, bw.BirdwatchError, MissingArtifactsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
