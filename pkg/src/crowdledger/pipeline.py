"""End-to-end flows: bootstrap training, evaluation, sweeps, ROC replication.

The bootstrap run settles stories crowd-only (blend weight zero), its event
log trains the action scorer, the scored sequences train the story model,
and a fresh seeded run evaluates the blended system.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from crowdledger import metrics as metrics_mod
from crowdledger.classifiers import (
    ClassifierPair,
    TrainingRun,
    detection_rates,
    score_actions,
    train_action_classifier,
    train_story_classifier,
)
from crowdledger.engine import ScenarioConfig, SimulationResult, confusion_counts, run_simulation
from crowdledger.events import group_by_story
from crowdledger.metrics import ConfusionCounts, classification_metrics
from crowdledger.population import BehaviorType, PopulationConfig

EVAL_SEED_OFFSET = 1_000_000  # evaluation world never reuses the training world


@dataclass(frozen=True)
class TrainingSettings:
    action: TrainingRun = field(default_factory=TrainingRun)
    story: TrainingRun = field(default_factory=lambda: TrainingRun(epochs=40, batch_size=32))
    target_mode: str = "contribution"
    # the bootstrap world multiplies stories and votes by this factor so every
    # user leaves enough behavioral evidence for the embeddings to transfer
    bootstrap_scale: int = 3


def story_sequences(pair_action, events):
    """Per-story action-score sequences with their hidden truth labels."""
    sequences, labels, story_ids = [], [], []
    for sid, story_events in group_by_story(events).items():
        truth = story_events[0].story_truth
        if truth is None:
            continue
        sequences.append(score_actions(pair_action, story_events).tolist())
        labels.append(truth)
        story_ids.append(sid)
    return story_ids, sequences, labels


def bootstrap_train(
    config: ScenarioConfig, settings: TrainingSettings = TrainingSettings()
) -> tuple[ClassifierPair, SimulationResult, dict]:
    """Crowd-only run at bootstrap scale, then both training stages on its log."""
    scale = max(1, settings.bootstrap_scale)
    boot_config = replace(
        config, n_stories=config.n_stories * scale, n_votes=config.n_votes * scale
    )
    bootstrap = run_simulation(boot_config, models=None)
    action_cfg = replace(settings.action, seed=settings.action.seed or config.seed)
    story_cfg = replace(settings.story, seed=settings.story.seed or config.seed)
    action, action_hist = train_action_classifier(
        bootstrap.events,
        config.n_users,
        boot_config.n_stories,
        action_cfg,
        target_mode=settings.target_mode,
    )
    _, sequences, labels = story_sequences(action, bootstrap.events)
    story, story_hist = train_story_classifier(sequences, labels, story_cfg)
    histories = {
        "action_loss": action_hist.loss_history,
        "story_loss": story_hist.loss_history,
        "story_validation_accuracy": story_hist.validation_metric,
    }
    return ClassifierPair(action, story), bootstrap, histories


def run_metrics(result: SimulationResult, pair: Optional[ClassifierPair] = None) -> dict:
    """Quality metrics of a finished run, plus detection rates when a model is given."""
    counts = confusion_counts(result)
    summary = classification_metrics(ConfusionCounts(**counts))
    out = {
        "precision": summary.precision,
        "recall": summary.recall,
        "f1": summary.f1,
        "accuracy": summary.accuracy,
        "counts": counts,
        "n_settlements": len(result.settlements),
        "n_events": len(result.events),
    }
    if pair is not None:
        behavior_of = {a.id: a.behavior.value for a in result.agents}
        out["detection"] = detection_rates(pair.action, result.events, behavior_of)
    return out


def evaluate_models(
    config: ScenarioConfig, pair: ClassifierPair, eval_seed: Optional[int] = None
) -> tuple[SimulationResult, dict]:
    """Fresh seeded world, blended settlement, full metric report."""
    seed = config.seed + EVAL_SEED_OFFSET if eval_seed is None else eval_seed
    eval_config = replace(config, seed=seed)
    result = run_simulation(eval_config, models=pair)
    return result, run_metrics(result, pair)


def full_pipeline(
    config: ScenarioConfig,
    settings: TrainingSettings = TrainingSettings(),
    eval_seed: Optional[int] = None,
) -> dict:
    """bootstrap -> train -> evaluate; returns models, runs and metrics."""
    pair, bootstrap, histories = bootstrap_train(config, settings)
    result, report = evaluate_models(config, pair, eval_seed)
    return {
        "models": pair,
        "bootstrap": bootstrap,
        "evaluation": result,
        "metrics": report,
        "histories": histories,
    }


# -------------------------------------------------------------------- sweeps


def mix_to_percentages(mix: dict) -> dict[BehaviorType, float]:
    """Name->share map (an "orchestrated" entry splits across both org types)."""
    out: dict[BehaviorType, float] = {}
    for name, share in mix.items():
        if name == "orchestrated":
            out[BehaviorType.ORCH_SLANDER] = out.get(BehaviorType.ORCH_SLANDER, 0.0) + share / 2.0
            out[BehaviorType.ORCH_WHITEWASH] = (
                out.get(BehaviorType.ORCH_WHITEWASH, 0.0) + share / 2.0
            )
        else:
            out[BehaviorType(name)] = out.get(BehaviorType(name), 0.0) + float(share)
    return out


def random_attack_mixes(
    count: int,
    rng: np.random.Generator,
    normal_min: int = 30,
    normal_max: int = 70,
    min_share: int = 5,
) -> list[dict]:
    """Draw integer percentage mixes: normal uniform in range, the rest split
    over troll/random/traitor/orchestrated/target with a floor per type."""
    others = ("troll", "random", "traitor", "orchestrated", "target")
    mixes = []
    for _ in range(count):
        while True:
            normal = int(rng.integers(normal_min, normal_max + 1))
            remaining = 100 - normal - min_share * len(others)
            if remaining >= 0:
                break
        extra = rng.multinomial(remaining, np.full(len(others), 1.0 / len(others)))
        mix = {"normal": float(normal)}
        for name, bonus in zip(others, extra):
            mix[name] = float(min_share + int(bonus))
        mixes.append(mix)
    return mixes


def sweep_run(
    base_config: ScenarioConfig,
    mix: dict,
    usv: tuple[int, int, int],
    seed: int,
    mode: str = "crowd",
    settings: TrainingSettings = TrainingSettings(),
) -> dict:
    """One sweep cell: metrics row keyed by its mix and scale."""
    percentages = mix_to_percentages(mix)
    config = replace(
        base_config,
        n_users=usv[0],
        n_stories=usv[1],
        n_votes=usv[2],
        population=PopulationConfig(
            percentages=percentages,
            accuracy_normal=base_config.population.accuracy_normal,
            traitor_honest_fraction=base_config.population.traitor_honest_fraction,
        ),
        seed=seed,
    )
    if mode == "full":
        outcome = full_pipeline(config, settings)
        report = outcome["metrics"]
        result = outcome["evaluation"]
    else:
        result = run_simulation(config, models=None)
        report = run_metrics(result)
    row = {
        "n_users": usv[0],
        "n_stories": usv[1],
        "n_votes": usv[2],
        "seed": seed,
        "normal": mix.get("normal", 0.0),
        "troll": mix.get("troll", 0.0),
        "random": mix.get("random", 0.0),
        "traitor": mix.get("traitor", 0.0),
        "orchestrated": mix.get("orchestrated", 0.0)
        or mix.get("orch_slander", 0.0) + mix.get("orch_whitewash", 0.0),
        "target": mix.get("target", 0.0),
        "precision": report["precision"],
        "recall": report["recall"],
        "f1": report["f1"],
        "accuracy": report["accuracy"],
    }
    row["_scores"] = [
        (s.final_score, result.story_truth[s.story_id]) for s in result.settlements
    ]
    return row


def roc_band(
    curves: Sequence[Sequence[tuple[float, float]]], grid_size: int = 21, level: float = 0.95
) -> list[tuple[float, float, float, float]]:
    """Mean TPR with a Student-t band over replicate ROC curves.

    Each curve is step-interpolated onto a common FPR grid; returns rows of
    (fpr, tpr_mean, tpr_lo, tpr_hi).
    """
    grid = np.linspace(0.0, 1.0, grid_size)
    rows = []
    for f in grid:
        tprs = []
        for curve in curves:
            fprs = np.array([p[0] for p in curve])
            tpr_vals = np.array([p[1] for p in curve])
            idx = np.searchsorted(fprs, f, side="right") - 1
            tprs.append(float(tpr_vals[max(idx, 0)]))
        if len(tprs) >= 2:
            mean, half = metrics_mod.mean_ci(tprs, level)
        else:
            mean, half = (tprs[0] if tprs else 0.0), 0.0
        rows.append((float(f), mean, max(0.0, mean - half), min(1.0, mean + half)))
    return rows
