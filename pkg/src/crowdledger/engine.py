"""Simulation engine: schedules posts and votes, settles stories, pays rewards.

One run walks a fixed number of logical steps.  Stories are posted at evenly
spaced steps; every other step a uniformly drawn non-poster agent votes on a
uniformly drawn open story it has not voted on.  After each vote (once a
story has a few votes) the equilibrium rule is evaluated; when it fires, or
the per-story vote cap is hit, the crowd score is blended with the
classifier score and the story settles if the blend clears the consensus
threshold.  Whatever is still open when the vote budget runs out is
force-settled on its current blend.  Every settlement seals the pending
transactions into a ledger block.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from crowdledger import dynamics
from crowdledger.dynamics import EquilibriumParams, VoteSeries
from crowdledger.events import ActionEvent, TYPE_POST, TYPE_VOTE
from crowdledger.ledger import Chain, RewardPolicy
from crowdledger.population import (
    AgentProfile,
    BehaviorType,
    PopulationConfig,
    build_population,
    decide_post,
    decide_vote,
)

MIN_VOTES_FOR_CHECK = 4
DEFAULT_MIX = {
    BehaviorType.NORMAL: 70.0,
    BehaviorType.TROLL: 5.0,
    BehaviorType.RANDOM: 5.0,
    BehaviorType.TRAITOR: 5.0,
    BehaviorType.ORCH_SLANDER: 2.5,
    BehaviorType.ORCH_WHITEWASH: 2.5,
    BehaviorType.TARGET: 10.0,
}


class EngineError(Exception):
    pass


class ConfigError(EngineError):
    pass


class NoVotesError(EngineError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    n_users: int = 100
    n_stories: int = 200
    n_votes: int = 1000
    true_ratio: float = 0.5
    population: PopulationConfig = field(
        default_factory=lambda: PopulationConfig(percentages=dict(DEFAULT_MIX))
    )
    equilibrium: EquilibriumParams = field(default_factory=EquilibriumParams)
    max_votes_per_story: int = 50
    consensus_threshold: float = 0.5  # theta
    blend_alpha: float = 0.5  # weight of the classifier score
    rewards: RewardPolicy = field(default_factory=RewardPolicy)
    seed: int = 0

    def validate(self) -> None:
        if self.n_users < 2:
            raise ConfigError("need at least 2 users (a poster cannot vote on itself)")
        if self.n_stories < 1:
            raise ConfigError("need at least one story")
        if self.n_votes < self.n_stories:
            raise ConfigError(
                f"vote budget {self.n_votes} below story count {self.n_stories}"
            )
        if not 0.0 <= self.true_ratio <= 1.0:
            raise ConfigError(f"true_ratio out of [0,1]: {self.true_ratio}")
        if not 0.0 < self.consensus_threshold <= 1.0:
            raise ConfigError(
                f"consensus_threshold out of (0,1]: {self.consensus_threshold}"
            )
        if not 0.0 <= self.blend_alpha <= 1.0:
            raise ConfigError(f"blend_alpha out of [0,1]: {self.blend_alpha}")
        if self.max_votes_per_story < 1:
            raise ConfigError("max_votes_per_story must be >= 1")
        try:
            self.population.validate()
        except Exception as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class SettlementResult:
    story_id: int
    crowd_score: float
    classifier_score: float
    final_score: float
    consensus_label: int
    reward_deltas: dict[int, int]
    forced: bool
    step: int
    n_votes: int


class NotReady:
    """Sentinel: blend below threshold, voting continues."""

    def __bool__(self) -> bool:
        return False


NOT_READY = NotReady()


@dataclass
class SimulationResult:
    chain: Chain
    events: list[ActionEvent]
    settlements: list[SettlementResult]
    agents: list[AgentProfile]
    story_truth: dict[int, int]
    reputation_trace: list[dict]  # one row per settlement: step + per-type mean
    config: ScenarioConfig


def compute_crowd_score(votes: Sequence[int] | VoteSeries) -> float:
    values = votes.values if isinstance(votes, VoteSeries) else list(votes)
    if not values:
        raise NoVotesError("crowd score of an empty vote list")
    return float(np.mean(values))


def settle(
    story_id: int,
    votes: Sequence[int],
    classifier_score: float,
    alpha: float,
    theta: float,
    forced: bool = False,
    step: int = 0,
) -> SettlementResult | NotReady:
    """Blend crowd and classifier scores; NOT_READY below threshold unless forced."""
    crowd = compute_crowd_score(votes) if len(votes) else 0.0
    final = alpha * classifier_score + (1.0 - alpha) * crowd
    if abs(final) < theta and not forced:
        return NOT_READY
    label = 1 if final >= 0 else -1
    return SettlementResult(
        story_id=story_id,
        crowd_score=crowd,
        classifier_score=classifier_score,
        final_score=final,
        consensus_label=label,
        reward_deltas={},
        forced=forced,
        step=step,
        n_votes=len(votes),
    )


def apply_rewards(
    result: SettlementResult,
    poster_id: int,
    voter_votes: Sequence[tuple[int, int]],
    policy: RewardPolicy = RewardPolicy(),
    story_truth: Optional[int] = None,
) -> dict[int, int]:
    """Reputation deltas for one settlement.

    Voters matching the consensus label earn ``voter_correct``, the rest pay
    ``voter_wrong``.  The poster is judged against the consensus label, or
    against the hidden truth when the policy says so.
    """
    label = result.consensus_label
    deltas: dict[int, int] = {}
    for uid, value in voter_votes:
        delta = policy.voter_correct if value == label else policy.voter_wrong
        deltas[uid] = deltas.get(uid, 0) + delta
    judge = label
    if policy.judge_poster_by_truth:
        if story_truth is None:
            raise ValueError("judge_poster_by_truth requires the story truth")
        judge = story_truth
    poster_delta = policy.poster_true if judge == 1 else policy.poster_false
    deltas[poster_id] = deltas.get(poster_id, 0) + poster_delta
    return deltas


def _mean_reputation_by_type(
    chain: Chain, agents: Sequence[AgentProfile]
) -> dict[str, float]:
    sums: dict[str, list[int]] = {}
    for agent in agents:
        sums.setdefault(agent.behavior.value, []).append(chain.accounts.get(agent.id, 0))
    return {name: float(np.mean(vals)) for name, vals in sums.items()}


class _Scheduler:
    """Deterministic event slots: post slots evenly spaced, the rest votes."""

    def __init__(self, n_stories: int, n_votes: int):
        self.total = n_stories + n_votes
        self.post_slots = {(i * self.total) // n_stories for i in range(n_stories)}
        if len(self.post_slots) != n_stories:
            raise ConfigError("post slots collide; vote budget too small")


def run_simulation(config: ScenarioConfig, models=None) -> SimulationResult:
    """Execute one seeded run.

    ``models`` is anything with a ``classify(story_events) -> float`` method
    (the trained classifier pair); without it the run is crowd-only and the
    blend weight is forced to zero.
    """
    config.validate()
    alpha = config.blend_alpha if models is not None else 0.0
    rng = np.random.default_rng(config.seed)
    pop_config = config.population
    if pop_config.seed is None:
        pop_config = replace(pop_config, seed=config.seed)
    agents = build_population(pop_config, config.n_users)

    chain = Chain()
    events: list[ActionEvent] = []
    settlements: list[SettlementResult] = []
    story_truth: dict[int, int] = {}
    story_events: dict[int, list[ActionEvent]] = {}
    open_stories: list[int] = []
    trace: list[dict] = []

    schedule = _Scheduler(config.n_stories, config.n_votes)
    horizon = schedule.total
    next_story_id = 0
    votes_used = 0

    def finalize(story_id: int, forced: bool, step: int) -> None:
        record = chain.stories[story_id]
        vote_values = [v for _, v, _ in record.votes]
        clf_score = 0.0
        if models is not None and alpha > 0.0:
            clf_score = models.classify(story_events[story_id])
        outcome = settle(
            story_id,
            vote_values,
            clf_score,
            alpha,
            config.consensus_threshold,
            forced=forced,
            step=step,
        )
        if isinstance(outcome, NotReady):
            return
        deltas = apply_rewards(
            outcome,
            record.poster_id,
            [(u, v) for u, v, _ in record.votes],
            config.rewards,
            story_truth.get(story_id),
        )
        outcome = replace(outcome, reward_deltas=deltas)
        chain.settle_story(story_id, outcome.consensus_label, deltas, step)
        settlements.append(outcome)
        open_stories.remove(story_id)
        trace.append({"step": step, **_mean_reputation_by_type(chain, agents)})

    for step in range(horizon):
        if step in schedule.post_slots:
            poster = agents[int(rng.integers(config.n_users))]
            truth, malicious = decide_post(poster, config.true_ratio, rng)
            story_id = next_story_id
            next_story_id += 1
            chain.post_story(poster.id, story_id, step)
            story_truth[story_id] = truth
            ev = ActionEvent(step, poster.id, story_id, TYPE_POST, 1, truth, malicious)
            events.append(ev)
            story_events[story_id] = [ev]
            open_stories.append(story_id)
            continue

        if votes_used >= config.n_votes or not open_stories:
            continue
        pick = _pick_vote(rng, agents, chain, open_stories, config.n_users)
        if pick is None:
            continue
        agent, story_id = pick
        record = chain.stories[story_id]
        vote, malicious = decide_vote(
            agent, record.poster_id, story_truth[story_id], step, horizon, rng
        )
        chain.submit_vote(agent.id, story_id, vote, step)
        votes_used += 1
        ev = ActionEvent(
            step, agent.id, story_id, TYPE_VOTE, vote, story_truth[story_id], malicious
        )
        events.append(ev)
        story_events[story_id].append(ev)

        n_votes = len(record.votes)
        if n_votes >= MIN_VOTES_FOR_CHECK:
            values = [v for _, v, _ in record.votes]
            series = VoteSeries(values)
            entropy = dynamics.shannon_entropy(series.direction_counts())
            estimate = dynamics.lyapunov_from_series(series)
            at_cap = n_votes >= config.max_votes_per_story
            if at_cap or dynamics.equilibrium(
                estimate, entropy, config.equilibrium, n_votes
            ):
                finalize(story_id, forced=at_cap, step=step)

    for story_id in sorted(open_stories):
        finalize(story_id, forced=True, step=horizon)

    return SimulationResult(
        chain=chain,
        events=events,
        settlements=settlements,
        agents=agents,
        story_truth=story_truth,
        reputation_trace=trace,
        config=config,
    )


def _pick_vote(rng, agents, chain: Chain, open_stories: list[int], n_users: int):
    """Uniform agent, then uniform admissible open story; a few retries."""
    for _ in range(32):
        agent = agents[int(rng.integers(n_users))]
        candidates = [
            sid
            for sid in open_stories
            if chain.stories[sid].poster_id != agent.id
            and not chain.stories[sid].has_vote_from(agent.id)
        ]
        if candidates:
            return agent, candidates[int(rng.integers(len(candidates)))]
    # dense fallback: scan agents in a seeded order for any admissible pair
    for idx in rng.permutation(n_users):
        agent = agents[int(idx)]
        candidates = [
            sid
            for sid in open_stories
            if chain.stories[sid].poster_id != agent.id
            and not chain.stories[sid].has_vote_from(agent.id)
        ]
        if candidates:
            return agent, candidates[int(rng.integers(len(candidates)))]
    return None


def confusion_counts(result: SimulationResult) -> dict[str, int]:
    """Settlement labels vs hidden truth; positive class is "true story"."""
    tp = fp = tn = fn = 0
    for s in result.settlements:
        truth = result.story_truth[s.story_id]
        if s.consensus_label == 1:
            if truth == 1:
                tp += 1
            else:
                fp += 1
        else:
            if truth == -1:
                tn += 1
            else:
                fn += 1
    return {"tp": tp, "fp": fp, "tn": tn, "fn": fn}
