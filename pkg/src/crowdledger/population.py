"""Agent populations: honest voters plus the attack taxonomy.

Behavior types: normal users judge a story's truth with a configurable
accuracy; trolls always invert it; random users flip coins; traitors act
honestly for the early part of the horizon and then turn troll; orchestrated
slanderers/whitewashers down- or upvote the stories of a shared target set
and act normally otherwise; targets behave as normal users.

Agents are immutable once built and all decisions are pure functions of the
agent, story context and an explicit RNG stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np

DEFAULT_ACCURACY = 0.9
DEFAULT_TRAITOR_HONEST_FRACTION = 0.6
PERCENT_TOLERANCE = 1e-9


class PopulationError(Exception):
    pass


class BadPercentagesError(PopulationError):
    pass


class SelfVoteRequestError(PopulationError):
    pass


class BehaviorType(Enum):
    NORMAL = "normal"
    TROLL = "troll"
    RANDOM = "random"
    TRAITOR = "traitor"
    ORCH_SLANDER = "orch_slander"
    ORCH_WHITEWASH = "orch_whitewash"
    TARGET = "target"


ORCHESTRATED = (BehaviorType.ORCH_SLANDER, BehaviorType.ORCH_WHITEWASH)
MALICIOUS_TYPES = (
    BehaviorType.TROLL,
    BehaviorType.RANDOM,
    BehaviorType.TRAITOR,
    BehaviorType.ORCH_SLANDER,
    BehaviorType.ORCH_WHITEWASH,
)


@dataclass(frozen=True)
class AgentProfile:
    id: int
    behavior: BehaviorType
    accuracy: float = DEFAULT_ACCURACY
    group_id: Optional[int] = None
    targets: frozenset[int] = frozenset()
    traitor_honest_fraction: float = DEFAULT_TRAITOR_HONEST_FRACTION


@dataclass(frozen=True)
class PopulationConfig:
    percentages: Mapping[BehaviorType, float]
    accuracy_normal: float = DEFAULT_ACCURACY
    traitor_honest_fraction: float = DEFAULT_TRAITOR_HONEST_FRACTION
    seed: Optional[int] = None  # None: inherit the scenario seed

    def validate(self) -> None:
        total = 0.0
        for btype, pct in self.percentages.items():
            if not isinstance(btype, BehaviorType):
                raise BadPercentagesError(f"unknown behavior type {btype!r}")
            if pct < 0:
                raise BadPercentagesError(f"negative percentage for {btype.value}: {pct}")
            total += pct
        if abs(total - 100.0) > PERCENT_TOLERANCE:
            raise BadPercentagesError(f"percentages sum to {total}, expected 100")
        if not 0.0 <= self.accuracy_normal <= 1.0:
            raise BadPercentagesError(f"accuracy_normal out of [0,1]: {self.accuracy_normal}")
        if not 0.0 <= self.traitor_honest_fraction <= 1.0:
            raise BadPercentagesError(
                f"traitor_honest_fraction out of [0,1]: {self.traitor_honest_fraction}"
            )
        has_orch = any(self.percentages.get(b, 0) > 0 for b in ORCHESTRATED)
        if has_orch and self.percentages.get(BehaviorType.TARGET, 0) <= 0:
            raise BadPercentagesError("orchestrated types need a positive target share")


def apportion(percentages: Mapping[BehaviorType, float], n: int) -> dict[BehaviorType, int]:
    """Largest-remainder apportionment of n agents; ties break in enum order."""
    order = [b for b in BehaviorType if percentages.get(b, 0) > 0]
    quotas = {b: n * percentages[b] / 100.0 for b in order}
    counts = {b: int(quotas[b]) for b in order}
    leftover = n - sum(counts.values())
    by_remainder = sorted(order, key=lambda b: (-(quotas[b] - counts[b]), list(BehaviorType).index(b)))
    for b in by_remainder[:leftover]:
        counts[b] += 1
    return counts


def build_population(config: PopulationConfig, n: int) -> list[AgentProfile]:
    """Deterministically build n agents from a percentage mix.

    Ids are assigned in behavior-type declaration order.  All orchestrated
    agents form a single coalition (group 0) whose targets are the
    target-type agents, split evenly between slander and whitewash when both
    are present.
    """
    if n < 1:
        raise BadPercentagesError(f"population size must be >= 1, got {n}")
    config.validate()
    counts = apportion(config.percentages, n)

    assignments: list[BehaviorType] = []
    for btype in BehaviorType:
        assignments.extend([btype] * counts.get(btype, 0))

    target_ids = [i for i, b in enumerate(assignments) if b is BehaviorType.TARGET]
    n_slander = counts.get(BehaviorType.ORCH_SLANDER, 0)
    n_whitewash = counts.get(BehaviorType.ORCH_WHITEWASH, 0)
    if n_slander and n_whitewash:
        half = len(target_ids) // 2
        slander_targets = frozenset(target_ids[:half] or target_ids)
        whitewash_targets = frozenset(target_ids[half:] or target_ids)
    else:
        slander_targets = whitewash_targets = frozenset(target_ids)

    agents = []
    for uid, btype in enumerate(assignments):
        group = 0 if btype in ORCHESTRATED else None
        if btype is BehaviorType.ORCH_SLANDER:
            targets = slander_targets
        elif btype is BehaviorType.ORCH_WHITEWASH:
            targets = whitewash_targets
        else:
            targets = frozenset()
        agents.append(
            AgentProfile(
                id=uid,
                behavior=btype,
                accuracy=config.accuracy_normal,
                group_id=group,
                targets=targets,
                traitor_honest_fraction=config.traitor_honest_fraction,
            )
        )
    return agents


def _honest_vote(agent: AgentProfile, ground_truth: int, rng: np.random.Generator) -> int:
    if rng.random() < agent.accuracy:
        return ground_truth
    return -ground_truth


def decide_vote(
    agent: AgentProfile,
    poster_id: int,
    ground_truth: int,
    step: int,
    horizon: int,
    rng: np.random.Generator,
) -> tuple[int, bool]:
    """One vote decision: (vote value, whether the action is an attack)."""
    if agent.id == poster_id:
        raise SelfVoteRequestError(f"agent {agent.id} asked to vote on its own story")
    b = agent.behavior
    if b in (BehaviorType.NORMAL, BehaviorType.TARGET):
        return _honest_vote(agent, ground_truth, rng), False
    if b is BehaviorType.TROLL:
        return -ground_truth, True
    if b is BehaviorType.RANDOM:
        return (1 if rng.random() < 0.5 else -1), True
    if b is BehaviorType.TRAITOR:
        if step < agent.traitor_honest_fraction * horizon:
            return _honest_vote(agent, ground_truth, rng), False
        return -ground_truth, True
    if b is BehaviorType.ORCH_SLANDER:
        if poster_id in agent.targets:
            return -1, True
        return _honest_vote(agent, ground_truth, rng), False
    if b is BehaviorType.ORCH_WHITEWASH:
        if poster_id in agent.targets:
            return 1, True
        return _honest_vote(agent, ground_truth, rng), False
    raise PopulationError(f"unhandled behavior {b}")


def decide_post(
    agent: AgentProfile, true_ratio: float, rng: np.random.Generator
) -> tuple[int, bool]:
    """Draw a story's hidden truth; posting a falsehood counts as malicious."""
    if not 0.0 <= true_ratio <= 1.0:
        raise ValueError(f"true_ratio out of [0,1]: {true_ratio}")
    truth = 1 if rng.random() < true_ratio else -1
    return truth, truth == -1
