import numpy as np
import pytest

from crowdledger.population import (
    AgentProfile,
    BadPercentagesError,
    BehaviorType,
    PopulationConfig,
    SelfVoteRequestError,
    apportion,
    build_population,
    decide_post,
    decide_vote,
)

FIG_MIX = {
    BehaviorType.NORMAL: 70.0,
    BehaviorType.TROLL: 5.0,
    BehaviorType.RANDOM: 5.0,
    BehaviorType.TRAITOR: 5.0,
    BehaviorType.ORCH_SLANDER: 5.0,
    BehaviorType.TARGET: 10.0,
}


def counts_by_type(agents):
    out = {}
    for a in agents:
        out[a.behavior] = out.get(a.behavior, 0) + 1
    return out


def test_build_population_exact_counts():
    config = PopulationConfig(percentages=FIG_MIX, seed=1)
    agents = build_population(config, 100)
    assert counts_by_type(agents) == {
        BehaviorType.NORMAL: 70,
        BehaviorType.TROLL: 5,
        BehaviorType.RANDOM: 5,
        BehaviorType.TRAITOR: 5,
        BehaviorType.ORCH_SLANDER: 5,
        BehaviorType.TARGET: 10,
    }
    assert [a.id for a in agents] == list(range(100))


def test_build_population_single_normal():
    config = PopulationConfig(percentages={BehaviorType.NORMAL: 100.0})
    agents = build_population(config, 1)
    assert len(agents) == 1 and agents[0].behavior is BehaviorType.NORMAL


def test_bad_percentages():
    with pytest.raises(BadPercentagesError):
        PopulationConfig(percentages={BehaviorType.NORMAL: 95.0}).validate()
    with pytest.raises(BadPercentagesError):
        PopulationConfig(
            percentages={BehaviorType.NORMAL: 105.0, BehaviorType.TROLL: -5.0}
        ).validate()
    with pytest.raises(BadPercentagesError):
        # orchestrated attackers with nobody to target
        PopulationConfig(
            percentages={BehaviorType.NORMAL: 95.0, BehaviorType.ORCH_SLANDER: 5.0}
        ).validate()


def test_apportionment_handles_fractional_shares():
    counts = apportion(
        {
            BehaviorType.NORMAL: 70.0,
            BehaviorType.ORCH_SLANDER: 2.5,
            BehaviorType.ORCH_WHITEWASH: 2.5,
            BehaviorType.TROLL: 15.0,
            BehaviorType.TARGET: 10.0,
        },
        100,
    )
    assert sum(counts.values()) == 100
    assert counts[BehaviorType.ORCH_SLANDER] + counts[BehaviorType.ORCH_WHITEWASH] == 5


def test_orchestrated_targets_split_between_groups():
    mix = {
        BehaviorType.NORMAL: 60.0,
        BehaviorType.ORCH_SLANDER: 10.0,
        BehaviorType.ORCH_WHITEWASH: 10.0,
        BehaviorType.TARGET: 20.0,
    }
    agents = build_population(PopulationConfig(percentages=mix), 50)
    targets = {a.id for a in agents if a.behavior is BehaviorType.TARGET}
    slander = [a for a in agents if a.behavior is BehaviorType.ORCH_SLANDER]
    whitewash = [a for a in agents if a.behavior is BehaviorType.ORCH_WHITEWASH]
    assert slander and whitewash
    assert all(a.targets == slander[0].targets for a in slander)
    assert all(a.targets == whitewash[0].targets for a in whitewash)
    assert slander[0].targets | whitewash[0].targets == targets
    assert slander[0].targets.isdisjoint(whitewash[0].targets)
    assert all(a.group_id == 0 for a in slander + whitewash)
    # non-orchestrated agents carry no targets
    assert all(not a.targets for a in agents if a.behavior not in
               (BehaviorType.ORCH_SLANDER, BehaviorType.ORCH_WHITEWASH))


def test_build_population_deterministic():
    config = PopulationConfig(percentages=FIG_MIX, seed=42)
    assert build_population(config, 100) == build_population(config, 100)


def test_troll_always_inverts():
    troll = AgentProfile(id=1, behavior=BehaviorType.TROLL)
    rng = np.random.default_rng(0)
    for truth in (1, -1):
        for _ in range(50):
            vote, malicious = decide_vote(troll, 0, truth, 3, 100, rng)
            assert vote == -truth and malicious


def test_normal_perfect_accuracy_is_honest():
    agent = AgentProfile(id=1, behavior=BehaviorType.NORMAL, accuracy=1.0)
    rng = np.random.default_rng(0)
    vote, malicious = decide_vote(agent, 0, -1, 0, 10, rng)
    assert (vote, malicious) == (-1, False)


def test_slander_acts_normally_off_target():
    agent = AgentProfile(
        id=1, behavior=BehaviorType.ORCH_SLANDER, accuracy=1.0, group_id=0,
        targets=frozenset({9}),
    )
    rng = np.random.default_rng(0)
    assert decide_vote(agent, 5, 1, 0, 10, rng) == (1, False)
    assert decide_vote(agent, 9, 1, 0, 10, rng) == (-1, True)


def test_whitewash_upvotes_targets_only():
    agent = AgentProfile(
        id=1, behavior=BehaviorType.ORCH_WHITEWASH, accuracy=1.0, group_id=0,
        targets=frozenset({9}),
    )
    rng = np.random.default_rng(0)
    assert decide_vote(agent, 9, -1, 0, 10, rng) == (1, True)
    assert decide_vote(agent, 5, -1, 0, 10, rng) == (-1, False)


def test_traitor_phase_split():
    agent = AgentProfile(
        id=1, behavior=BehaviorType.TRAITOR, accuracy=1.0, traitor_honest_fraction=0.6
    )
    rng = np.random.default_rng(1)
    horizon = 1000
    flags = []
    for step in range(horizon):
        vote, malicious = decide_vote(agent, 0, 1, step, horizon, rng)
        flags.append(malicious)
        if malicious:
            assert vote == -1  # attack phase inverts
    assert not flags[0] and flags[-1]
    assert abs(np.mean(flags) - 0.4) < 0.05


def test_random_votes_are_centered():
    agent = AgentProfile(id=1, behavior=BehaviorType.RANDOM)
    rng = np.random.default_rng(2)
    votes = [decide_vote(agent, 0, 1, 0, 10, rng)[0] for _ in range(10_000)]
    assert all(m for _, m in (decide_vote(agent, 0, 1, 0, 10, rng) for _ in range(10)))
    assert abs(np.mean(votes)) < 0.05


def test_self_vote_request_rejected():
    agent = AgentProfile(id=3, behavior=BehaviorType.NORMAL)
    with pytest.raises(SelfVoteRequestError):
        decide_vote(agent, 3, 1, 0, 10, np.random.default_rng(0))


def test_decide_post_extremes():
    agent = AgentProfile(id=0, behavior=BehaviorType.NORMAL)
    rng = np.random.default_rng(0)
    assert all(decide_post(agent, 1.0, rng) == (1, False) for _ in range(20))
    assert all(decide_post(agent, 0.0, rng) == (-1, True) for _ in range(20))


def test_decide_post_balanced_ratio():
    # binomial oracle: 3 sigma of a fair coin over 1e4 draws is 0.015 < 0.02
    agent = AgentProfile(id=0, behavior=BehaviorType.NORMAL)
    rng = np.random.default_rng(3)
    draws = [decide_post(agent, 0.5, rng)[0] for _ in range(10_000)]
    assert abs(np.mean([v == 1 for v in draws]) - 0.5) < 0.02


def test_vote_decisions_deterministic_under_seed():
    agents = build_population(PopulationConfig(percentages=FIG_MIX, seed=9), 100)

    def run():
        rng = np.random.default_rng(77)
        return [
            decide_vote(a, (a.id + 1) % 100, 1, s, 200, rng)
            for s, a in enumerate(agents)
        ]

    assert run() == run()
