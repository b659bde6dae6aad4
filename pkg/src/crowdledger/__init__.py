"""crowdledger: deterministic crowd-truth simulation over a hash-chained ledger.

Stories are posted and voted on over an append-only chain; an equilibrium
detector stops voting; crowd and classifier scores blend into a consensus
label that drives a reward-based reputation system; adversarial agent
populations stress the whole loop.
"""

from crowdledger import (
    birdwatch,
    classifiers,
    dynamics,
    engine,
    events,
    ledger,
    metrics,
    neural,
    pipeline,
    population,
    report,
)

__version__ = "0.1.0"

__all__ = [
    "birdwatch",
    "classifiers",
    "dynamics",
    "engine",
    "events",
    "ledger",
    "metrics",
    "neural",
    "pipeline",
    "population",
    "report",
    "__version__",
]
