"""The (user, story, type, vote) action stream shared by engine and classifiers.

Simulation runs annotate every event with the story's hidden truth and a
malice flag; imported real-world data may leave either blank.  The CSV
dialect (header ``step,user,story,type,vote,story_truth,malicious``) is the
training-data interchange format.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

TYPE_POST = 0
TYPE_VOTE = 1


@dataclass(frozen=True)
class ActionEvent:
    step: int
    user: int
    story: int
    type: int  # TYPE_POST or TYPE_VOTE
    vote: int  # posts carry +1
    story_truth: Optional[int] = None
    malicious: Optional[bool] = None


def write_event_csv(events: Iterable[ActionEvent], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "user", "story", "type", "vote", "story_truth", "malicious"])
        for ev in events:
            writer.writerow(
                [
                    ev.step,
                    ev.user,
                    ev.story,
                    ev.type,
                    ev.vote,
                    "" if ev.story_truth is None else ev.story_truth,
                    "" if ev.malicious is None else int(ev.malicious),
                ]
            )


def read_event_csv(path) -> list[ActionEvent]:
    events = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            events.append(
                ActionEvent(
                    step=int(row["step"]),
                    user=int(row["user"]),
                    story=int(row["story"]),
                    type=int(row["type"]),
                    vote=int(row["vote"]),
                    story_truth=int(row["story_truth"]) if row["story_truth"] else None,
                    malicious=bool(int(row["malicious"])) if row["malicious"] else None,
                )
            )
    return events


def group_by_story(events: Iterable[ActionEvent]) -> dict[int, list[ActionEvent]]:
    """Story id -> its events in stream order."""
    grouped: dict[int, list[ActionEvent]] = {}
    for ev in events:
        grouped.setdefault(ev.story, []).append(ev)
    return grouped
