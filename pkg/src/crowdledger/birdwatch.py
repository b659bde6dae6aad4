"""Community-note data ingestion and the reference-system comparison harness.

Notes on tweets and ratings on notes map onto the engine's story/vote model:
a note is a vote on its tweet (+1 for not-misleading, -1 for misleading), an
agreeing rating repeats the note's value, a disagreeing one inverts it.
Participant and tweet ids are re-indexed densely, exact duplicate votes are
dropped, and an 80/20 temporal split feeds the story-classifier path (no
malice annotations exist for real users, so the action scorer trains on
story-truth targets of the labeled subset).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Mapping, Optional, Sequence

from crowdledger.classifiers import (
    ClassifierPair,
    TrainingRun,
    classify_story,
    train_action_classifier,
    train_story_classifier,
    score_actions,
)
from crowdledger.events import ActionEvent, TYPE_VOTE, group_by_story
from crowdledger.metrics import ClassificationMetrics, ConfusionCounts, classification_metrics

NOTES_COLUMNS = ("noteId", "tweetId", "participantId", "classification", "createdAtMillis")
RATINGS_COLUMNS = ("noteId", "participantId", "agree", "disagree", "createdAtMillis")

# Published baseline on the same annotated tweet set (percent P/R/F1).
HAWKEYE_SUPERVISED = {"precision": 0.85, "recall": 0.74, "f1": 0.76}
HAWKEYE_UNSUPERVISED = {"precision": 0.79, "recall": 0.78, "f1": 0.78}

CLASSIFICATION_VALUES = {
    "NOT_MISLEADING": 1,
    "MISINFORMED_OR_POTENTIALLY_MISLEADING": -1,
    "MISLEADING": -1,
}


class BirdwatchError(Exception):
    pass


class MissingColumnError(BirdwatchError):
    pass


class UnreadableFileError(BirdwatchError):
    pass


class NoLabelsError(BirdwatchError):
    pass


class NoteClass(Enum):
    NOT_MISLEADING = 1
    MISLEADING = -1


class Agreement(Enum):
    AGREE = "agree"
    DISAGREE = "disagree"
    NONE = "none"


@dataclass(frozen=True)
class NoteRecord:
    note_id: str
    tweet_id: str
    participant_id: str
    classification: NoteClass
    created_at_millis: int


@dataclass(frozen=True)
class RatingRecord:
    note_id: str
    rater_participant_id: str
    agreement: Agreement
    created_at_millis: int


@dataclass
class ParseResult:
    records: list
    skipped: int
    contradictory: int = 0  # ratings setting both the agree and disagree flags


@dataclass
class ImportedDataset:
    """Stories are tweets, users are participants, both densely re-indexed."""

    user_ids: list[str]
    tweet_ids: list[str]
    votes: list[tuple[int, int, int, int]]  # (user, story, value, millis) time-ordered
    dropped_none: int = 0
    dropped_contradictory: int = 0
    dropped_orphans: int = 0
    straddled_stories: int = 0

    def user_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.user_ids)}

    def tweet_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tweet_ids)}


def _read_tsv(path, required: Sequence[str]):
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh, delimiter="\t")
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise MissingColumnError(f"{path}: missing column {column!r}")
        return list(reader)


def parse_notes(path) -> ParseResult:
    rows = _read_tsv(path, NOTES_COLUMNS)
    records, skipped = [], 0
    for row in rows:
        value = CLASSIFICATION_VALUES.get((row.get("classification") or "").strip())
        try:
            millis = int(row["createdAtMillis"])
        except (ValueError, TypeError):
            millis = None
        note_id = (row.get("noteId") or "").strip()
        tweet_id = (row.get("tweetId") or "").strip()
        participant = (row.get("participantId") or "").strip()
        if value is None or millis is None or not note_id or not tweet_id or not participant:
            skipped += 1
            continue
        records.append(
            NoteRecord(
                note_id,
                tweet_id,
                participant,
                NoteClass.NOT_MISLEADING if value == 1 else NoteClass.MISLEADING,
                millis,
            )
        )
    return ParseResult(records, skipped)


def parse_ratings(path) -> ParseResult:
    rows = _read_tsv(path, RATINGS_COLUMNS)
    records, skipped, contradictory = [], 0, 0
    for row in rows:
        try:
            agree = int(row["agree"])
            disagree = int(row["disagree"])
            millis = int(row["createdAtMillis"])
        except (ValueError, TypeError):
            skipped += 1
            continue
        note_id = (row.get("noteId") or "").strip()
        participant = (row.get("participantId") or "").strip()
        if not note_id or not participant:
            skipped += 1
            continue
        if agree and disagree:
            contradictory += 1
            continue
        if agree:
            agreement = Agreement.AGREE
        elif disagree:
            agreement = Agreement.DISAGREE
        else:
            agreement = Agreement.NONE
        records.append(RatingRecord(note_id, participant, agreement, millis))
    return ParseResult(records, skipped, contradictory)


def to_votes(notes: Sequence[NoteRecord], ratings: Sequence[RatingRecord]) -> ImportedDataset:
    """Map notes and ratings onto (user, story, value) votes, time-ordered."""
    note_by_id = {n.note_id: n for n in notes}
    raw: list[tuple[int, str, str, int]] = []  # (millis, participant, tweet, value)
    for n in notes:
        raw.append((n.created_at_millis, n.participant_id, n.tweet_id, n.classification.value))
    dropped_none = dropped_orphans = 0
    for r in ratings:
        if r.agreement is Agreement.NONE:
            dropped_none += 1
            continue
        note = note_by_id.get(r.note_id)
        if note is None:
            dropped_orphans += 1
            continue
        value = note.classification.value
        if r.agreement is Agreement.DISAGREE:
            value = -value
        raw.append((r.created_at_millis, r.rater_participant_id, note.tweet_id, value))
    raw.sort(key=lambda item: item[0])

    user_ids: list[str] = []
    tweet_ids: list[str] = []
    user_idx: dict[str, int] = {}
    tweet_idx: dict[str, int] = {}
    votes = []
    for millis, participant, tweet, value in raw:
        if participant not in user_idx:
            user_idx[participant] = len(user_ids)
            user_ids.append(participant)
        if tweet not in tweet_idx:
            tweet_idx[tweet] = len(tweet_ids)
            tweet_ids.append(tweet)
        votes.append((user_idx[participant], tweet_idx[tweet], value, millis))
    return ImportedDataset(
        user_ids,
        tweet_ids,
        votes,
        dropped_none=dropped_none,
        dropped_orphans=dropped_orphans,
    )


def dedup(dataset: ImportedDataset) -> tuple[ImportedDataset, float]:
    """Drop exact duplicate (user, story, value) votes, keeping the earliest."""
    seen = set()
    kept = []
    for vote in dataset.votes:
        key = vote[:3]
        if key in seen:
            continue
        seen.add(key)
        kept.append(vote)
    removed = len(dataset.votes) - len(kept)
    fraction = removed / len(dataset.votes) if dataset.votes else 0.0
    out = replace(dataset, votes=kept)
    return out, fraction


@dataclass
class TemporalSplit:
    train: ImportedDataset
    test: ImportedDataset
    straddled: int


def temporal_split(dataset: ImportedDataset, train_fraction: float = 0.8) -> TemporalSplit:
    """Split at the vote-order boundary; straddling stories go to test."""
    if not 0.0 <= train_fraction <= 1.0:
        raise ValueError(f"train_fraction out of [0,1]: {train_fraction}")
    boundary = int(len(dataset.votes) * train_fraction)
    early = {v[1] for v in dataset.votes[:boundary]}
    late = {v[1] for v in dataset.votes[boundary:]}
    straddled = len(early & late)
    test_stories = late
    train_votes = [v for v in dataset.votes if v[1] not in test_stories]
    test_votes = [v for v in dataset.votes if v[1] in test_stories]
    train = replace(dataset, votes=train_votes, straddled_stories=0)
    test = replace(dataset, votes=test_votes, straddled_stories=straddled)
    return TemporalSplit(train, test, straddled)


def load_labels(path) -> dict[str, int]:
    """tweetId,label CSV with label in {true, false} -> tweet id -> +-1."""
    labels = {}
    try:
        fh = open(path, "r", newline="", encoding="utf-8")
    except OSError as exc:
        raise UnreadableFileError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "tweetId" not in reader.fieldnames or "label" not in reader.fieldnames:
            raise MissingColumnError(f"{path}: need columns tweetId,label")
        for row in reader:
            text = (row["label"] or "").strip().lower()
            if text in ("true", "1", "+1"):
                labels[row["tweetId"].strip()] = 1
            elif text in ("false", "-1", "0"):
                labels[row["tweetId"].strip()] = -1
    return labels


def dataset_to_events(
    dataset: ImportedDataset, labels: Optional[Mapping[str, int]] = None
) -> list[ActionEvent]:
    """Engine event-log dialect: one vote event per row, no malice flags."""
    labels = labels or {}
    truth_by_story = {
        idx: labels[tweet] for idx, tweet in enumerate(dataset.tweet_ids) if tweet in labels
    }
    return [
        ActionEvent(step, user, story, TYPE_VOTE, value, truth_by_story.get(story), None)
        for step, (user, story, value, _) in enumerate(dataset.votes)
    ]


@dataclass
class CaseStudyResult:
    rows: dict[str, dict[str, float]]
    models: ClassifierPair
    labeled_train: int
    labeled_test: int

    def table(self) -> str:
        lines = [f"{'system':<24s}{'precision':>10s}{'recall':>8s}{'f1':>8s}"]
        for name, row in self.rows.items():
            lines.append(
                f"{name:<24s}{row['precision']:>10.2f}{row['recall']:>8.2f}{row['f1']:>8.2f}"
            )
        return "\n".join(lines)


def _metrics_for(
    pair: ClassifierPair, events_by_story, story_ids, truth_by_story
) -> ClassificationMetrics:
    tp = fp = tn = fn = 0
    for sid in story_ids:
        pred = 1 if classify_story(pair, events_by_story[sid]) >= 0 else -1
        truth = truth_by_story[sid]
        if pred == 1 and truth == 1:
            tp += 1
        elif pred == 1:
            fp += 1
        elif truth == -1:
            tn += 1
        else:
            fn += 1
    return classification_metrics(ConfusionCounts(tp, fp, tn, fn))


def run_case_study(
    split: TemporalSplit,
    labels: Mapping[str, int],
    training: TrainingRun = TrainingRun(),
) -> CaseStudyResult:
    """Train the story-classifier path on the early portion, report both sides."""
    if not labels:
        raise NoLabelsError("no ground-truth labels supplied")
    train_events = dataset_to_events(split.train, labels)
    test_events = dataset_to_events(split.test, labels)
    truth_train = {ev.story: ev.story_truth for ev in train_events if ev.story_truth is not None}
    truth_test = {ev.story: ev.story_truth for ev in test_events if ev.story_truth is not None}
    if not truth_train or not truth_test:
        raise NoLabelsError("labels cover no stories on one side of the split")

    n_users = len(split.train.user_ids)
    n_stories = len(split.train.tweet_ids)
    action, _ = train_action_classifier(
        train_events, n_users, n_stories, training, target_mode="story_truth"
    )
    by_story_train = group_by_story(train_events)
    sequences = []
    seq_labels = []
    for sid, truth in truth_train.items():
        sequences.append(score_actions(action, by_story_train[sid]).tolist())
        seq_labels.append(truth)
    story, _ = train_story_classifier(sequences, seq_labels, TrainingRun(
        epochs=training.epochs * 2, batch_size=32, seed=training.seed,
        learning_rate=training.learning_rate,
    ))
    pair = ClassifierPair(action, story)

    by_story_test = group_by_story(test_events)
    train_metrics = _metrics_for(pair, by_story_train, sorted(truth_train), truth_train)
    test_metrics = _metrics_for(pair, by_story_test, sorted(truth_test), truth_test)
    rows = {
        "hawkeye_supervised": dict(HAWKEYE_SUPERVISED),
        "hawkeye_unsupervised": dict(HAWKEYE_UNSUPERVISED),
        "this_work_train": {
            "precision": train_metrics.precision,
            "recall": train_metrics.recall,
            "f1": train_metrics.f1,
        },
        "this_work_test": {
            "precision": test_metrics.precision,
            "recall": test_metrics.recall,
            "f1": test_metrics.f1,
        },
    }
    return CaseStudyResult(rows, pair, len(truth_train), len(truth_test))
