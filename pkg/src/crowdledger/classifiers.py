"""Two-stage behavioral classification.

Stage one scores individual actions: each event is embedded together with
the trailing window of its story's earlier events (user and story embeddings
of width ceil(log2 |U|) / ceil(log2 |S|), plus the raw type and vote values),
run through a small convolution stack and squashed to (-1, 1).  The default
training target is the action's effective truth contribution, vote * (+1 for
benign actions, -1 for attacks): an honest upvote and a troll's downvote of
the same story both say "probably true", so the truth direction survives
into stage two.  A plain malice target (+1 benign / -1 attack) and a
story-truth target (for data without malice annotations) are available as
alternatives.

Stage two reads the per-story sequence of stage-one scores through two
stacked LSTMs and predicts the story's truth in (-1, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from crowdledger.events import ActionEvent, TYPE_VOTE, group_by_story
from crowdledger.neural import (
    Adam,
    Conv1D,
    Dense,
    Dropout,
    Embedding,
    Flatten,
    LSTM,
    MaxPool1D,
    Sequential,
    Tanh,
    load_checkpoint,
    mse_loss,
    save_checkpoint,
)

WINDOW = 16
CONV_CHANNELS = 32
CONV_KERNEL = 3
POOL_WIDTH = 2
DROPOUT_RATE = 0.2
LSTM_HIDDEN = 32
SEQUENCE_LENGTH = 64
MIN_ACTION_EVENTS_FACTOR = 10
MIN_STORIES = 20

TARGET_MODES = ("contribution", "malice", "story_truth")


class ClassifierError(Exception):
    pass


class IdOutOfRangeError(ClassifierError):
    pass


class InsufficientDataError(ClassifierError):
    pass


@dataclass(frozen=True)
class TrainingRun:
    epochs: int = 12
    batch_size: int = 64
    validation_fraction: float = 0.2
    learning_rate: float = 3e-3
    seed: int = 0
    # story ids are permuted per batch while training the action scorer, so a
    # story embedding cannot memorize its story's label; identity must come
    # from user behavior.  Disable only for diagnostics.
    scramble_story_ids: bool = True
    # with scrambling on, story vectors carry no target signal; decaying them
    # toward zero stops them from injecting per-story noise on unseen worlds
    story_embedding_decay: float = 1e-2


@dataclass
class TrainingResult:
    loss_history: list[float] = field(default_factory=list)
    validation_metric: Optional[float] = None


def embedding_dim(count: int) -> int:
    """ceil(log2 count), floored at 1 so tiny id spaces still embed."""
    return max(1, math.ceil(math.log2(max(2, count))))


@dataclass
class WindowBatch:
    users: np.ndarray  # (B, W) int
    stories: np.ndarray  # (B, W) int
    types: np.ndarray  # (B, W) float
    votes: np.ndarray  # (B, W) float
    mask: np.ndarray  # (B, W) float, 0 marks left padding

    def take(self, idx) -> "WindowBatch":
        return WindowBatch(
            self.users[idx], self.stories[idx], self.types[idx], self.votes[idx], self.mask[idx]
        )

    def __len__(self) -> int:
        return self.users.shape[0]


class ActionClassifier:
    """Per-action scorer: trailing event window -> value in (-1, 1)."""

    def __init__(self, n_users: int, n_stories: int, window: int = WINDOW,
                 seed: int = 0):
        self.n_users = n_users
        self.n_stories = n_stories
        self.window = window
        self.target_mode = "contribution"
        rng = np.random.default_rng(seed)
        self.user_embedding = Embedding(n_users, embedding_dim(n_users), rng=rng)
        self.story_embedding = Embedding(n_stories, embedding_dim(n_stories), rng=rng)
        row_width = self.row_width()
        pooled = (window - CONV_KERNEL + 1) // POOL_WIDTH
        self.tail = Sequential(
            [
                Conv1D(row_width, CONV_CHANNELS, CONV_KERNEL, rng=rng),
                Tanh(),  # the scorer must express vote-user interactions, not sums
                MaxPool1D(POOL_WIDTH),
                Dropout(DROPOUT_RATE, rng=rng),
                Flatten(),
                Dense(pooled * CONV_CHANNELS, 1, rng=rng),
                Tanh(),
            ]
        )
        self._rng = rng

    def row_width(self) -> int:
        return self.user_embedding.table.value.shape[1] + \
            self.story_embedding.table.value.shape[1] + 2

    def params(self):
        return self.user_embedding.params() + self.story_embedding.params() + self.tail.params()

    def forward(self, batch: WindowBatch, training: bool = False) -> np.ndarray:
        u = self.user_embedding.forward(batch.users, mask=batch.mask)
        s = self.story_embedding.forward(batch.stories, mask=batch.mask)
        extra = np.stack([batch.types * batch.mask, batch.votes * batch.mask], axis=2)
        x = np.concatenate([u, s, extra], axis=2)
        return self.tail.forward(x, training=training)[:, 0]

    def backward(self, dy: np.ndarray) -> None:
        dx = self.tail.backward(dy[:, None])
        du_dim = self.user_embedding.table.value.shape[1]
        ds_dim = self.story_embedding.table.value.shape[1]
        self.user_embedding.backward(dx[:, :, :du_dim])
        self.story_embedding.backward(dx[:, :, du_dim : du_dim + ds_dim])

    def encode_window(self, window_events: Sequence[ActionEvent]) -> np.ndarray:
        """Embed one trailing window as its (W, row_width) input matrix."""
        batch = self._window_batch([list(window_events)])
        u = self.user_embedding.table.value[batch.users[0]] * batch.mask[0][:, None]
        s = self.story_embedding.table.value[batch.stories[0]] * batch.mask[0][:, None]
        extra = np.stack([batch.types[0] * batch.mask[0], batch.votes[0] * batch.mask[0]], axis=1)
        return np.concatenate([u, s, extra], axis=1)

    def _window_batch(self, windows: list[list[ActionEvent]]) -> WindowBatch:
        n = len(windows)
        w = self.window
        users = np.zeros((n, w), dtype=np.int64)
        stories = np.zeros((n, w), dtype=np.int64)
        types = np.zeros((n, w))
        votes = np.zeros((n, w))
        mask = np.zeros((n, w))
        for row, evs in enumerate(windows):
            if len(evs) > w:
                evs = evs[-w:]
            offset = w - len(evs)
            for j, ev in enumerate(evs):
                if not 0 <= ev.user < self.n_users:
                    raise IdOutOfRangeError(f"user id {ev.user} outside [0, {self.n_users})")
                if not 0 <= ev.story < self.n_stories:
                    raise IdOutOfRangeError(f"story id {ev.story} outside [0, {self.n_stories})")
                users[row, offset + j] = ev.user
                stories[row, offset + j] = ev.story
                types[row, offset + j] = ev.type
                votes[row, offset + j] = ev.vote
                mask[row, offset + j] = 1.0
        return WindowBatch(users, stories, types, votes, mask)

    def spec(self) -> dict:
        return {
            "kind": "action",
            "n_users": self.n_users,
            "n_stories": self.n_stories,
            "window": self.window,
            "target_mode": self.target_mode,
        }

    def save(self, path) -> None:
        save_checkpoint(path, self.spec(), self.params())

    @classmethod
    def load(cls, path) -> "ActionClassifier":
        spec, arrays = load_checkpoint(path)
        if spec.get("kind") != "action":
            raise ClassifierError(f"checkpoint is not an action model: {spec.get('kind')!r}")
        model = cls(spec["n_users"], spec["n_stories"], window=spec["window"])
        model.target_mode = spec.get("target_mode", "contribution")
        for p, arr in zip(model.params(), arrays):
            p.value[...] = arr.reshape(p.value.shape)
        return model


class StoryClassifier:
    """Score-sequence reader: (B, L, 1) action scores -> truth in (-1, 1)."""

    def __init__(self, hidden: int = LSTM_HIDDEN, seq_len: int = SEQUENCE_LENGTH, seed: int = 0):
        self.hidden = hidden
        self.seq_len = seq_len
        rng = np.random.default_rng(seed)
        self.net = Sequential(
            [
                LSTM(1, hidden, return_sequences=True, rng=rng),
                Dropout(DROPOUT_RATE, rng=rng),
                LSTM(hidden, hidden, return_sequences=False, rng=rng),
                Dropout(DROPOUT_RATE, rng=rng),
                Dense(hidden, 1, rng=rng),
                Tanh(),
            ]
        )

    def params(self):
        return self.net.params()

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        return self.net.forward(x, training=training)[:, 0]

    def backward(self, dy: np.ndarray) -> None:
        self.net.backward(dy[:, None])

    def pad_sequence(self, scores: Sequence[float]) -> np.ndarray:
        """Left-pad with zeros; keep only the newest seq_len scores."""
        arr = np.asarray(list(scores)[-self.seq_len :], dtype=np.float64)
        out = np.zeros(self.seq_len)
        if arr.size:
            out[-arr.size :] = arr
        return out

    def spec(self) -> dict:
        return {"kind": "story", "hidden": self.hidden, "seq_len": self.seq_len}

    def save(self, path) -> None:
        save_checkpoint(path, self.spec(), self.params())

    @classmethod
    def load(cls, path) -> "StoryClassifier":
        spec, arrays = load_checkpoint(path)
        if spec.get("kind") != "story":
            raise ClassifierError(f"checkpoint is not a story model: {spec.get('kind')!r}")
        model = cls(hidden=spec["hidden"], seq_len=spec["seq_len"])
        for p, arr in zip(model.params(), arrays):
            p.value[...] = arr.reshape(p.value.shape)
        return model


@dataclass
class ClassifierPair:
    """The trained two-stage model handed to the simulation engine."""

    action: ActionClassifier
    story: StoryClassifier

    def classify(self, story_events: Sequence[ActionEvent]) -> float:
        return classify_story(self, story_events)


# ----------------------------------------------------------------- windowing


def trailing_windows(events: Sequence[ActionEvent], window: int) -> list[list[ActionEvent]]:
    """One window per event: the events up to and including it, last ``window``."""
    out = []
    for i in range(len(events)):
        lo = max(0, i - window + 1)
        out.append(list(events[lo : i + 1]))
    return out


def _action_target(ev: ActionEvent, mode: str) -> Optional[float]:
    if mode == "contribution":
        if ev.malicious is None:
            return None
        return float(ev.vote) * (-1.0 if ev.malicious else 1.0)
    if mode == "malice":
        if ev.malicious is None:
            return None
        return -1.0 if ev.malicious else 1.0
    if mode == "story_truth":
        return None if ev.story_truth is None else float(ev.story_truth)
    raise ValueError(f"unknown target mode {mode!r}")


def build_action_dataset(
    model: ActionClassifier, events: Iterable[ActionEvent], mode: str
) -> tuple[WindowBatch, np.ndarray]:
    """Story-local trailing windows plus targets, skipping unlabeled events."""
    windows: list[list[ActionEvent]] = []
    targets: list[float] = []
    for story_events in group_by_story(events).values():
        for i, win in enumerate(trailing_windows(story_events, model.window)):
            target = _action_target(story_events[i], mode)
            if target is not None:
                windows.append(win)
                targets.append(target)
    return model._window_batch(windows), np.asarray(targets)


def train_action_classifier(
    events: Sequence[ActionEvent],
    n_users: int,
    n_stories: int,
    config: TrainingRun = TrainingRun(),
    target_mode: str = "contribution",
) -> tuple[ActionClassifier, TrainingResult]:
    if target_mode not in TARGET_MODES:
        raise ValueError(f"target_mode must be one of {TARGET_MODES}")
    events = list(events)
    if len(events) < MIN_ACTION_EVENTS_FACTOR * WINDOW:
        raise InsufficientDataError(
            f"need at least {MIN_ACTION_EVENTS_FACTOR * WINDOW} events, got {len(events)}"
        )
    model = ActionClassifier(n_users, n_stories, seed=config.seed)
    model.target_mode = target_mode
    batch, targets = build_action_dataset(model, events, target_mode)
    if len(batch) < MIN_ACTION_EVENTS_FACTOR * WINDOW:
        raise InsufficientDataError(
            f"only {len(batch)} labeled events after filtering for {target_mode!r} targets"
        )
    rng = np.random.default_rng(config.seed + 1)

    augment = None
    if config.scramble_story_ids:
        def augment(sub: WindowBatch, aug_rng) -> WindowBatch:
            perm = aug_rng.permutation(n_stories)
            return WindowBatch(sub.users, perm[sub.stories], sub.types, sub.votes, sub.mask)

    regularize = None
    if config.story_embedding_decay > 0.0:
        table = model.story_embedding.table

        def regularize():
            table.grad += config.story_embedding_decay * table.value

    result = _train_model(model, batch, targets, config, rng, augment=augment,
                          regularize=regularize)
    return model, result


def train_story_classifier(
    sequences: Sequence[Sequence[float]],
    labels: Sequence[int],
    config: TrainingRun = TrainingRun(epochs=40, batch_size=32),
    seed_offset: int = 7,
) -> tuple[StoryClassifier, TrainingResult]:
    if len(sequences) < MIN_STORIES:
        raise InsufficientDataError(f"need at least {MIN_STORIES} stories, got {len(sequences)}")
    if len(sequences) != len(labels):
        raise ValueError("sequences and labels length mismatch")
    model = StoryClassifier(seed=config.seed + seed_offset)
    x = np.stack([model.pad_sequence(s) for s in sequences])[:, :, None]
    y = np.asarray(labels, dtype=np.float64)
    rng = np.random.default_rng(config.seed + seed_offset + 1)
    result = _train_model(model, x, y, config, rng, validation_accuracy=True)
    return model, result


def _take(inputs, idx):
    if isinstance(inputs, WindowBatch):
        return inputs.take(idx)
    return inputs[idx]


def _train_model(model, inputs, targets, config: TrainingRun, rng,
                 validation_accuracy: bool = False, augment=None,
                 regularize=None) -> TrainingResult:
    n = len(targets)
    perm = rng.permutation(n)
    n_val = int(n * config.validation_fraction)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    if train_idx.size == 0:
        train_idx = perm
        val_idx = perm[:0]
    optimizer = Adam(model.params(), lr=config.learning_rate)
    result = TrainingResult()
    for _ in range(config.epochs):
        order = rng.permutation(train_idx.size)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, train_idx.size, config.batch_size):
            idx = train_idx[order[start : start + config.batch_size]]
            sub = _take(inputs, idx)
            if augment is not None:
                sub = augment(sub, rng)
            pred = model.forward(sub, training=True)
            loss, dpred = mse_loss(pred, targets[idx])
            model.backward(dpred)
            if regularize is not None:
                regularize()
            optimizer.step()
            epoch_loss += loss
            n_batches += 1
        result.loss_history.append(epoch_loss / max(1, n_batches))
    if validation_accuracy and val_idx.size:
        pred = model.forward(_take(inputs, val_idx), training=False)
        agree = np.sign(pred) == np.sign(targets[val_idx])
        result.validation_metric = float(np.mean(agree))
    return result


# ------------------------------------------------------------------- scoring


def score_actions(model: ActionClassifier, story_events: Sequence[ActionEvent]) -> np.ndarray:
    """One score per event, from the trailing window ending at that event."""
    if not story_events:
        return np.zeros(0)
    batch = model._window_batch(trailing_windows(list(story_events), model.window))
    return model.forward(batch, training=False)


def classify_story(pair: ClassifierPair, story_events: Sequence[ActionEvent]) -> float:
    scores = score_actions(pair.action, story_events)
    x = pair.story.pad_sequence(scores)[None, :, None]
    return float(pair.story.forward(x, training=False)[0])


def predicted_malicious(score: float, vote: int, target_mode: str) -> bool:
    """Does a score mark its action as an attack, under the given target mode?"""
    if target_mode == "malice":
        return score < 0.0
    return vote * score < 0.0


def user_benignness(
    action_model: ActionClassifier, events: Sequence[ActionEvent]
) -> dict[int, float]:
    """Per-user mean of vote * action-score over the user's vote events.

    Honest voters land near the population's benign level; inverters go
    negative and inconsistent voters drift well below the benign mass.  The
    absolute level carries a common self-evidence offset (the scored vote
    sits inside its own window), so callers should compare users against the
    population rather than against zero.
    """
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for story_events in group_by_story(events).values():
        scores = score_actions(action_model, story_events)
        for ev, score in zip(story_events, scores):
            if ev.type != TYPE_VOTE:
                continue
            sums[ev.user] = sums.get(ev.user, 0.0) + ev.vote * float(score)
            counts[ev.user] = counts.get(ev.user, 0) + 1
    return {uid: sums[uid] / counts[uid] for uid in sums}


DETECTION_MAD_CUTOFF = 3.0


def flag_outlier_users(benignness: Mapping[int, float],
                       cutoff: float = DETECTION_MAD_CUTOFF) -> dict[int, bool]:
    """Unsupervised flagging: benignness far below the population median.

    Uses a median/MAD z-score so the rule needs no ground truth and is
    robust while attackers are a minority.
    """
    values = np.array(list(benignness.values()))
    med = float(np.median(values))
    mad = max(float(np.median(np.abs(values - med))), 1e-6)
    return {uid: (value - med) / mad < -cutoff for uid, value in benignness.items()}


def detection_rates(
    action_model: ActionClassifier,
    events: Sequence[ActionEvent],
    behavior_of: Mapping[int, str],
    cutoff: float = DETECTION_MAD_CUTOFF,
) -> dict[str, float]:
    """Fraction of each attack type's users flagged by the outlier rule.

    Orchestrated slander and whitewash report as one combined rate; the
    benign false-flag rate is reported under "false_positive".  Types with
    no participating users are omitted.
    """
    flagged = flag_outlier_users(user_benignness(action_model, events), cutoff)
    caught: dict[str, int] = {}
    totals: dict[str, int] = {}
    for uid, hit in flagged.items():
        name = behavior_of.get(uid, "unknown")
        if name in ("orch_slander", "orch_whitewash"):
            name = "orchestrated"
        elif name in ("normal", "target"):
            name = "false_positive"
        totals[name] = totals.get(name, 0) + 1
        caught[name] = caught.get(name, 0) + int(hit)
    return {name: caught.get(name, 0) / totals[name] for name in totals}
