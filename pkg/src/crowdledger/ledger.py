"""Append-only hash-chained transaction log for posts, votes and settlements.

The chain is an in-process stand-in for a smart-contract backend: story and
vote transactions are buffered, and every settlement seals the buffered batch
into a new block.  Blocks are hashed over a canonical binary serialization
(see ``tx_to_bytes`` / ``block_payload``) so two runs with identical inputs
produce byte-identical chains.

Canonical serialization, byte-exact:

* integers: 8-byte little-endian two's complement
* transaction: kind (1 byte: 0=post, 1=vote, 2=settlement) ++ user_id ++
  story_id ++ vote_value ++ step
* block payload: index ++ prev_hash (32 raw bytes) ++ tx count ++ for each
  transaction, its byte length followed by its bytes
* block hash: SHA-256 of the payload

The genesis block has index 0, a 32-zero-byte prev_hash and no transactions;
its hash is therefore a fixed constant across implementations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Mapping, Optional


class LedgerError(Exception):
    """Base class for chain violations."""


class EmptyBatchError(LedgerError):
    pass


class InvalidTransactionError(LedgerError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"transaction {index}: {reason}")
        self.index = index
        self.reason = reason


class UnknownStoryError(LedgerError):
    pass


class DuplicateStoryError(LedgerError):
    pass


class SelfVoteError(LedgerError):
    pass


class DuplicateVoteError(LedgerError):
    pass


class StorySettledError(LedgerError):
    pass


class AlreadySettledError(LedgerError):
    pass


class TxKind(IntEnum):
    POST = 0
    VOTE = 1
    SETTLEMENT = 2


class StoryStatus(IntEnum):
    OPEN = 0
    SETTLED = 1


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    user_id: int
    story_id: int
    vote_value: int  # posts carry +1 (poster asserts truth); settlements carry the consensus label
    step: int


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    txs: tuple[Transaction, ...]
    hash: bytes


@dataclass
class StoryRecord:
    story_id: int
    poster_id: int
    status: StoryStatus = StoryStatus.OPEN
    consensus_label: Optional[int] = None
    votes: list[tuple[int, int, int]] = field(default_factory=list)  # (user, value, step)

    def has_vote_from(self, user_id: int) -> bool:
        return any(u == user_id for u, _, _ in self.votes)


@dataclass(frozen=True)
class RewardPolicy:
    """Reputation deltas applied at settlement.

    Voters are judged against the consensus label.  The poster is judged
    against the consensus label by default; set ``judge_poster_by_truth`` to
    judge against the hidden ground truth instead (then replay needs the
    truth map, which lives in the event log rather than on the chain).
    """

    voter_correct: int = 1
    voter_wrong: int = -2
    poster_true: int = 2
    poster_false: int = -4
    judge_poster_by_truth: bool = False


def _int_bytes(value: int) -> bytes:
    return int(value).to_bytes(8, "little", signed=True)


def tx_to_bytes(tx: Transaction) -> bytes:
    return (
        bytes([int(tx.kind)])
        + _int_bytes(tx.user_id)
        + _int_bytes(tx.story_id)
        + _int_bytes(tx.vote_value)
        + _int_bytes(tx.step)
    )


def tx_from_bytes(raw: bytes) -> Transaction:
    if len(raw) != 33:
        raise ValueError(f"transaction payload must be 33 bytes, got {len(raw)}")
    kind = TxKind(raw[0])
    fields = [int.from_bytes(raw[1 + 8 * i : 9 + 8 * i], "little", signed=True) for i in range(4)]
    return Transaction(kind, fields[0], fields[1], fields[2], fields[3])


def block_payload(index: int, prev_hash: bytes, txs: Iterable[Transaction]) -> bytes:
    tx_blobs = [tx_to_bytes(t) for t in txs]
    parts = [_int_bytes(index), prev_hash, _int_bytes(len(tx_blobs))]
    for blob in tx_blobs:
        parts.append(_int_bytes(len(blob)))
        parts.append(blob)
    return b"".join(parts)


def block_from_payload(raw: bytes) -> Block:
    """Decode a canonical payload back into a block (hash recomputed)."""
    if len(raw) < 48:
        raise ValueError("payload too short")
    index = int.from_bytes(raw[0:8], "little", signed=True)
    prev_hash = raw[8:40]
    count = int.from_bytes(raw[40:48], "little", signed=True)
    if count < 0:
        raise ValueError("negative transaction count")
    offset = 48
    txs = []
    for _ in range(count):
        if offset + 8 > len(raw):
            raise ValueError("truncated length prefix")
        length = int.from_bytes(raw[offset : offset + 8], "little", signed=True)
        offset += 8
        if length < 0 or offset + length > len(raw):
            raise ValueError("bad transaction length")
        txs.append(tx_from_bytes(raw[offset : offset + length]))
        offset += length
    if offset != len(raw):
        raise ValueError("trailing bytes in payload")
    digest = hashlib.sha256(raw).digest()
    return Block(index, prev_hash, tuple(txs), digest)


def _hash_block(index: int, prev_hash: bytes, txs: Iterable[Transaction]) -> bytes:
    return hashlib.sha256(block_payload(index, prev_hash, txs)).digest()


GENESIS_PREV_HASH = b"\x00" * 32


def _genesis() -> Block:
    return Block(0, GENESIS_PREV_HASH, (), _hash_block(0, GENESIS_PREV_HASH, ()))


class Chain:
    """Single-writer chain state: blocks plus story/reputation bookkeeping.

    High-level operations (post_story, submit_vote, settle_story) validate
    against current state, update the story records and buffer transactions;
    settle_story seals the buffered batch into a block.  append_block is the
    low-level sealing primitive and only enforces structural validity.
    """

    def __init__(self) -> None:
        self.blocks: list[Block] = [_genesis()]
        self.accounts: dict[int, int] = {}
        self.stories: dict[int, StoryRecord] = {}
        self.pending: list[Transaction] = []

    # ------------------------------------------------------------------ blocks

    def last_step(self) -> int:
        for block in reversed(self.blocks):
            if block.txs:
                return block.txs[-1].step
        return 0

    def append_block(self, txs: Iterable[Transaction]) -> Block:
        """Seal a non-empty batch into a new block.

        Structural checks only: valid kind, non-negative ids, vote values in
        {-1, +1} and non-decreasing steps (within the batch and against the
        chain).  Story-level rules are enforced when the transactions are
        created, not here.
        """
        batch = tuple(txs)
        if not batch:
            raise EmptyBatchError("cannot append an empty batch")
        floor_step = self.last_step()
        for i, tx in enumerate(batch):
            if not isinstance(tx.kind, TxKind):
                raise InvalidTransactionError(i, f"bad kind {tx.kind!r}")
            if tx.user_id < 0 or tx.story_id < 0:
                raise InvalidTransactionError(i, "negative id")
            if tx.vote_value not in (-1, 1):
                raise InvalidTransactionError(i, f"vote value {tx.vote_value} not in {{-1,+1}}")
            if tx.step < floor_step:
                raise InvalidTransactionError(i, f"step {tx.step} decreases below {floor_step}")
            floor_step = tx.step
        prev = self.blocks[-1]
        block = Block(prev.index + 1, prev.hash, batch, _hash_block(prev.index + 1, prev.hash, batch))
        self.blocks.append(block)
        return block

    def verify(self) -> bool:
        """True iff every stored hash matches its recomputed value and links hold."""
        genesis = self.blocks[0]
        if genesis.index != 0 or genesis.prev_hash != GENESIS_PREV_HASH or genesis.txs:
            return False
        for i, block in enumerate(self.blocks):
            if block.index != i:
                return False
            if i > 0 and block.prev_hash != self.blocks[i - 1].hash:
                return False
            if _hash_block(block.index, block.prev_hash, block.txs) != block.hash:
                return False
        return True

    # ----------------------------------------------------------------- stories

    def post_story(self, user_id: int, story_id: int, step: int) -> Transaction:
        if story_id in self.stories:
            raise DuplicateStoryError(f"story {story_id} already posted")
        self.stories[story_id] = StoryRecord(story_id=story_id, poster_id=user_id)
        tx = Transaction(TxKind.POST, user_id, story_id, 1, step)
        self.pending.append(tx)
        return tx

    def submit_vote(self, user_id: int, story_id: int, value: int, step: int) -> Transaction:
        record = self.stories.get(story_id)
        if record is None:
            raise UnknownStoryError(f"story {story_id} does not exist")
        if record.status is StoryStatus.SETTLED:
            raise StorySettledError(f"story {story_id} is settled; voting is closed")
        if user_id == record.poster_id:
            raise SelfVoteError(f"user {user_id} cannot vote on its own story")
        if record.has_vote_from(user_id):
            raise DuplicateVoteError(f"user {user_id} already voted on story {story_id}")
        if value not in (-1, 1):
            raise InvalidTransactionError(0, f"vote value {value} not in {{-1,+1}}")
        record.votes.append((user_id, value, step))
        tx = Transaction(TxKind.VOTE, user_id, story_id, value, step)
        self.pending.append(tx)
        return tx

    def settle_story(
        self, story_id: int, label: int, reward_deltas: Mapping[int, int], step: int
    ) -> tuple[Transaction, ...]:
        """Settle a story and seal all buffered transactions into a block.

        ``reward_deltas`` comes from the engine's reward computation; the
        chain applies it verbatim.  Replay (``replay_reputations``) rederives
        the deltas independently from chain content.
        """
        record = self.stories.get(story_id)
        if record is None:
            raise UnknownStoryError(f"story {story_id} does not exist")
        if record.status is StoryStatus.SETTLED:
            raise AlreadySettledError(f"story {story_id} already settled")
        if label not in (-1, 1):
            raise InvalidTransactionError(0, f"consensus label {label} not in {{-1,+1}}")
        record.status = StoryStatus.SETTLED
        record.consensus_label = label
        for uid, delta in reward_deltas.items():
            self.accounts[uid] = self.accounts.get(uid, 0) + delta
        tx = Transaction(TxKind.SETTLEMENT, record.poster_id, story_id, label, step)
        self.pending.append(tx)
        batch = tuple(self.pending)
        self.pending.clear()
        self.append_block(batch)
        return (tx,)


def verify_chain(chain: Chain) -> bool:
    return chain.verify()


def settlement_deltas(
    record_votes: list[tuple[int, int, int]],
    poster_id: int,
    label: int,
    policy: RewardPolicy,
    story_truth: Optional[int] = None,
) -> dict[int, int]:
    """Rederive the reputation deltas implied by one settlement."""
    deltas: dict[int, int] = {}
    for uid, value, _ in record_votes:
        delta = policy.voter_correct if value == label else policy.voter_wrong
        deltas[uid] = deltas.get(uid, 0) + delta
    judge = story_truth if policy.judge_poster_by_truth else label
    if policy.judge_poster_by_truth and story_truth is None:
        raise ValueError("judge_poster_by_truth requires the story truth")
    poster_delta = policy.poster_true if judge == 1 else policy.poster_false
    deltas[poster_id] = deltas.get(poster_id, 0) + poster_delta
    return deltas


def replay_reputations(
    chain: Chain,
    policy: RewardPolicy = RewardPolicy(),
    story_truth: Optional[Mapping[int, int]] = None,
) -> dict[int, int]:
    """Rebuild all account balances by replaying the chain's settlements.

    Independent of the live bookkeeping: only block content is read.  With
    the default policy the chain alone is sufficient; a truth-judged policy
    additionally needs ``story_truth`` (story id -> +-1).
    """
    posters: dict[int, int] = {}
    votes: dict[int, list[tuple[int, int, int]]] = {}
    accounts: dict[int, int] = {}
    for block in chain.blocks:
        for tx in block.txs:
            if tx.kind is TxKind.POST:
                posters[tx.story_id] = tx.user_id
                votes.setdefault(tx.story_id, [])
            elif tx.kind is TxKind.VOTE:
                votes.setdefault(tx.story_id, []).append((tx.user_id, tx.vote_value, tx.step))
            else:
                truth = None if story_truth is None else story_truth.get(tx.story_id)
                deltas = settlement_deltas(
                    votes.get(tx.story_id, []), posters[tx.story_id], tx.vote_value, policy, truth
                )
                for uid, delta in deltas.items():
                    accounts[uid] = accounts.get(uid, 0) + delta
    return accounts


# ---------------------------------------------------------------------- JSONL

_KIND_NAMES = {TxKind.POST: "post", TxKind.VOTE: "vote", TxKind.SETTLEMENT: "settlement"}
_KIND_VALUES = {name: kind for kind, name in _KIND_NAMES.items()}


def export_jsonl(chain: Chain, path) -> None:
    """One block per line; hashes hex-encoded lowercase."""
    with open(path, "w", encoding="utf-8") as fh:
        for block in chain.blocks:
            row = {
                "index": block.index,
                "prev_hash": block.prev_hash.hex(),
                "hash": block.hash.hex(),
                "txs": [
                    {
                        "kind": _KIND_NAMES[tx.kind],
                        "user": tx.user_id,
                        "story": tx.story_id,
                        "vote": tx.vote_value,
                        "step": tx.step,
                    }
                    for tx in block.txs
                ],
            }
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def import_jsonl(
    path,
    policy: RewardPolicy = RewardPolicy(),
    story_truth: Optional[Mapping[int, int]] = None,
) -> Chain:
    """Load a chain dump, verify it, and rebuild the derived state.

    Raises LedgerError when the dump fails verification.  Accounts are
    recomputed by replay under ``policy``.
    """
    chain = Chain.__new__(Chain)
    chain.blocks = []
    chain.accounts = {}
    chain.stories = {}
    chain.pending = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            txs = tuple(
                Transaction(
                    _KIND_VALUES[t["kind"]], t["user"], t["story"], t["vote"], t["step"]
                )
                for t in row["txs"]
            )
            chain.blocks.append(
                Block(row["index"], bytes.fromhex(row["prev_hash"]), txs, bytes.fromhex(row["hash"]))
            )
    if not chain.blocks:
        raise LedgerError("empty chain dump")
    if not chain.verify():
        raise LedgerError("imported chain failed verification")
    for block in chain.blocks:
        for tx in block.txs:
            if tx.kind is TxKind.POST:
                chain.stories[tx.story_id] = StoryRecord(tx.story_id, tx.user_id)
            elif tx.kind is TxKind.VOTE:
                chain.stories[tx.story_id].votes.append((tx.user_id, tx.vote_value, tx.step))
            else:
                record = chain.stories[tx.story_id]
                record.status = StoryStatus.SETTLED
                record.consensus_label = tx.vote_value
    chain.accounts = replay_reputations(chain, policy, story_truth)
    return chain
