"""Dataset ingestion: tweet records, reply threads, and stratified splits.

Dataset files are UTF-8 JSON-lines: one record per line with the fixed
field names documented in the README (`id`, `text`, `created_at`,
optional `parent_id`, optional `label`, plus user and engagement
metadata). Timestamps are ISO-8601 with an explicit UTC offset.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import ValidationError

RUMOUR = "rumour"
NONRUMOUR = "nonrumour"
LABELS = (RUMOUR, NONRUMOUR)

MIN_ACCOUNT_YEAR = 2006

_REQUIRED_FIELDS = (
    "id", "text", "created_at", "verified", "followers", "following",
    "tweet_count", "listed_count", "account_created_year",
    "retweet_count", "like_count",
)
_COUNT_FIELDS = (
    "followers", "following", "tweet_count", "listed_count",
    "retweet_count", "like_count",
)

SPLIT_FORMAT_VERSION = "rumourlab-split v1"
SPLIT_PARTS = ("train", "dev", "test")


@dataclass(frozen=True)
class UserMeta:
    verified: bool
    followers: int
    following: int
    tweet_count: int
    listed_count: int
    account_created_year: int

    def __post_init__(self):
        current_year = datetime.now(timezone.utc).year
        if not MIN_ACCOUNT_YEAR <= self.account_created_year <= current_year:
            raise ValidationError(
                f"account_created_year {self.account_created_year} outside "
                f"[{MIN_ACCOUNT_YEAR}, {current_year}]"
            )


@dataclass(frozen=True)
class TweetRecord:
    id: str
    text: str
    created_at: datetime
    user: UserMeta
    retweet_count: int
    like_count: int
    parent_id: Optional[str] = None
    label: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise ValidationError("tweet id must be non-empty")
        if self.parent_id is not None and self.parent_id == self.id:
            raise ValidationError(f"tweet {self.id} lists itself as parent")
        if self.label is not None and self.label not in LABELS:
            raise ValidationError(
                f"tweet {self.id} has unknown label {self.label!r}"
            )

    @property
    def is_source(self) -> bool:
        return self.parent_id is None


@dataclass(frozen=True)
class Thread:
    """A source tweet plus its replies in ascending creation order."""

    source: TweetRecord
    replies: tuple[TweetRecord, ...]
    label: Optional[str] = None

    def __post_init__(self):
        if not self.source.is_source:
            raise ValidationError(f"thread source {self.source.id} has a parent")
        if self.label != self.source.label:
            raise ValidationError(
                f"thread label {self.label!r} differs from source label"
            )
        previous = self.source.created_at
        for reply in self.replies:
            if reply.created_at < self.source.created_at:
                raise ValidationError(
                    f"reply {reply.id} predates source {self.source.id}"
                )
            if reply.created_at < previous:
                raise ValidationError("replies not sorted by created_at")
            previous = reply.created_at

    @property
    def id(self) -> str:
        return self.source.id

    def tweets(self) -> tuple[TweetRecord, ...]:
        return (self.source,) + self.replies


@dataclass(frozen=True)
class AssemblyDiagnostics:
    """Bookkeeping from thread assembly."""

    orphan_replies: int
    unlabeled_sources: int


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[Thread, ...]
    dev: tuple[Thread, ...]
    test: tuple[Thread, ...]
    seed: int
    ratios: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))

    def parts(self) -> dict[str, tuple[Thread, ...]]:
        return {"train": self.train, "dev": self.dev, "test": self.test}


def _parse_timestamp(raw, line_no: int) -> datetime:
    if not isinstance(raw, str):
        raise ValidationError(f"line {line_no}: created_at must be a string")
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(text)
    except ValueError:
        raise ValidationError(
            f"line {line_no}: created_at {raw!r} is not ISO-8601"
        ) from None
    if stamp.tzinfo is None:
        raise ValidationError(
            f"line {line_no}: created_at {raw!r} lacks a UTC offset"
        )
    return stamp.astimezone(timezone.utc)


def _record_from_fields(fields: dict, line_no: int) -> TweetRecord:
    for name in _REQUIRED_FIELDS:
        if name not in fields:
            raise ValidationError(f"line {line_no}: missing required field {name!r}")
    if not isinstance(fields["text"], str):
        raise ValidationError(f"line {line_no}: text must be a string")
    for name in _COUNT_FIELDS:
        value = fields[name]
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise ValidationError(
                f"line {line_no}: {name} must be a non-negative integer"
            )
    if not isinstance(fields["verified"], bool):
        raise ValidationError(f"line {line_no}: verified must be true or false")
    year = fields["account_created_year"]
    if not isinstance(year, int) or isinstance(year, bool):
        raise ValidationError(f"line {line_no}: account_created_year must be an integer")
    try:
        user = UserMeta(
            verified=fields["verified"],
            followers=fields["followers"],
            following=fields["following"],
            tweet_count=fields["tweet_count"],
            listed_count=fields["listed_count"],
            account_created_year=year,
        )
        return TweetRecord(
            id=str(fields["id"]),
            text=fields["text"],
            created_at=_parse_timestamp(fields["created_at"], line_no),
            user=user,
            retweet_count=fields["retweet_count"],
            like_count=fields["like_count"],
            parent_id=fields.get("parent_id"),
            label=fields.get("label"),
        )
    except ValidationError as exc:
        raise ValidationError(f"line {line_no}: {exc}") from None


def load_tweets(path) -> list[TweetRecord]:
    """Read a JSON-lines dataset file, validating every record.

    Raises FileNotFoundError for a missing file and ValidationError for
    malformed lines (reported with their 1-based line number) or
    duplicate ids.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    records: list[TweetRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                fields = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"line {line_no}: invalid record: {exc.msg}") from None
            if not isinstance(fields, dict):
                raise ValidationError(f"line {line_no}: record is not a key-value object")
            record = _record_from_fields(fields, line_no)
            if record.id in seen:
                raise ValidationError(
                    f"line {line_no}: duplicate tweet id {record.id!r}"
                )
            seen.add(record.id)
            records.append(record)
    return records


def _timestamp_text(stamp: datetime) -> str:
    text = stamp.astimezone(timezone.utc).isoformat()
    return text.replace("+00:00", "Z")


def record_to_fields(record: TweetRecord) -> dict:
    fields = {
        "id": record.id,
        "text": record.text,
        "created_at": _timestamp_text(record.created_at),
    }
    if record.parent_id is not None:
        fields["parent_id"] = record.parent_id
    if record.label is not None:
        fields["label"] = record.label
    fields.update(
        verified=record.user.verified,
        followers=record.user.followers,
        following=record.user.following,
        tweet_count=record.user.tweet_count,
        listed_count=record.user.listed_count,
        account_created_year=record.user.account_created_year,
        retweet_count=record.retweet_count,
        like_count=record.like_count,
    )
    return fields


def save_tweets(records: Iterable[TweetRecord], path) -> None:
    """Write records as JSON lines; inverse of load_tweets."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record_to_fields(record), ensure_ascii=False))
            handle.write("\n")


def _resolve_root(record: TweetRecord, by_id: dict[str, TweetRecord]) -> Optional[str]:
    """Follow parent links to the owning source id; None when the chain dangles."""
    seen: list[str] = []
    current = record
    while current.parent_id is not None:
        if current.id in seen:
            cycle = seen[seen.index(current.id):] + [current.id]
            raise ValidationError("cyclic parent links: " + " -> ".join(cycle))
        seen.append(current.id)
        parent = by_id.get(current.parent_id)
        if parent is None:
            return None
        current = parent
    return current.id


def assemble_threads(
    records: Sequence[TweetRecord],
) -> tuple[list[Thread], AssemblyDiagnostics]:
    """Group records into threads rooted at source tweets.

    Replies that point at another reply are re-parented to that reply's
    source, so every assembled thread is one level deep. Replies whose
    chain never reaches a known source are dropped and counted in the
    returned diagnostics. Replies sort by (created_at, id).
    """
    by_id = {record.id: record for record in records}
    replies_by_root: dict[str, list[TweetRecord]] = {}
    orphans = 0
    for record in records:
        if record.is_source:
            continue
        root = _resolve_root(record, by_id)
        if root is None:
            orphans += 1
        else:
            replies_by_root.setdefault(root, []).append(record)
    threads: list[Thread] = []
    unlabeled = 0
    for record in records:
        if not record.is_source:
            continue
        replies = sorted(
            replies_by_root.get(record.id, ()),
            key=lambda r: (r.created_at, r.id),
        )
        if record.label is None:
            unlabeled += 1
        threads.append(Thread(source=record, replies=tuple(replies), label=record.label))
    return threads, AssemblyDiagnostics(orphan_replies=orphans, unlabeled_sources=unlabeled)


def _allocate(count: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder allocation of `count` items across ratios."""
    exact = [count * r for r in ratios]
    counts = [int(x) for x in exact]
    remainder = count - sum(counts)
    order = sorted(range(len(ratios)), key=lambda i: exact[i] - counts[i], reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def split_dataset(
    threads: Sequence[Thread],
    ratios: Sequence[float],
    seed: int,
) -> DatasetSplit:
    """Stratified train/dev/test split, deterministic for a given seed.

    Every input thread must be labeled; each class is shuffled and
    allocated by largest remainder so per-class proportions stay within
    one thread of the global ratios. Output is invariant to input order.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValidationError("ratios must be three positive fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios sum to {sum(ratios)!r}, expected 1")
    by_label: dict[str, list[Thread]] = {}
    seen_ids: set[str] = set()
    for thread in threads:
        if thread.label is None:
            raise ValidationError(
                f"thread {thread.id} has no label; unlabeled threads cannot be split"
            )
        if thread.id in seen_ids:
            raise ValidationError(f"duplicate thread id {thread.id!r}")
        seen_ids.add(thread.id)
        by_label.setdefault(thread.label, []).append(thread)
    parts: dict[str, list[Thread]] = {name: [] for name in SPLIT_PARTS}
    rng = random.Random(seed)
    for label in sorted(by_label):
        group = sorted(by_label[label], key=lambda t: t.id)
        if len(group) < len(SPLIT_PARTS):
            raise ValidationError(
                f"class {label!r} has {len(group)} threads, "
                f"fewer than the {len(SPLIT_PARTS)} splits"
            )
        rng.shuffle(group)
        counts = _allocate(len(group), ratios)
        offset = 0
        for name, n in zip(SPLIT_PARTS, counts):
            parts[name].extend(group[offset:offset + n])
            offset += n
    for name in SPLIT_PARTS:
        parts[name].sort(key=lambda t: t.id)
    return DatasetSplit(
        train=tuple(parts["train"]),
        dev=tuple(parts["dev"]),
        test=tuple(parts["test"]),
        seed=seed,
        ratios=ratios,
    )


def save_split(split: DatasetSplit, directory) -> None:
    """Write the split manifest: one id file per part with a shared header."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ratio_text = ",".join(f"{r:g}" for r in split.ratios)
    for name, threads in split.parts().items():
        lines = [
            f"# {SPLIT_FORMAT_VERSION}",
            f"# seed = {split.seed}",
            f"# ratios = {ratio_text}",
            f"# part = {name}",
        ]
        lines.extend(thread.id for thread in threads)
        (directory / f"{name}.ids").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_split(directory, threads: Sequence[Thread]) -> DatasetSplit:
    """Rebuild a DatasetSplit from a manifest directory and the thread pool."""
    directory = Path(directory)
    by_id = {thread.id: thread for thread in threads}
    parts: dict[str, list[Thread]] = {}
    seed = 0
    ratios = (0.0, 0.0, 0.0)
    for name in SPLIT_PARTS:
        path = directory / f"{name}.ids"
        if not path.exists():
            raise FileNotFoundError(f"split manifest part missing: {path}")
        ids: list[str] = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "seed =" in line:
                    seed = int(line.split("=", 1)[1])
                elif "ratios =" in line:
                    ratios = tuple(float(x) for x in line.split("=", 1)[1].split(","))
                continue
            ids.append(line)
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise ValidationError(
                f"split part {name!r} references unknown thread ids: {missing[:5]}"
            )
        parts[name] = [by_id[i] for i in ids]
    return DatasetSplit(
        train=tuple(parts["train"]),
        dev=tuple(parts["dev"]),
        test=tuple(parts["test"]),
        seed=seed,
        ratios=ratios,
    )
