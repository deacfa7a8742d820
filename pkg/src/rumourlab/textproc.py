"""Tweet-aware text handling: normalization, tokenization, surface counts,
and fixed-length sentence-pair encoding.

Normalization rewrites user mentions to the literal token ``@USER``, URLs
to ``HTTPURL``, and emoji to colon-delimited aliases from the bundled
table (unknown pictographs become ``:emoji:``), then collapses whitespace.
It is idempotent. Tokenization operates on normalized text and keeps
hashtags, the two special tokens, emoji aliases, and ASCII emoticons
whole, splitting terminal punctuation off everything else.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

from .errors import ValidationError

_DATA_DIR = Path(__file__).parent / "data"

MENTION_TOKEN = "@USER"
URL_TOKEN = "HTTPURL"
UNKNOWN_EMOJI_ALIAS = "emoji"

_URL_RE = re.compile(r"(?:https?://|\bwww\.)\S+", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_HASHTAG_RE = re.compile(r"#\w+")
_ALIAS_TOKEN_RE = re.compile(r":[a-z0-9_]+:")

# Code-point ranges treated as emoji when absent from the alias table.
_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),
    (0x2600, 0x27BF),
    (0x2B00, 0x2BFF),
)
_EMOJI_JOINERS = {"️", "‍"}

_PUNCT_CHARS = set(string.punctuation) | set("“”‘’…´`—–¡¿")

EMOTICONS = frozenset([
    ":)", ":-)", ":(", ":-(", ":D", ":-D", ";)", ";-)", ":P", ":-P", ":p",
    ":-p", ":/", ":-/", ":|", ":-|", ":o", ":O", ":-o", ":-O", "=)", "=(",
    "=D", ":'(", ":')", "<3", "</3", "D:", "xD", "XD", ":*", ":-*",
])


@lru_cache(maxsize=1)
def stopword_list() -> frozenset[str]:
    """The bundled list of 179 common English stopwords, lowercase."""
    lines = _DATA_DIR.joinpath("stopwords.txt").read_text(encoding="utf-8").splitlines()
    return frozenset(line.strip() for line in lines
                     if line.strip() and not line.startswith("#"))


@lru_cache(maxsize=1)
def emoji_aliases() -> dict[str, str]:
    """Bundled emoji table: single code point -> alias (without colons)."""
    table: dict[str, str] = {}
    for line in _DATA_DIR.joinpath("emoji_aliases.tsv").read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        char, alias = line.split("\t")
        table[char] = alias
    return table


def _is_emoji_char(char: str) -> bool:
    if char in emoji_aliases():
        return True
    point = ord(char)
    return any(low <= point <= high for low, high in _EMOJI_RANGES)


def normalize(text: str) -> str:
    """Rewrite mentions, URLs, and emoji, then collapse whitespace."""
    text = _URL_RE.sub(URL_TOKEN, text)
    text = _MENTION_RE.sub(MENTION_TOKEN, text)
    aliases = emoji_aliases()
    parts: list[str] = []
    for char in text:
        if char in _EMOJI_JOINERS:
            continue
        if char in aliases:
            parts.append(f" :{aliases[char]}: ")
        elif _is_emoji_char(char):
            parts.append(f" :{UNKNOWN_EMOJI_ALIAS}: ")
        else:
            parts.append(char)
    return " ".join("".join(parts).split())


@dataclass(frozen=True)
class TokenStream(Sequence):
    """Tokens plus their (start, end) character spans in the source text."""

    tokens: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, index):
        return self.tokens[index]


def _is_special_token(chunk: str) -> bool:
    if chunk in EMOTICONS or chunk == URL_TOKEN:
        return True
    if _ALIAS_TOKEN_RE.fullmatch(chunk):
        return True
    if _HASHTAG_RE.fullmatch(chunk) or _MENTION_RE.fullmatch(chunk):
        return True
    return False


def tokenize(text: str) -> TokenStream:
    """Split normalized text into tokens, preserving case and spans."""
    tokens: list[str] = []
    spans: list[tuple[int, int]] = []
    for match in re.finditer(r"\S+", text):
        chunk = match.group()
        offset = match.start()
        end = len(chunk)
        peeled: list[int] = []
        while end > 0:
            core = chunk[:end]
            if _is_special_token(core) or core[-1] not in _PUNCT_CHARS:
                break
            end -= 1
            peeled.append(end)
        if end > 0:
            tokens.append(chunk[:end])
            spans.append((offset, offset + end))
        for pos in reversed(peeled):
            tokens.append(chunk[pos:pos + 1])
            spans.append((offset + pos, offset + pos + 1))
    return TokenStream(tokens=tuple(tokens), spans=tuple(spans))


def is_word_token(token: str) -> bool:
    """True for plain content tokens: not mentions, URLs, hashtags,
    emoji aliases, emoticons, or bare punctuation."""
    if token == URL_TOKEN or token in EMOTICONS:
        return False
    if token.startswith("#") or token.startswith("@"):
        return False
    if _ALIAS_TOKEN_RE.fullmatch(token):
        return False
    if all(char in _PUNCT_CHARS for char in token):
        return False
    return True


@dataclass(frozen=True)
class AttributeCounts:
    words: int
    urls: int
    emojis: int
    hashtags: int
    mentions: int
    stopwords: int

    FIELDS = ("words", "urls", "emojis", "hashtags", "mentions", "stopwords")


def count_attributes(text: str) -> AttributeCounts:
    """Surface-attribute counts: URLs, emoji, hashtags, and mentions are
    counted on the raw text; words and stopwords on the token stream of
    the normalized text."""
    urls = len(_URL_RE.findall(text))
    hashtags = len(_HASHTAG_RE.findall(text))
    mentions = len(_MENTION_RE.findall(text))
    emojis = sum(
        1 for char in text if char not in _EMOJI_JOINERS and _is_emoji_char(char)
    )
    stopwords = stopword_list()
    words = 0
    stops = 0
    for token in tokenize(normalize(text)):
        if not is_word_token(token):
            continue
        words += 1
        if token.lower() in stopwords:
            stops += 1
    return AttributeCounts(
        words=words, urls=urls, emojis=emojis,
        hashtags=hashtags, mentions=mentions, stopwords=stops,
    )


@dataclass(frozen=True)
class PairEncoding:
    """Fixed-length two-segment encoding of a (source, reply) token pair."""

    input_ids: tuple[int, ...]
    attention_mask: tuple[int, ...]
    segment_ids: tuple[int, ...]


def encode_pair(
    source_tokens: Sequence[str],
    reply_tokens: Sequence[str],
    vocab,
    max_len: int,
) -> PairEncoding:
    """Encode [source, SEP, reply, SEP] into ids of length max_len.

    The reply end is truncated first to fit; a source longer than
    max_len - 2 is itself truncated and the reply dropped. Segment 0
    covers the source tokens and the first separator, segment 1 the rest
    of the attended prefix. Unknown tokens map to the unknown id and the
    tail is padded.
    """
    if max_len < 3:
        raise ValidationError(f"max_len must be at least 3, got {max_len}")
    budget = max_len - 2
    source = list(source_tokens)[:budget]
    reply = list(reply_tokens)[:budget - len(source)] if len(source) < budget else []

    def lookup(token: str) -> int:
        found = vocab.id_of(token.lower())
        return vocab.unk_id if found is None else found

    ids = [lookup(t) for t in source] + [vocab.sep_id]
    segment_break = len(ids)
    ids += [lookup(t) for t in reply] + [vocab.sep_id]
    attended = len(ids)
    mask = [1] * attended + [0] * (max_len - attended)
    segments = (
        [0] * segment_break
        + [1] * (attended - segment_break)
        + [0] * (max_len - attended)
    )
    ids += [vocab.pad_id] * (max_len - attended)
    return PairEncoding(
        input_ids=tuple(ids),
        attention_mask=tuple(mask),
        segment_ids=tuple(segments),
    )
