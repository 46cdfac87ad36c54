"""Span-annotated sentiment corpora: data model, JSONL loading, statistics.

A dataset split is a UTF-8 file with one JSON object per line:

    {"tokens": ["the", "pizza", "was", "great"],
     "triplets": [{"aspect": [1, 1], "opinion": [3, 3], "sentiment": "positive"}]}

Span indices are token positions, 0-based and inclusive on both ends.
Splits live in ``train.jsonl`` / ``dev.jsonl`` / ``test.jsonl`` under a
dataset directory.  All invariants are checked at load time; code that
consumes :class:`AnnotatedSentence` may assume they hold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

SPLIT_NAMES = ("train", "dev", "test")


class CorpusError(Exception):
    """Base error for malformed or invalid dataset files."""


class ParseError(CorpusError):
    """A line is not valid JSON or misses required keys."""


class ValidationError(CorpusError):
    """A sentence violates a data-model invariant."""


class SentimentPolarity(Enum):
    POSITIVE = "positive"
    NEUTRAL = "neutral"
    NEGATIVE = "negative"


@dataclass(frozen=True, order=True)
class Span:
    """Inclusive token-index range [left, right] inside one sentence."""

    left: int
    right: int

    def __post_init__(self) -> None:
        if not (0 <= self.left <= self.right):
            raise ValidationError(f"bad span [{self.left}, {self.right}]")

    def __len__(self) -> int:
        return self.right - self.left + 1

    def indices(self) -> range:
        return range(self.left, self.right + 1)

    def overlaps(self, other: "Span") -> bool:
        return self.left <= other.right and other.left <= self.right


@dataclass(frozen=True, order=True)
class OpinionPair:
    aspect: Span
    opinion: Span


@dataclass(frozen=True, order=True)
class OpinionTriplet:
    aspect: Span
    opinion: Span
    sentiment: SentimentPolarity

    def __post_init__(self) -> None:
        if self.aspect.overlaps(self.opinion):
            raise ValidationError(
                f"aspect {self.aspect} overlaps opinion {self.opinion}"
            )

    @property
    def pair(self) -> OpinionPair:
        return OpinionPair(self.aspect, self.opinion)


@dataclass(frozen=True)
class AnnotatedSentence:
    """Tokenized sentence plus its gold opinion triplets.

    Pair-level tasks read the same data and ignore ``sentiment``.
    Exact duplicate triplets are dropped by the loader, and one
    (aspect, opinion) pair carrying two different sentiments is a load
    error: a tag grid cannot represent it.
    """

    tokens: tuple[str, ...]
    triplets: tuple[OpinionTriplet, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) == 0:
            raise ValidationError("empty sentence")
        if any(not isinstance(t, str) or t == "" for t in self.tokens):
            raise ValidationError("empty or non-string token")
        n = len(self.tokens)
        seen: dict[OpinionPair, SentimentPolarity] = {}
        for t in self.triplets:
            for span in (t.aspect, t.opinion):
                if span.right >= n:
                    raise ValidationError(
                        f"span [{span.left}, {span.right}] out of bounds for "
                        f"{n}-token sentence"
                    )
            prev = seen.get(t.pair)
            if prev is not None and prev is not t.sentiment:
                raise ValidationError(
                    f"pair ({t.aspect}, {t.opinion}) appears with sentiments "
                    f"{prev.value} and {t.sentiment.value}"
                )
            seen[t.pair] = t.sentiment

    @property
    def n(self) -> int:
        return len(self.tokens)

    def aspect_spans(self) -> set[Span]:
        return {t.aspect for t in self.triplets}

    def opinion_spans(self) -> set[Span]:
        return {t.opinion for t in self.triplets}

    def pairs(self) -> set[OpinionPair]:
        return {t.pair for t in self.triplets}


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    sentences: tuple[AnnotatedSentence, ...]

    def __post_init__(self) -> None:
        if self.name not in SPLIT_NAMES:
            raise ValidationError(f"split name must be one of {SPLIT_NAMES}")

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class SplitStats:
    """Table-style counts: sentences, distinct aspect/opinion terms per
    sentence, distinct pairs, triplets."""

    sentences: int
    aspect_terms: int
    opinion_terms: int
    pairs: int
    triplets: int

    def to_dict(self) -> dict[str, int]:
        return {
            "sentences": self.sentences,
            "aspect_terms": self.aspect_terms,
            "opinion_terms": self.opinion_terms,
            "pairs": self.pairs,
            "triplets": self.triplets,
        }


def _parse_span(raw: object, what: str) -> Span:
    if (
        not isinstance(raw, list)
        or len(raw) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in raw)
    ):
        raise ParseError(f"{what} must be a [left, right] pair of ints, got {raw!r}")
    if raw[0] < 0 or raw[1] < raw[0]:
        raise ValidationError(f"{what} [{raw[0]}, {raw[1]}] is not a valid span")
    return Span(raw[0], raw[1])


def parse_sentence(obj: object) -> AnnotatedSentence:
    """Build a validated AnnotatedSentence from one decoded JSON object."""
    if not isinstance(obj, dict):
        raise ParseError(f"expected a JSON object, got {type(obj).__name__}")
    tokens = obj.get("tokens")
    if not isinstance(tokens, list):
        raise ParseError("missing or non-list 'tokens'")
    raw_triplets = obj.get("triplets", [])
    if not isinstance(raw_triplets, list):
        raise ParseError("'triplets' must be a list")
    triplets: list[OpinionTriplet] = []
    for raw in raw_triplets:
        if not isinstance(raw, dict):
            raise ParseError(f"triplet must be an object, got {raw!r}")
        aspect = _parse_span(raw.get("aspect"), "aspect")
        opinion = _parse_span(raw.get("opinion"), "opinion")
        sentiment_raw = raw.get("sentiment")
        try:
            sentiment = SentimentPolarity(sentiment_raw)
        except ValueError:
            raise ParseError(
                f"sentiment must be one of "
                f"{[p.value for p in SentimentPolarity]}, got {sentiment_raw!r}"
            ) from None
        triplet = OpinionTriplet(aspect, opinion, sentiment)
        if triplet not in triplets:
            triplets.append(triplet)
    return AnnotatedSentence(tuple(tokens), tuple(triplets))


def load_split(path: str | Path, split_name: str) -> DatasetSplit:
    """Load and validate one JSONL split file.

    Errors carry the 1-based line number of the offending sentence.
    """
    path = Path(path)
    sentences: list[AnnotatedSentence] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from None
            try:
                sentences.append(parse_sentence(obj))
            except CorpusError as exc:
                raise type(exc)(f"{path}:{lineno}: {exc}") from None
    return DatasetSplit(split_name, tuple(sentences))


def load_dataset(data_dir: str | Path) -> dict[str, DatasetSplit]:
    """Load every split file present under a dataset directory."""
    data_dir = Path(data_dir)
    splits = {}
    for name in SPLIT_NAMES:
        path = data_dir / f"{name}.jsonl"
        if path.exists():
            splits[name] = load_split(path, name)
    if not splits:
        raise CorpusError(f"no train.jsonl/dev.jsonl/test.jsonl under {data_dir}")
    return splits


def sentence_to_obj(sentence: AnnotatedSentence) -> dict:
    return {
        "tokens": list(sentence.tokens),
        "triplets": [
            {
                "aspect": [t.aspect.left, t.aspect.right],
                "opinion": [t.opinion.left, t.opinion.right],
                "sentiment": t.sentiment.value,
            }
            for t in sentence.triplets
        ],
    }


def serialize_split(split: Iterable[AnnotatedSentence], path: str | Path) -> None:
    """Write sentences in the canonical one-object-per-line form.

    ``load_split`` of the written file reproduces the input exactly.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for sentence in split:
            fh.write(json.dumps(sentence_to_obj(sentence)) + "\n")


def dataset_stats(split: DatasetSplit) -> SplitStats:
    """Count sentences, distinct per-sentence terms, pairs, and triplets.

    A span participating in several triplets of one sentence counts once
    for its term category; pairs are distinct (aspect, opinion) span
    pairs.  With duplicates removed at load, pairs == triplets always.
    """
    aspects = opinions = pairs = triplets = 0
    for sentence in split.sentences:
        aspects += len(sentence.aspect_spans())
        opinions += len(sentence.opinion_spans())
        pairs += len(sentence.pairs())
        triplets += len(sentence.triplets)
    return SplitStats(len(split.sentences), aspects, opinions, pairs, triplets)
