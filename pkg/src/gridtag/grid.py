"""The word-pair tag grid: encoding gold spans, decoding predictions.

Every unordered word pair (w_i, w_j) of a sentence gets one tag.  Tags are
stored for i <= j only (upper triangle); lookups with i > j transparently
read cell (j, i).  The pair task uses tags {A, O, P, N}, the triplet task
{A, O, Pos, Neu, Neg, N}:

    A            both words inside the same aspect term
    O            both words inside the same opinion term
    P            the words belong one to an aspect term and one to an
                 opinion term that form a pair (pair task only)
    Pos/Neu/Neg  like P, carrying the pair's sentiment (triplet task only)
    N            none of the above

Decoding is relaxed: terms come from maximal same-tag runs on the
diagonal, and one cross cell with a pairing tag is enough to link two
terms.  Off-diagonal A/O cells are written by the encoder (they carry
training signal) but never read back by the decoder.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus import (
    AnnotatedSentence,
    OpinionPair,
    OpinionTriplet,
    SentimentPolarity,
    Span,
)


class GridError(Exception):
    """Raised for malformed grids or unencodable annotations."""


class Task(Enum):
    OPE = "ope"
    OTE = "ote"

    @property
    def tags(self) -> tuple["Tag", ...]:
        return OPE_TAGS if self is Task.OPE else OTE_TAGS


class OpeTag(Enum):
    A = "A"
    O = "O"
    P = "P"
    N = "N"


class OteTag(Enum):
    A = "A"
    O = "O"
    POS = "Pos"
    NEU = "Neu"
    NEG = "Neg"
    N = "N"


Tag = OpeTag | OteTag

# Fixed tag orderings; positions double as class indices in probability
# vectors, and argmax ties resolve to the lowest position.
OPE_TAGS: tuple[OpeTag, ...] = tuple(OpeTag)
OTE_TAGS: tuple[OteTag, ...] = tuple(OteTag)

SENTIMENT_TO_TAG = {
    SentimentPolarity.POSITIVE: OteTag.POS,
    SentimentPolarity.NEUTRAL: OteTag.NEU,
    SentimentPolarity.NEGATIVE: OteTag.NEG,
}
TAG_TO_SENTIMENT = {v: k for k, v in SENTIMENT_TO_TAG.items()}

# Equal sentiment counts resolve negative first, then neutral.
SENTIMENT_TIE_ORDER = (OteTag.NEG, OteTag.NEU, OteTag.POS)


def num_cells(n: int) -> int:
    return n * (n + 1) // 2


def cell_index(i: int, j: int, n: int) -> int:
    """Row-major position of upper-triangle cell (i, j), i <= j, in n words."""
    return i * n - (i * (i - 1)) // 2 + (j - i)


def cell_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Index vectors (I, J) listing upper-triangle cells in storage order."""
    return np.triu_indices(n)


class TagGrid:
    """Upper-triangular tag assignment for one sentence."""

    __slots__ = ("n", "task", "_tags")

    def __init__(self, n: int, task: Task, tags: list[Tag] | None = None):
        if n < 1:
            raise GridError("grid needs at least one word")
        self.n = n
        self.task = task
        none_tag = task.tags[-1]
        if tags is None:
            tags = [none_tag] * num_cells(n)
        if len(tags) != num_cells(n):
            raise GridError(
                f"expected {num_cells(n)} cells for n={n}, got {len(tags)}"
            )
        expected_type = type(task.tags[0])
        if any(not isinstance(t, expected_type) for t in tags):
            raise GridError(f"tags must all be {expected_type.__name__}")
        self._tags = tags

    def _index(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        if not (0 <= i and j < self.n):
            raise GridError(f"cell ({i}, {j}) out of range for n={self.n}")
        return cell_index(i, j, self.n)

    def get(self, i: int, j: int) -> Tag:
        return self._tags[self._index(i, j)]

    def set(self, i: int, j: int, tag: Tag) -> None:
        self._tags[self._index(i, j)] = tag

    def tags_in_order(self) -> list[Tag]:
        """Cell tags in the canonical (row-major upper triangle) order."""
        return list(self._tags)

    def class_indices(self) -> np.ndarray:
        """Per-cell tag positions in the task's fixed tag ordering."""
        order = {tag: k for k, tag in enumerate(self.task.tags)}
        return np.array([order[t] for t in self._tags], dtype=np.int64)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, TagGrid)
            and self.n == other.n
            and self.task is other.task
            and self._tags == other._tags
        )

    def __repr__(self) -> str:
        filled = sum(1 for t in self._tags if t is not self.task.tags[-1])
        return f"TagGrid(n={self.n}, task={self.task.value}, non_none={filled})"


@dataclass(frozen=True)
class DecodedResult:
    """Everything read off one grid: terms, pairs, and (triplet task) triplets."""

    aspects: frozenset[Span]
    opinions: frozenset[Span]
    pairs: frozenset[OpinionPair]
    triplets: frozenset[OpinionTriplet]


@dataclass(frozen=True)
class SpanClash:
    """Two same-type gold spans that diagonal decoding cannot separate."""

    kind: str  # "aspect" or "opinion"
    first: Span
    second: Span


def unseparable_span_pairs(ann: AnnotatedSentence) -> list[SpanClash]:
    """List adjacent or overlapping same-type gold span pairs.

    Such spans merge into one diagonal run, so a decoded grid cannot
    reproduce them.  They are encoded anyway; callers use this to count
    exceptions per dataset.
    """
    clashes = []
    for kind, spans in (
        ("aspect", sorted(ann.aspect_spans())),
        ("opinion", sorted(ann.opinion_spans())),
    ):
        for first, second in zip(spans, spans[1:]):
            if second.left <= first.right + 1:
                clashes.append(SpanClash(kind, first, second))
    return clashes


def encode_grid(ann: AnnotatedSentence, task: Task) -> TagGrid:
    """Tag every word pair of a gold-annotated sentence.

    All cells of each term (including the diagonal) get A or O, and every
    cross cell of each gold pair gets P or the pair's sentiment tag.  Two
    different non-N tags claiming one cell cannot come from well-formed
    annotations and raise GridError.
    """
    grid = TagGrid(ann.n, task)
    none_tag = task.tags[-1]

    def put(i: int, j: int, tag: Tag) -> None:
        current = grid.get(i, j)
        if current is not none_tag and current is not tag:
            raise GridError(
                f"cell ({min(i, j)}, {max(i, j)}) claimed by both "
                f"{current.value} and {tag.value}"
            )
        grid.set(i, j, tag)

    a_tag = task.tags[0]
    o_tag = task.tags[1]
    for span in ann.aspect_spans():
        for i in span.indices():
            for j in span.indices():
                if i <= j:
                    put(i, j, a_tag)
    for span in ann.opinion_spans():
        for i in span.indices():
            for j in span.indices():
                if i <= j:
                    put(i, j, o_tag)
    for triplet in ann.triplets:
        cross = OpeTag.P if task is Task.OPE else SENTIMENT_TO_TAG[triplet.sentiment]
        for i in triplet.aspect.indices():
            for j in triplet.opinion.indices():
                put(i, j, cross)
    return grid


def _diagonal_runs(grid: TagGrid, tag: Tag) -> list[Span]:
    """Maximal runs of `tag` along the diagonal."""
    spans = []
    i = 0
    while i < grid.n:
        if grid.get(i, i) is tag:
            j = i
            while j + 1 < grid.n and grid.get(j + 1, j + 1) is tag:
                j += 1
            spans.append(Span(i, j))
            i = j + 1
        else:
            i += 1
    return spans


def decode_ope(grid: TagGrid) -> DecodedResult:
    """Read aspect/opinion terms and pairs off a pair-task grid.

    A term is a maximal diagonal run of A (or O); two terms pair when at
    least one of their cross cells is P.
    """
    if grid.task is not Task.OPE:
        raise GridError("decode_ope needs a pair-task grid")
    aspects = _diagonal_runs(grid, OpeTag.A)
    opinions = _diagonal_runs(grid, OpeTag.O)
    pairs = set()
    for a in aspects:
        for o in opinions:
            if any(
                grid.get(i, j) is OpeTag.P
                for i in a.indices()
                for j in o.indices()
            ):
                pairs.add(OpinionPair(a, o))
    return DecodedResult(
        frozenset(aspects), frozenset(opinions), frozenset(pairs), frozenset()
    )


def majority_sentiment(tags: Counter) -> OteTag | None:
    """Most frequent sentiment tag; None when no sentiment tag occurs.

    Equal counts resolve by the fixed order Neg > Neu > Pos so decoding
    is deterministic.
    """
    counts = [(tags.get(t, 0), t) for t in SENTIMENT_TIE_ORDER]
    best_count, best_tag = max(counts, key=lambda ct: ct[0])
    if best_count == 0:
        return None
    return best_tag


def decode_ote(grid: TagGrid) -> DecodedResult:
    """Read terms and sentiment-labelled triplets off a triplet-task grid.

    Term extraction matches decode_ope; a candidate term pair forms a
    triplet only if at least one cross cell carries a sentiment tag, with
    the majority sentiment winning.
    """
    if grid.task is not Task.OTE:
        raise GridError("decode_ote needs a triplet-task grid")
    aspects = _diagonal_runs(grid, OteTag.A)
    opinions = _diagonal_runs(grid, OteTag.O)
    pairs = set()
    triplets = set()
    for a in aspects:
        for o in opinions:
            cross = Counter(
                grid.get(i, j) for i in a.indices() for j in o.indices()
            )
            winner = majority_sentiment(cross)
            if winner is None:
                continue
            pairs.add(OpinionPair(a, o))
            triplets.add(OpinionTriplet(a, o, TAG_TO_SENTIMENT[winner]))
    return DecodedResult(
        frozenset(aspects), frozenset(opinions), frozenset(pairs), frozenset(triplets)
    )


def decode(grid: TagGrid) -> DecodedResult:
    return decode_ope(grid) if grid.task is Task.OPE else decode_ote(grid)


def grid_from_probabilities(probs: np.ndarray, n: int, task: Task) -> TagGrid:
    """Argmax each cell's tag distribution into a grid.

    `probs` has one row per upper-triangle cell in canonical order and
    one column per tag in the fixed ordering.  Rows must sum to 1 within
    1e-6.  Ties take the lowest tag position.
    """
    probs = np.asarray(probs, dtype=np.float64)
    tags = task.tags
    if probs.shape != (num_cells(n), len(tags)):
        raise GridError(
            f"expected probabilities of shape {(num_cells(n), len(tags))}, "
            f"got {probs.shape}"
        )
    sums = probs.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-6)
    if bad.size:
        raise GridError(
            f"cell {bad[0]} distribution sums to {sums[bad[0]]:.6g}, not 1"
        )
    picks = probs.argmax(axis=1)
    return TagGrid(n, task, [tags[k] for k in picks])


def grid_to_obj(grid: TagGrid, tokens: tuple[str, ...] | None = None) -> dict:
    """Compact JSON form: non-N cells only, sorted, N implied.

    Tokens ride along so a dumped grid decodes back to a dataset record
    without the original file.
    """
    none_tag = grid.task.tags[-1]
    cells = [
        [int(i), int(j), grid.get(i, j).value]
        for i in range(grid.n)
        for j in range(i, grid.n)
        if grid.get(i, j) is not none_tag
    ]
    obj: dict = {"n": grid.n, "task": grid.task.value, "cells": cells}
    if tokens is not None:
        obj["tokens"] = list(tokens)
    return obj


def grid_from_obj(obj: dict) -> tuple[TagGrid, tuple[str, ...] | None]:
    try:
        n = obj["n"]
        task = Task(obj["task"])
        cells = obj["cells"]
    except (KeyError, ValueError, TypeError) as exc:
        raise GridError(f"malformed grid record: {exc}") from None
    by_label = {t.value: t for t in task.tags}
    grid = TagGrid(n, task)
    for entry in cells:
        if not (isinstance(entry, list) and len(entry) == 3):
            raise GridError(f"malformed cell entry {entry!r}")
        i, j, label = entry
        if label not in by_label:
            raise GridError(f"unknown tag {label!r} for task {task.value}")
        grid.set(i, j, by_label[label])
    tokens = obj.get("tokens")
    if tokens is not None:
        tokens = tuple(tokens)
        if len(tokens) != n:
            raise GridError(f"{len(tokens)} tokens for n={n}")
    return grid, tokens
