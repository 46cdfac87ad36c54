#!/usr/bin/env python3
"""Generate the bundled synthetic review dataset (data/sample).

Deterministic given the seed: template sentences over a small
restaurant/laptop vocabulary, with single- and multi-word terms, shared
aspects/opinions, and all three sentiments.  Generated sentences never
contain adjacent or overlapping same-type gold spans, so the whole set
round-trips through grid encoding; one handcrafted adjacent-aspect
sentence is appended to the test split to exercise exception counting.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gridtag.corpus import (
    AnnotatedSentence,
    OpinionTriplet,
    SentimentPolarity,
    Span,
    serialize_split,
)
from gridtag.grid import Task, decode, encode_grid, unseparable_span_pairs

ASPECTS = [
    "pizza", "coffee", "service", "menu", "decor", "staff", "keyboard",
    "screen", "battery", "price", "sushi", "wine", "dessert", "soup",
    "battery life", "wine list", "hot dogs", "spring rolls",
    "customer service", "touch pad", "operating system", "sound quality",
]

OPINIONS = {
    "positive": [
        "great", "excellent", "tasty", "friendly", "amazing", "solid",
        "fast", "delicious", "beautiful", "top notch", "well made",
    ],
    "neutral": ["average", "okay", "standard", "ordinary", "so so"],
    "negative": [
        "terrible", "slow", "rude", "awful", "flimsy", "bland", "noisy",
        "over priced", "too salty",
    ],
}

# Placeholders: a/a2 aspect slots, o/o2 opinion slots.  Same-type slots are
# always separated by at least one literal token.
TEMPLATES = [
    "the {a} is {o}",
    "the {a} was really {o}",
    "i found the {a} quite {o}",
    "{o} {a} overall",
    "the {a} is {o} and the {a2} is {o2}",
    "the {a} and the {a2} are both {o}",
    "the {a} seemed {o} and also {o2}",
    "our waiter said the {a} is {o} but the {a2} tasted {o2}",
    "despite the {o} {a} we enjoyed the {a2}",
    "nothing special about the {a} it felt {o}",
    "{a} here is {o} while the {a2} stays {o2}",
    "honestly the {a} looked {o} to us",
]


def _pick_opinion(rng: np.random.Generator) -> tuple[str, str]:
    sentiment = rng.choice(list(OPINIONS))
    term = rng.choice(OPINIONS[sentiment])
    return term, sentiment


def build_sentence(rng: np.random.Generator) -> AnnotatedSentence:
    template = TEMPLATES[rng.integers(len(TEMPLATES))]
    fills: dict[str, tuple[str, str | None]] = {}
    aspects = {}
    for slot in ("a", "a2"):
        if "{" + slot + "}" in template:
            aspects[slot] = str(rng.choice(ASPECTS))
    opinions = {}
    for slot in ("o", "o2"):
        if "{" + slot + "}" in template:
            opinions[slot] = _pick_opinion(rng)

    tokens: list[str] = []
    spans: dict[str, Span] = {}
    for piece in template.split():
        slot = piece[1:-1] if piece.startswith("{") else None
        if slot in aspects:
            words = aspects[slot].split()
        elif slot in opinions:
            words = opinions[slot][0].split()
        else:
            tokens.append(piece)
            continue
        spans[slot] = Span(len(tokens), len(tokens) + len(words) - 1)
        tokens.extend(words)

    triplets = []
    # "despite the {o} {a} ..." pairs o with a; every template pairs the
    # k-th opinion slot with the k-th aspect slot, or everything with the
    # single aspect when only one exists.
    pairings = []
    if "a2" in spans and "o2" in spans:
        pairings = [("a", "o"), ("a2", "o2")]
    elif "a2" in spans:  # shared opinion
        pairings = [("a", "o"), ("a2", "o")]
    elif "o2" in spans:  # shared aspect
        pairings = [("a", "o"), ("a", "o2")]
    else:
        pairings = [("a", "o")]
    for a_slot, o_slot in pairings:
        sentiment = SentimentPolarity(opinions[o_slot][1])
        triplets.append(OpinionTriplet(spans[a_slot], spans[o_slot], sentiment))
    return AnnotatedSentence(tuple(tokens), tuple(triplets))


def adjacent_span_sentence() -> AnnotatedSentence:
    # Two adjacent single-word aspects: decoding merges them, so this
    # sentence exercises the exception-count path.
    tokens = ("screen", "keyboard", "are", "great")
    return AnnotatedSentence(
        tokens,
        (
            OpinionTriplet(Span(0, 0), Span(3, 3), SentimentPolarity.POSITIVE),
            OpinionTriplet(Span(1, 1), Span(3, 3), SentimentPolarity.POSITIVE),
        ),
    )


def generate(seed: int, counts: dict[str, int]) -> dict[str, list[AnnotatedSentence]]:
    rng = np.random.default_rng(seed)
    seen: set[tuple[str, ...]] = set()
    splits: dict[str, list[AnnotatedSentence]] = {}
    for name, count in counts.items():
        sentences = []
        while len(sentences) < count:
            ann = build_sentence(rng)
            if ann.tokens in seen:
                continue
            if unseparable_span_pairs(ann):
                continue
            # Generated data must round-trip exactly through the grid.
            for task in Task:
                result = decode(encode_grid(ann, task))
                assert result.pairs == ann.pairs(), ann
            seen.add(ann.tokens)
            sentences.append(ann)
        splits[name] = sentences
    splits["test"].append(adjacent_span_sentence())
    return splits


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="data/sample")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--train", type=int, default=200)
    parser.add_argument("--dev", type=int, default=40)
    parser.add_argument("--test", type=int, default=59)
    args = parser.parse_args()

    counts = {"train": args.train, "dev": args.dev, "test": args.test}
    splits = generate(args.seed, counts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, sentences in splits.items():
        serialize_split(sentences, out / f"{name}.jsonl")
        total = sum(len(s.triplets) for s in sentences)
        print(f"{name}: {len(sentences)} sentences, {total} triplets")
    return 0


if __name__ == "__main__":
    sys.exit(main())
