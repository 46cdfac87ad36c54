"""Exact-match scoring of terms, pairs, and triplets.

A predicted span counts only when its boundaries equal a gold span's; a
pair needs both spans to match a gold pair, and a triplet additionally
needs the sentiment.  Counts are pooled over the whole corpus before
precision/recall/F1 (micro-averaging), never averaged per sentence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import AnnotatedSentence
from .grid import DecodedResult, Task


class ScoringError(Exception):
    pass


@dataclass
class MatchCounts:
    predicted: int = 0
    gold: int = 0
    correct: int = 0

    def update(self, predicted: frozenset, gold: set) -> None:
        self.predicted += len(predicted)
        self.gold += len(gold)
        self.correct += len(predicted & gold)

    @property
    def precision(self) -> float:
        return self.correct / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.correct / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def to_dict(self) -> dict:
        return {
            "predicted": self.predicted,
            "gold": self.gold,
            "correct": self.correct,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass
class ScoreReport:
    task: Task
    aspect: MatchCounts
    opinion: MatchCounts
    pair: MatchCounts
    triplet: MatchCounts | None  # triplet task only

    def categories(self) -> list[tuple[str, MatchCounts]]:
        rows = [("aspect", self.aspect), ("opinion", self.opinion), ("pair", self.pair)]
        if self.triplet is not None:
            rows.append(("triplet", self.triplet))
        return rows

    @property
    def headline_f1(self) -> float:
        """Pair F1 for the pair task, triplet F1 for the triplet task."""
        return self.triplet.f1 if self.triplet is not None else self.pair.f1

    def to_dict(self) -> dict:
        out: dict = {"task": self.task.value}
        for name, counts in self.categories():
            out[name] = counts.to_dict()
        return out

    def render_table(self) -> str:
        lines = [f"{'category':<10}{'P':>8}{'R':>8}{'F1':>8}"]
        for name, counts in self.categories():
            lines.append(
                f"{name:<10}{counts.precision:>8.4f}{counts.recall:>8.4f}{counts.f1:>8.4f}"
            )
        return "\n".join(lines)


def score(
    predictions: Sequence[DecodedResult],
    gold: Sequence[AnnotatedSentence],
    task: Task,
) -> ScoreReport:
    """Pool exact-match counts over aligned prediction/gold sentences."""
    if len(predictions) != len(gold):
        raise ScoringError(
            f"{len(predictions)} predictions for {len(gold)} gold sentences"
        )
    aspect, opinion, pair = MatchCounts(), MatchCounts(), MatchCounts()
    triplet = MatchCounts() if task is Task.OTE else None
    for pred, sentence in zip(predictions, gold):
        aspect.update(pred.aspects, sentence.aspect_spans())
        opinion.update(pred.opinions, sentence.opinion_spans())
        pair.update(pred.pairs, sentence.pairs())
        if triplet is not None:
            triplet.update(pred.triplets, set(sentence.triplets))
    return ScoreReport(task, aspect, opinion, pair, triplet)
