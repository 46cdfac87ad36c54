from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from gridtag.corpus import (
    AnnotatedSentence,
    OpinionTriplet,
    SentimentPolarity,
    Span,
)
from gridtag.grid import Task

settings.register_profile(
    "suite",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

SAMPLE_DATA = Path(__file__).resolve().parent.parent / "data" / "sample"


@pytest.fixture(scope="session")
def sample_data_dir() -> Path:
    assert SAMPLE_DATA.exists(), "run scripts/make_sample_data.py first"
    return SAMPLE_DATA


@st.composite
def annotated_sentences(draw, max_len: int = 12) -> AnnotatedSentence:
    """Sentences whose gold spans are disjoint, never same-type adjacent,
    and all participating in at least one triplet: exactly the ones the
    grid round-trips losslessly."""
    segments = draw(
        st.lists(
            st.tuples(
                st.integers(0, 1),  # extra gap beyond the minimum
                st.integers(1, 3),  # span length
                st.sampled_from(["a", "o"]),
            ),
            min_size=2,
            max_size=4,
        )
    )
    aspects: list[Span] = []
    opinions: list[Span] = []
    cursor = 0
    previous_kind = None
    for extra_gap, length, kind in segments:
        # Same-type neighbours need a separating token; different types
        # may touch.
        gap = extra_gap + (1 if kind == previous_kind else 0)
        left = cursor + gap
        right = left + length - 1
        if right >= max_len:
            break
        (aspects if kind == "a" else opinions).append(Span(left, right))
        cursor = right + 1
        previous_kind = kind
    if not aspects or not opinions:
        aspects, opinions = [Span(0, 0)], [Span(2, 2)]
        cursor = 3
    n = max(cursor, draw(st.integers(cursor, max_len)))

    polarity = st.sampled_from(list(SentimentPolarity))
    triplets: dict[tuple[Span, Span], SentimentPolarity] = {}
    for k, aspect in enumerate(aspects):
        opinion = opinions[draw(st.integers(0, len(opinions) - 1))]
        triplets[(aspect, opinion)] = draw(polarity)
    for opinion in opinions:
        if not any(o == opinion for _, o in triplets):
            aspect = aspects[draw(st.integers(0, len(aspects) - 1))]
            triplets[(aspect, opinion)] = draw(polarity)

    tokens = tuple(f"w{k}" for k in range(n))
    return AnnotatedSentence(
        tokens,
        tuple(OpinionTriplet(a, o, c) for (a, o), c in sorted(triplets.items())),
    )


@st.composite
def random_grids(draw, task: Task | None = None, max_len: int = 12):
    """Arbitrary tag grids (any tags anywhere), biased toward real-looking
    diagonals, for decoder stress tests."""
    from gridtag.grid import TagGrid

    grid_task = task or draw(st.sampled_from(list(Task)))
    n = draw(st.integers(1, max_len))
    tags = grid_task.tags
    diag_choices = st.sampled_from([tags[0], tags[1], tags[-1]])
    cell_choices = st.sampled_from(list(tags))
    grid = TagGrid(n, grid_task)
    for i in range(n):
        grid.set(i, i, draw(diag_choices))
        for j in range(i + 1, n):
            if draw(st.booleans()):
                grid.set(i, j, draw(cell_choices))
    return grid


def seeded_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
