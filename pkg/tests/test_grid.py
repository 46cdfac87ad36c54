from collections import Counter

import numpy as np
import pytest
from hypothesis import given

from gridtag.corpus import (
    AnnotatedSentence,
    OpinionPair,
    OpinionTriplet,
    SentimentPolarity,
    Span,
)
from gridtag.grid import (
    DecodedResult,
    GridError,
    OpeTag,
    OteTag,
    TagGrid,
    Task,
    cell_index,
    cell_pairs,
    decode,
    decode_ope,
    decode_ote,
    encode_grid,
    grid_from_obj,
    grid_from_probabilities,
    grid_to_obj,
    num_cells,
    unseparable_span_pairs,
)

from conftest import annotated_sentences, random_grids


# --- independent decoding oracle: enumerate every candidate span and pair ---

def oracle_decode(grid: TagGrid) -> DecodedResult:
    n = grid.n
    tags = grid.task.tags
    a_tag, o_tag = tags[0], tags[1]

    def maximal_spans(tag):
        found = set()
        for left in range(n):
            for right in range(left, n):
                inside = all(grid.get(i, i) is tag for i in range(left, right + 1))
                open_left = left == 0 or grid.get(left - 1, left - 1) is not tag
                open_right = right == n - 1 or grid.get(right + 1, right + 1) is not tag
                if inside and open_left and open_right:
                    found.add(Span(left, right))
        return found

    aspects = maximal_spans(a_tag)
    opinions = maximal_spans(o_tag)
    pairs, triplets = set(), set()
    sentiments = {
        OteTag.POS: SentimentPolarity.POSITIVE,
        OteTag.NEU: SentimentPolarity.NEUTRAL,
        OteTag.NEG: SentimentPolarity.NEGATIVE,
    }
    for a in aspects:
        for o in opinions:
            cross = [grid.get(i, j) for i in a.indices() for j in o.indices()]
            if grid.task is Task.OPE:
                if any(t is OpeTag.P for t in cross):
                    pairs.add(OpinionPair(a, o))
            else:
                counts = Counter(t for t in cross if t in sentiments)
                if not counts:
                    continue
                top = max(counts.values())
                for candidate in (OteTag.NEG, OteTag.NEU, OteTag.POS):
                    if counts.get(candidate, 0) == top:
                        winner = candidate
                        break
                pairs.add(OpinionPair(a, o))
                triplets.add(OpinionTriplet(a, o, sentiments[winner]))
    return DecodedResult(
        frozenset(aspects), frozenset(opinions), frozenset(pairs), frozenset(triplets)
    )


def ann_two_tokens() -> AnnotatedSentence:
    return AnnotatedSentence(
        ("great", "food"),
        (OpinionTriplet(Span(1, 1), Span(0, 0), SentimentPolarity.POSITIVE),),
    )


def test_encode_two_token_ote():
    grid = encode_grid(ann_two_tokens(), Task.OTE)
    assert grid.get(0, 0) is OteTag.O
    assert grid.get(1, 1) is OteTag.A
    assert grid.get(0, 1) is OteTag.POS


def test_encode_two_token_ope():
    grid = encode_grid(ann_two_tokens(), Task.OPE)
    assert grid.get(0, 0) is OpeTag.O
    assert grid.get(1, 1) is OpeTag.A
    assert grid.get(0, 1) is OpeTag.P


def test_encode_multiword_aspect_tags_inner_cell():
    # Both words of a two-word aspect share the A tag on their cross cell.
    ann = AnnotatedSentence(
        ("hot", "dogs", "are", "top", "notch"),
        (OpinionTriplet(Span(0, 1), Span(3, 4), SentimentPolarity.POSITIVE),),
    )
    grid = encode_grid(ann, Task.OPE)
    assert grid.get(0, 1) is OpeTag.A
    assert grid.get(3, 4) is OpeTag.O
    # every cross cell of the pair is tagged
    for i in (0, 1):
        for j in (3, 4):
            assert grid.get(i, j) is OpeTag.P


def test_encode_conflicting_cell_raises():
    # Word 1 is an opinion term in one triplet and an aspect term in
    # another: legal annotation, unrepresentable diagonal cell.
    ann = AnnotatedSentence(
        ("a", "b", "c"),
        (
            OpinionTriplet(Span(0, 0), Span(1, 1), SentimentPolarity.POSITIVE),
            OpinionTriplet(Span(1, 1), Span(2, 2), SentimentPolarity.POSITIVE),
        ),
    )
    with pytest.raises(GridError, match="claimed by both"):
        encode_grid(ann, Task.OPE)


def test_decode_six_token_example():
    grid = TagGrid(6, Task.OPE)
    for i in (1, 2):
        grid.set(i, i, OpeTag.A)
    for i in (4, 5):
        grid.set(i, i, OpeTag.O)
    grid.set(1, 4, OpeTag.P)
    result = decode_ope(grid)
    assert result.aspects == {Span(1, 2)}
    assert result.opinions == {Span(4, 5)}
    assert result.pairs == {OpinionPair(Span(1, 2), Span(4, 5))}


def test_decode_all_none_grid():
    result = decode_ope(TagGrid(4, Task.OPE))
    assert result == DecodedResult(frozenset(), frozenset(), frozenset(), frozenset())


def test_decode_terms_without_pair_tag():
    grid = TagGrid(3, Task.OPE)
    grid.set(0, 0, OpeTag.A)
    grid.set(2, 2, OpeTag.O)
    result = decode_ope(grid)
    assert result.aspects == {Span(0, 0)}
    assert result.opinions == {Span(2, 2)}
    assert result.pairs == frozenset()


def build_ote_candidate(cross_tags):
    # aspect [0,1] x opinion [3,4]: four cross cells
    grid = TagGrid(5, Task.OTE)
    grid.set(0, 0, OteTag.A)
    grid.set(1, 1, OteTag.A)
    grid.set(3, 3, OteTag.O)
    grid.set(4, 4, OteTag.O)
    cells = [(0, 3), (0, 4), (1, 3), (1, 4)]
    for (i, j), tag in zip(cells, cross_tags):
        grid.set(i, j, tag)
    return grid


def test_ote_majority_vote():
    grid = build_ote_candidate([OteTag.POS, OteTag.POS, OteTag.NEU, OteTag.N])
    (triplet,) = decode_ote(grid).triplets
    assert triplet.sentiment is SentimentPolarity.POSITIVE


def test_ote_no_sentiment_tags_no_triplet():
    grid = build_ote_candidate([OteTag.N, OteTag.N, OteTag.N, OteTag.N])
    result = decode_ote(grid)
    assert result.triplets == frozenset()
    assert result.pairs == frozenset()
    assert result.aspects == {Span(0, 1)}  # terms still decoded


def test_ote_tie_breaks_negative_first():
    grid = build_ote_candidate([OteTag.POS, OteTag.NEG, OteTag.N, OteTag.N])
    (triplet,) = decode_ote(grid).triplets
    assert triplet.sentiment is SentimentPolarity.NEGATIVE
    grid = build_ote_candidate([OteTag.NEU, OteTag.NEG, OteTag.N, OteTag.N])
    (triplet,) = decode_ote(grid).triplets
    assert triplet.sentiment is SentimentPolarity.NEGATIVE


def test_aspect_after_opinion_still_pairs():
    # opinion span precedes the aspect span; cross cells live above the
    # diagonal with opinion index first
    ann = AnnotatedSentence(
        ("tasty", "soup",),
        (OpinionTriplet(Span(1, 1), Span(0, 0), SentimentPolarity.POSITIVE),),
    )
    grid = encode_grid(ann, Task.OTE)
    result = decode_ote(grid)
    assert result.pairs == {OpinionPair(Span(1, 1), Span(0, 0))}


def test_symmetric_lookup():
    grid = encode_grid(ann_two_tokens(), Task.OPE)
    for i in range(2):
        for j in range(2):
            assert grid.get(i, j) is grid.get(j, i)


def test_cell_index_matches_triu_order():
    for n in (1, 2, 5, 9):
        rows, cols = cell_pairs(n)
        for k, (i, j) in enumerate(zip(rows, cols)):
            assert cell_index(int(i), int(j), n) == k
        assert len(rows) == num_cells(n)


def test_grid_cell_count_enforced():
    with pytest.raises(GridError, match="expected 6 cells"):
        TagGrid(3, Task.OPE, [OpeTag.N] * 5)


def test_grid_from_probabilities_argmax():
    probs = np.array([[0.1, 0.2, 0.6, 0.1]])
    grid = grid_from_probabilities(probs, 1, Task.OPE)
    assert grid.get(0, 0) is OpeTag.P


def test_grid_from_probabilities_tie_takes_lowest_index():
    probs = np.full((1, 4), 0.25)
    grid = grid_from_probabilities(probs, 1, Task.OPE)
    assert grid.get(0, 0) is OpeTag.A


def test_grid_from_probabilities_rejects_unnormalized():
    with pytest.raises(GridError, match="sums to"):
        grid_from_probabilities(np.array([[0.2, 0.1, 0.1, 0.1]]), 1, Task.OPE)


def test_unseparable_spans_flagged():
    adjacent = AnnotatedSentence(
        ("screen", "keyboard", "are", "great"),
        (
            OpinionTriplet(Span(0, 0), Span(3, 3), SentimentPolarity.POSITIVE),
            OpinionTriplet(Span(1, 1), Span(3, 3), SentimentPolarity.POSITIVE),
        ),
    )
    (clash,) = unseparable_span_pairs(adjacent)
    assert clash.kind == "aspect"
    separated = AnnotatedSentence(
        ("screen", "and", "keyboard", "are", "great"),
        (
            OpinionTriplet(Span(0, 0), Span(4, 4), SentimentPolarity.POSITIVE),
            OpinionTriplet(Span(2, 2), Span(4, 4), SentimentPolarity.POSITIVE),
        ),
    )
    assert unseparable_span_pairs(separated) == []


def test_off_diagonal_term_tags_ignored_by_decoder():
    grid = TagGrid(4, Task.OPE)
    grid.set(0, 0, OpeTag.A)
    grid.set(2, 2, OpeTag.O)
    grid.set(0, 2, OpeTag.P)
    noisy = TagGrid(4, Task.OPE, grid.tags_in_order())
    noisy.set(1, 3, OpeTag.A)  # stray same-term tag off the diagonal
    noisy.set(0, 3, OpeTag.O)
    assert decode_ope(noisy) == decode_ope(grid)


def test_relaxation_monotonicity():
    # A fully tagged pair and a minimally tagged one decode identically.
    ann = AnnotatedSentence(
        ("hot", "dogs", "are", "top", "notch"),
        (OpinionTriplet(Span(0, 1), Span(3, 4), SentimentPolarity.POSITIVE),),
    )
    full = encode_grid(ann, Task.OPE)
    minimal = TagGrid(5, Task.OPE)
    for i in (0, 1):
        minimal.set(i, i, OpeTag.A)
    for j in (3, 4):
        minimal.set(j, j, OpeTag.O)
    minimal.set(1, 3, OpeTag.P)  # single cross cell
    assert decode_ope(full) == decode_ope(minimal)


@given(annotated_sentences())
def test_round_trip_recovers_gold(ann):
    for task in Task:
        result = decode(encode_grid(ann, task))
        assert result.aspects == ann.aspect_spans()
        assert result.opinions == ann.opinion_spans()
        assert result.pairs == ann.pairs()
        if task is Task.OTE:
            assert result.triplets == set(ann.triplets)


@given(random_grids())
def test_decode_matches_span_enumeration_oracle(grid):
    assert decode(grid) == oracle_decode(grid)


@given(annotated_sentences())
def test_grid_dump_round_trip(ann):
    grid = encode_grid(ann, Task.OTE)
    obj = grid_to_obj(grid, ann.tokens)
    # no explicit N cells in the dump
    assert all(label != "N" for _, _, label in obj["cells"])
    loaded, tokens = grid_from_obj(obj)
    assert loaded == grid
    assert tokens == ann.tokens
