"""Iterative refinement of per-cell tag distributions.

Each turn rebuilds every cell's features from the previous turn's
snapshot (synchronous update): the cell's feature vector z_ij, the
max-pooled distributions of everything involving word i and word j, and
the cell's own previous distribution are concatenated, mapped back to
feature size by one affine layer, and re-scored.

Turn 0 scores the raw word-pair representations; the scoring layer
(w_s, b_s) is shared by turn 0 and every later turn, as is (w_q, b_q)
across turns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .grid import cell_index, cell_pairs

MASK_VALUE = -1e30  # additive mask; wins against no probability in [0, 1]


@dataclass
class InferenceParams:
    """Refinement weights; w_q folds [z; p_i; p_j; p_ij] back to feature size."""

    w_q: Tensor  # (dz + 3 * num_tags, dz)
    b_q: Tensor  # (dz,)
    w_s: Tensor  # (dz, num_tags)
    b_s: Tensor  # (num_tags,)
    turns: int
    exclude_self: bool = False

    def __post_init__(self) -> None:
        dz, num_tags = self.w_s.shape
        expected = dz + 3 * num_tags
        if self.w_q.shape != (expected, dz):
            raise ValueError(
                f"w_q must map {expected} -> {dz}, got shape {self.w_q.shape}"
            )
        if self.turns < 0:
            raise ValueError("turn count must be >= 0")


def init_inference_params(
    store: ParamStore,
    rng: np.random.Generator,
    feature_dim: int,
    num_tags: int,
    turns: int,
    exclude_self: bool = False,
) -> InferenceParams:
    q_dim = feature_dim + 3 * num_tags
    return InferenceParams(
        w_q=store.add("infer.wq", ad.xavier_uniform(rng, q_dim, feature_dim, (q_dim, feature_dim))),
        b_q=store.add("infer.bq", np.zeros(feature_dim)),
        w_s=store.add("infer.ws", ad.xavier_uniform(rng, feature_dim, num_tags, (feature_dim, num_tags))),
        b_s=store.add("infer.bs", np.zeros(num_tags)),
        turns=turns,
        exclude_self=exclude_self,
    )


def params_from_store(store: ParamStore, turns: int, exclude_self: bool = False) -> InferenceParams:
    return InferenceParams(
        w_q=store["infer.wq"],
        b_q=store["infer.bq"],
        w_s=store["infer.ws"],
        b_s=store["infer.bs"],
        turns=turns,
        exclude_self=exclude_self,
    )


@dataclass
class GridState:
    """Per-cell features and tag distributions after some turn."""

    n: int
    z: Tensor  # (cells, dz)
    p: Tensor  # (cells, num_tags)
    turn: int


def initial_state(r: Tensor, params: InferenceParams, n: int) -> GridState:
    """Turn 0: score the word-pair representations directly."""
    p0 = ad.row_softmax(ad.add(ad.matmul(r, params.w_s), params.b_s))
    return GridState(n=n, z=r, p=p0, turn=0)


def word_cell_matrix(n: int) -> np.ndarray:
    """(n, n) matrix: row w lists the cell index joining word w with word k."""
    words = np.arange(n)
    lo = np.minimum.outer(words, words)
    hi = np.maximum.outer(words, words)
    return lo * n - (lo * (lo - 1)) // 2 + (hi - lo)


def word_evidence(state: GridState) -> Tensor:
    """Per-word elementwise max over the distributions of its n cells."""
    gathered = ad.lookup(state.p, word_cell_matrix(state.n))  # (n, n, tags)
    return ad.max_over_axis(gathered, axis=1)


def _evidence_excluding_cell(state: GridState, own: np.ndarray, other: np.ndarray) -> Tensor:
    """Pool word `own`'s cells for every cell, masking out the cell itself.

    The cell joining words (own, other) sits at column `other` of row
    `own` in the word-cell matrix, so an additive mask there removes it
    before the max.
    """
    n = state.n
    cells = len(own)
    gathered = ad.lookup(state.p, word_cell_matrix(n)[own])  # (cells, n, tags)
    mask = np.zeros((cells, n, 1))
    mask[np.arange(cells), other] = MASK_VALUE
    return ad.max_over_axis(ad.add(gathered, Tensor(mask)), axis=1)


def row_col_evidence(
    state: GridState, i: int, j: int, exclude_self: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """The two pooled evidence vectors feeding cell (i, j), as plain arrays.

    Inspection helper; the vectorized path in refine_step computes the
    same values for all cells at once.
    """
    n = state.n
    p = state.p.data

    def pool(word: int, other: int) -> np.ndarray:
        rows = []
        for k in range(n):
            if exclude_self and k == other:
                continue
            rows.append(p[cell_index(min(word, k), max(word, k), n)])
        if not rows:
            return np.zeros(p.shape[1])
        return np.max(rows, axis=0)

    return pool(i, j), pool(j, i)


def refine_step(state: GridState, params: InferenceParams) -> GridState:
    """One synchronous turn: every cell updates from the previous snapshot."""
    n = state.n
    rows_i, rows_j = cell_pairs(n)
    if not params.exclude_self:
        pooled = word_evidence(state)  # (n, tags)
        evidence_i = ad.lookup(pooled, rows_i)
        evidence_j = ad.lookup(pooled, rows_j)
    elif n == 1:
        evidence_i = Tensor(np.zeros_like(state.p.data))
        evidence_j = Tensor(np.zeros_like(state.p.data))
    else:
        evidence_i = _evidence_excluding_cell(state, rows_i, rows_j)
        evidence_j = _evidence_excluding_cell(state, rows_j, rows_i)
    q = ad.concat([state.z, evidence_i, evidence_j, state.p], axis=-1)
    z = ad.add(ad.matmul(q, params.w_q), params.b_q)  # affine, no nonlinearity
    p = ad.row_softmax(ad.add(ad.matmul(z, params.w_s), params.b_s))
    return GridState(n=n, z=z, p=p, turn=state.turn + 1)


def run_inference(r: Tensor, params: InferenceParams, n: int) -> Tensor:
    """Final per-cell distributions after the configured number of turns."""
    state = initial_state(r, params, n)
    for _ in range(params.turns):
        state = refine_step(state, params)
    return state.p
