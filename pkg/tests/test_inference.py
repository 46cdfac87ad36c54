import numpy as np
import pytest

from gridtag import autodiff as ad
from gridtag import inference
from gridtag.autodiff import ParamStore, Tensor, finite_diff_check
from gridtag.config import TrainConfig
from gridtag.grid import cell_index, cell_pairs, num_cells
from gridtag.inference import (
    GridState,
    InferenceParams,
    init_inference_params,
    initial_state,
    refine_step,
    row_col_evidence,
    run_inference,
    word_cell_matrix,
    word_evidence,
)


def make_params(dz, num_tags, turns, seed=0, exclude_self=False):
    store = ParamStore()
    params = init_inference_params(
        store, np.random.default_rng(seed), dz, num_tags, turns, exclude_self
    )
    return store, params


def softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def test_initial_state_zero_weights_gives_uniform():
    store, params = make_params(dz=6, num_tags=4, turns=1)
    store["infer.ws"].data[:] = 0.0
    store["infer.bs"].data[:] = 0.0
    r = Tensor(np.random.default_rng(0).normal(size=(3, 6)))
    state = initial_state(r, params, n=2)
    np.testing.assert_allclose(state.p.data, np.full((3, 4), 0.25))
    assert state.turn == 0


def test_initial_state_features_are_input():
    store, params = make_params(dz=6, num_tags=4, turns=1)
    r = Tensor(np.random.default_rng(1).normal(size=(3, 6)))
    state = initial_state(r, params, n=2)
    assert state.z is r


def test_initial_state_cell_count():
    store, params = make_params(dz=4, num_tags=4, turns=0)
    r = Tensor(np.zeros((num_cells(2), 4)))
    state = initial_state(r, params, n=2)
    assert state.p.shape == (3, 4)


def test_param_shape_validation():
    store = ParamStore()
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="w_q"):
        InferenceParams(
            w_q=store.add("wq", np.zeros((5, 4))),
            b_q=store.add("bq", np.zeros(4)),
            w_s=store.add("ws", np.zeros((4, 4))),
            b_s=store.add("bs", np.zeros(4)),
            turns=1,
        )


def test_q_dimension_bookkeeping():
    for num_tags in (4, 6):
        dz = 10
        store, params = make_params(dz=dz, num_tags=num_tags, turns=1)
        assert params.w_q.shape == (dz + 3 * num_tags, dz)


def make_state(p_values, n):
    p = np.asarray(p_values, dtype=np.float64)
    return GridState(n=n, z=Tensor(np.zeros((p.shape[0], 2))), p=Tensor(p), turn=0)


def test_evidence_single_word():
    state = make_state([[0.7, 0.3]], n=1)
    p_i, p_j = row_col_evidence(state, 0, 0)
    np.testing.assert_array_equal(p_i, [0.7, 0.3])
    np.testing.assert_array_equal(p_j, [0.7, 0.3])


def test_evidence_elementwise_max():
    # word 0's cells: (0,0) and (0,1)
    state = make_state([[0.7, 0.3], [0.2, 0.8], [0.5, 0.5]], n=2)
    p_i, _ = row_col_evidence(state, 0, 1)
    np.testing.assert_array_equal(p_i, [0.7, 0.8])


def test_evidence_matches_double_loop_oracle():
    rng = np.random.default_rng(3)
    n = 3
    p = softmax(rng.normal(size=(num_cells(n), 4)))
    state = make_state(p, n)
    pooled = word_evidence(state).data
    for i in range(n):
        for j in range(i, n):
            expected_i = np.max(
                [p[cell_index(min(i, k), max(i, k), n)] for k in range(n)], axis=0
            )
            expected_j = np.max(
                [p[cell_index(min(j, k), max(j, k), n)] for k in range(n)], axis=0
            )
            got_i, got_j = row_col_evidence(state, i, j)
            np.testing.assert_array_equal(got_i, expected_i)
            np.testing.assert_array_equal(got_j, expected_j)
            np.testing.assert_array_equal(pooled[i], expected_i)
            np.testing.assert_array_equal(pooled[j], expected_j)


def test_word_cell_matrix_layout():
    m = word_cell_matrix(3)
    # word 0: cells (0,0), (0,1), (0,2); word 2: (0,2), (1,2), (2,2)
    assert m[0].tolist() == [0, 1, 2]
    assert m[2].tolist() == [2, 4, 5]


def refine_oracle(p, z, n, w_q, b_q, exclude_self=False):
    """Straight-line per-cell reimplementation of one turn's features."""
    z_new = np.empty_like(z)
    for i in range(n):
        for j in range(i, n):
            c = cell_index(i, j, n)

            def pool(word, other):
                rows = [
                    p[cell_index(min(word, k), max(word, k), n)]
                    for k in range(n)
                    if not (exclude_self and k == other)
                ]
                return np.max(rows, axis=0) if rows else np.zeros(p.shape[1])

            q = np.concatenate([z[c], pool(i, j), pool(j, i), p[c]])
            z_new[c] = q @ w_q + b_q
    return z_new


@pytest.mark.parametrize("exclude_self", [False, True])
def test_refine_step_matches_oracle(exclude_self):
    rng = np.random.default_rng(9)
    n, num_tags, dz = 3, 4, 8
    store, params = make_params(dz, num_tags, turns=1, seed=9, exclude_self=exclude_self)
    r = Tensor(rng.normal(size=(num_cells(n), dz)))
    state = initial_state(r, params, n)
    new = refine_step(state, params)
    z_exp = refine_oracle(
        state.p.data,
        state.z.data,
        n,
        store["infer.wq"].data,
        store["infer.bq"].data,
        exclude_self,
    )
    p_exp = softmax(z_exp @ store["infer.ws"].data + store["infer.bs"].data)
    np.testing.assert_allclose(new.z.data, z_exp, atol=1e-12)
    np.testing.assert_allclose(new.p.data, p_exp, atol=1e-12)
    assert new.turn == 1


def test_refine_is_synchronous():
    # Updating from a frozen snapshot means any cell visit order gives the
    # same answer; the oracle iterates cells in a shuffled order.
    rng = np.random.default_rng(4)
    n, num_tags, dz = 4, 6, 6
    store, params = make_params(dz, num_tags, turns=1, seed=4)
    r = Tensor(rng.normal(size=(num_cells(n), dz)))
    state = initial_state(r, params, n)
    new = refine_step(state, params)

    rows_i, rows_j = cell_pairs(n)
    order = rng.permutation(num_cells(n))
    p_snapshot = state.p.data.copy()
    z_snapshot = state.z.data.copy()
    out = np.empty_like(new.p.data)
    for c in order:
        i, j = int(rows_i[c]), int(rows_j[c])
        pool_i, pool_j = row_col_evidence(state, i, j)
        q = np.concatenate([z_snapshot[c], pool_i, pool_j, p_snapshot[c]])
        z_c = q @ store["infer.wq"].data + store["infer.bq"].data
        out[c] = softmax(z_c @ store["infer.ws"].data + store["infer.bs"].data)
    np.testing.assert_allclose(new.p.data, out, atol=1e-12)


def test_fixed_point_feature_selector():
    # w_q that copies z and ignores the evidence makes every turn a no-op.
    rng = np.random.default_rng(5)
    n, num_tags, dz = 3, 4, 6
    store, params = make_params(dz, num_tags, turns=3, seed=5)
    store["infer.wq"].data[:] = 0.0
    store["infer.wq"].data[:dz, :] = np.eye(dz)
    store["infer.bq"].data[:] = 0.0
    r = Tensor(rng.normal(size=(num_cells(n), dz)))
    state0 = initial_state(r, params, n)
    state1 = refine_step(state0, params)
    np.testing.assert_allclose(state1.z.data, state0.z.data, atol=1e-12)
    np.testing.assert_allclose(state1.p.data, state0.p.data, atol=1e-12)
    final = run_inference(r, params, n)
    np.testing.assert_allclose(final.data, state0.p.data, atol=1e-12)


def test_zero_turns_returns_initial_distributions():
    rng = np.random.default_rng(6)
    store, params = make_params(dz=6, num_tags=4, turns=0, seed=6)
    r = Tensor(rng.normal(size=(num_cells(2), 6)))
    final = run_inference(r, params, 2)
    np.testing.assert_array_equal(final.data, initial_state(r, params, 2).p.data)


def test_output_rows_are_distributions():
    rng = np.random.default_rng(7)
    store, params = make_params(dz=8, num_tags=6, turns=3, seed=7)
    r = Tensor(rng.normal(size=(num_cells(5), 8)) * 4)
    final = run_inference(r, params, 5)
    np.testing.assert_allclose(final.data.sum(axis=1), np.ones(num_cells(5)), atol=1e-9)


def test_exclude_self_single_word_uses_zero_evidence():
    store, params = make_params(dz=4, num_tags=4, turns=1, exclude_self=True)
    r = Tensor(np.random.default_rng(8).normal(size=(1, 4)))
    state = initial_state(r, params, 1)
    new = refine_step(state, params)
    q = np.concatenate([state.z.data[0], np.zeros(4), np.zeros(4), state.p.data[0]])
    expected_z = q @ store["infer.wq"].data + store["infer.bq"].data
    np.testing.assert_allclose(new.z.data[0], expected_z, atol=1e-12)


def test_gradients_through_two_turn_unroll():
    rng = np.random.default_rng(10)
    n, num_tags, dz = 3, 4, 4
    store, params = make_params(dz, num_tags, turns=2, seed=10)
    r_const = rng.normal(size=(num_cells(n), dz))
    gold = rng.integers(0, num_tags, size=num_cells(n))

    def f():
        p = run_inference(Tensor(r_const), params, n)
        picked = ad.take_per_row(p, gold)
        return ad.mul(ad.total(ad.log(picked)), -1.0)

    err = finite_diff_check(f, store, eps=1e-5, param_names=["infer.wq"])
    assert err < 1e-4


def test_default_turns_per_encoder():
    assert TrainConfig(encoder="cnn").resolved_turns == 2
    assert TrainConfig(encoder="bilstm").resolved_turns == 3
    assert TrainConfig(encoder="cnn", inference_turns=5).resolved_turns == 5
