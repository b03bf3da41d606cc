import json
import zlib

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shadowgnn import numerics as nx
from shadowgnn.numerics import Tensor, grad_check
from shadowgnn.numerics.gradcheck import analytic_gradient, numerical_gradient


def rand(rng, *shape):
    return Tensor(rng.uniform(-2, 2, size=shape))


def weighted_sum(y, w):
    return nx.total(nx.mul(y, Tensor(w)))


# -- matmul -----------------------------------------------------------------


def test_matmul_identity():
    out = nx.matmul(Tensor(np.eye(2)), Tensor([[1, 2], [3, 4]]))
    assert out.data.tolist() == [[1, 2], [3, 4]]


def test_matmul_orthogonal_rows():
    assert nx.matmul(Tensor([[1, 0]]), Tensor([[0], [5]])).data.tolist() == [[0]]


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(nx.ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        nx.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


def test_matmul_gradient_vs_finite_differences():
    rng = np.random.default_rng(0)
    a, b = rand(rng, 3, 4), rand(rng, 4, 2)
    assert grad_check(lambda x: nx.total(nx.matmul(x, b)), a) < 1e-6
    assert grad_check(lambda x: nx.total(nx.matmul(a, x)), b) < 1e-6


def test_batched_matmul_gradient():
    rng = np.random.default_rng(1)
    a, b = rand(rng, 2, 3, 4), rand(rng, 2, 4, 2)
    w = rng.uniform(-1, 1, size=(2, 3, 2))
    assert grad_check(lambda x: weighted_sum(nx.matmul(x, b), w), a) < 1e-6
    assert grad_check(lambda x: weighted_sum(nx.matmul(a, x), w), b) < 1e-6


# -- softmax ------------------------------------------------------------------


def test_softmax_symmetric_row():
    assert np.allclose(nx.softmax_rows(Tensor([[0.0, 0.0]])).data, [[0.5, 0.5]], atol=0, rtol=1e-15)


def test_softmax_ln2():
    out = nx.softmax_rows(Tensor([[np.log(2.0), 0.0]])).data
    assert np.allclose(out, [[2 / 3, 1 / 3]], rtol=1e-14)


def test_softmax_large_logit_matches_extended_precision():
    out = nx.softmax_rows(Tensor([[1e9, 0.0]])).data
    mpmath.mp.dps = 50
    big = mpmath.mpf(10) ** 9
    ref = [mpmath.e**big / (mpmath.e**big + 1), 1 / (mpmath.e**big + 1)]
    assert np.all(np.isfinite(out))
    assert out[0, 0] == pytest.approx(float(ref[0]), abs=1e-15)
    assert out[0, 1] == pytest.approx(float(ref[1]), abs=1e-15)


def test_softmax_mask_zeroes_entries_exactly():
    mask = np.array([[True, False, True]])
    out = nx.softmax_rows(Tensor([[1.0, 5.0, 2.0]]), mask).data
    assert out[0, 1] == 0.0
    assert out.sum() == pytest.approx(1.0, abs=1e-12)


def test_softmax_fully_masked_row_raises():
    with pytest.raises(ValueError, match="fully masked"):
        nx.softmax_rows(Tensor([[1.0, 2.0]]), np.array([[False, False]]))


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (3, 5), elements=st.floats(-1e9, 1e9)))
def test_softmax_rows_sum_to_one(x):
    out = nx.softmax_rows(Tensor(x)).data
    assert np.all(np.abs(out.sum(axis=-1) - 1.0) <= 1e-9)


def test_softmax_gradcheck():
    rng = np.random.default_rng(2)
    x = rand(rng, 3, 4)
    w = rng.uniform(-1, 1, size=(3, 4))
    assert grad_check(lambda t: weighted_sum(nx.softmax_rows(t), w), x) < 1e-6


# -- layer norm ---------------------------------------------------------------


def test_layer_norm_constant_row():
    ones, zero = Tensor(np.ones(3)), Tensor(np.zeros(3))
    out = nx.layer_norm(Tensor([[4.0, 4.0, 4.0]]), ones, zero)
    assert out.data.tolist() == [[0.0, 0.0, 0.0]]


def test_layer_norm_normalised_row():
    out = nx.layer_norm(Tensor([[1.0, -1.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2))).data
    assert np.allclose(out, [[1.0, -1.0]], atol=1e-5)


def test_layer_norm_statistics():
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(3.0, 5.0, size=(1, 64)))
    out = nx.layer_norm(x, Tensor(np.ones(64)), Tensor(np.zeros(64))).data
    assert abs(out.mean()) < 1e-4
    assert abs(out.var() - 1.0) < 1e-4


def test_layer_norm_gradcheck_all_inputs():
    rng = np.random.default_rng(4)
    x, g, b = rand(rng, 3, 5), rand(rng, 5), rand(rng, 5)
    w = rng.uniform(-1, 1, size=(3, 5))
    assert grad_check(lambda t: weighted_sum(nx.layer_norm(t, g, b), w), x) < 1e-6
    assert grad_check(lambda t: weighted_sum(nx.layer_norm(x, t, b), w), g) < 1e-6
    assert grad_check(lambda t: weighted_sum(nx.layer_norm(x, g, t), w), b) < 1e-6


# -- pointwise suite ------------------------------------------------------------


def test_relu_sigmoid_values():
    assert nx.relu(Tensor([1.0, -1.0])).data.tolist() == [1.0, 0.0]
    assert nx.sigmoid(Tensor(0.0)).item() == 0.5


def test_dropout_eval_is_identity_bit_exact():
    x = Tensor(np.random.default_rng(5).normal(size=(4, 3)))
    assert nx.dropout(x, 0.3, train=False) is x
    assert np.array_equal(nx.dropout(x, 0.3, False).data, x.data)


def test_dropout_train_inverted_scaling():
    x = Tensor(np.ones((200, 50)))
    out = nx.dropout(x, 0.3, True, np.random.default_rng(0)).data
    kept = out[out != 0]
    assert np.allclose(kept, 1 / 0.7)
    assert abs(out.mean() - 1.0) < 0.05


def test_max_rows_ties_go_to_lowest_index():
    values, idx = nx.max_rows(Tensor([[1.0, 3.0], [1.0, 2.0], [0.0, 3.0]]))
    assert values.data.tolist() == [1.0, 3.0]
    assert idx.tolist() == [0, 0]


def test_mean_rows_and_embedding_lookup():
    table = Tensor(np.arange(12.0).reshape(4, 3))
    out = nx.embedding_lookup(table, [2, 0, 2])
    assert out.data.tolist() == [[6, 7, 8], [0, 1, 2], [6, 7, 8]]
    assert nx.mean_rows(out).data.tolist() == [4, 5, 6]


_NLL_MASK = np.array([[1, 1, 1, 0], [1, 0, 1, 1], [0, 1, 1, 1]], dtype=bool)


def test_nll_rows_matches_cross_entropy():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, 4))
    want = sum(nx.cross_entropy(Tensor(x[i]), t, _NLL_MASK[i]).item() for i, t in enumerate([2, 0, 3]))
    assert np.isclose(nx.nll_rows(Tensor(x), [2, 0, 3], _NLL_MASK).item(), want, rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        nx.nll_rows(Tensor(x), [3, 0, 3], _NLL_MASK)


@pytest.mark.parametrize(
    "name,fn,shapes",
    [
        ("relu", lambda x: nx.relu(x[0]), [(3, 4)]),
        ("sigmoid", lambda x: nx.sigmoid(x[0]), [(3, 4)]),
        ("tanh", lambda x: nx.tanh(x[0]), [(3, 4)]),
        ("add", lambda x: nx.add(x[0], x[1]), [(3, 4), (3, 4)]),
        ("add_bias", lambda x: nx.add(x[0], x[1]), [(3, 4), (4,)]),
        ("sub", lambda x: nx.sub(x[0], x[1]), [(3, 4), (3, 4)]),
        ("mul", lambda x: nx.mul(x[0], x[1]), [(3, 4), (3, 4)]),
        ("concat", lambda x: nx.concat_last_dim([x[0], x[1]]), [(3, 2), (3, 4)]),
        ("concat_rows", lambda x: nx.concat_rows([x[0], x[1]]), [(2, 4), (3, 4)]),
        ("mean_rows", lambda x: nx.mean_rows(x[0]), [(3, 4)]),
        ("max_rows", lambda x: nx.max_rows(x[0])[0], [(3, 4)]),
        ("embedding", lambda x: nx.embedding_lookup(x[0], [1, 3, 1]), [(4, 3)]),
        ("transpose", lambda x: nx.transpose(x[0]), [(3, 4)]),
        ("reshape", lambda x: nx.reshape(x[0], (4, 3)), [(3, 4)]),
        ("einsum", lambda x: nx.einsum("ihd,jhd->hij", x[0], x[1]), [(3, 2, 4), (5, 2, 4)]),
        ("scale_rows", lambda x: nx.scale_rows(x[0], x[1]), [(3, 4), (3,)]),
        ("gated_mix", lambda x: nx.gated_mix(x[0], x[1], x[2]), [(3, 4), (3, 4), (3, 4)]),
        ("log_softmax", lambda x: nx.log_softmax(x[0]), [(3, 4)]),
        ("cross_entropy", lambda x: nx.cross_entropy(x[0], 2), [(5,)]),
        ("nll_rows", lambda x: nx.nll_rows(x[0], [2, 0, 3], _NLL_MASK), [(3, 4)]),
        ("row", lambda x: nx.row(x[0], 1), [(3, 4)]),
        ("one_minus", lambda x: nx.one_minus(x[0]), [(3, 4)]),
    ],
)
def test_primitive_gradcheck(name, fn, shapes):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    inputs = [rand(rng, *s) for s in shapes]
    out_shape = fn(inputs).shape
    w = rng.uniform(-1, 1, size=out_shape)
    for k in range(len(inputs)):

        def f(t, k=k):
            args = list(inputs)
            args[k] = t
            return weighted_sum(fn(args), w)

        assert grad_check(f, inputs[k]) < 1e-6, (name, k)


def test_gru_sequence_gradcheck():
    # saturated gates give entries as small as 1e-9, where central differences
    # carry ~1e-10 absolute noise: bound those absolutely, the rest relatively
    rng = np.random.default_rng(zlib.crc32(b"gru_sequence"))
    inputs = [rand(rng, *s) for s in [(5, 9), (3,), (3, 9), (9,)]]
    w = rng.uniform(-1, 1, size=(5, 3))
    for k in range(4):

        def f(t, k=k):
            args = list(inputs)
            args[k] = t
            return weighted_sum(nx.gru_sequence(*args), w)

        a = analytic_gradient(f, inputs[k])
        b = numerical_gradient(f, inputs[k])
        assert np.max(np.abs(a - b)) < 1e-8, k
        big = np.abs(a) > 1e-3
        assert np.max(np.abs(a - b)[big] / np.abs(a[big])) < 1e-6, k


def test_gru_sequence_matches_step():
    rng = np.random.default_rng(11)
    gx, h0, w, b = rng.normal(size=(4, 6)), rng.normal(size=2), rng.normal(size=(2, 6)), rng.normal(size=6)
    hs = nx.gru_sequence(Tensor(gx), Tensor(h0), Tensor(w), Tensor(b)).data
    h = h0
    for t in range(4):
        h = nx.gru_step(gx[t], h, w, b)
        assert np.array_equal(hs[t], h)


def test_shared_subexpression_accumulates():
    x = Tensor(3.0, requires_grad=True)
    (x + x).backward()
    assert x.grad == 2.0
    x.grad = None
    y = x * x
    (y + y).backward()
    assert x.grad == pytest.approx(12.0)


def test_tape_visits_each_node_once():
    x = Tensor(np.ones(2), requires_grad=True)
    y = nx.mul(x, 2.0)
    z = nx.add(y, y)
    tape = nx.Tape.from_output(nx.total(z))
    ids = [id(n) for n in tape.nodes]
    assert len(ids) == len(set(ids)) == 4


# -- Adam ---------------------------------------------------------------------


def test_adam_zero_gradient_leaves_params():
    params = {"w": np.array([1.0, -2.0])}
    new, state = nx.adam_step(params, {"w": np.zeros(2)}, nx.AdamState(), lr=0.1)
    assert np.array_equal(new["w"], params["w"])
    assert state.step == 1


def test_adam_first_step_moves_by_lr_sign():
    params = {"w": np.array([1.0, 1.0])}
    new, _ = nx.adam_step(params, {"w": np.array([3.0, -0.5])}, nx.AdamState(), lr=2e-4)
    assert np.allclose(params["w"] - new["w"], [2e-4, -2e-4], rtol=1e-6)


def test_adam_quadratic_bowl():
    params, state = {"w": np.array(1.0)}, nx.AdamState()
    for _ in range(5000):
        params, state = nx.adam_step(params, {"w": 2 * params["w"]}, state, lr=2e-4)
    assert abs(float(params["w"])) < 0.5


def test_adam_non_finite_gradient_names_parameter():
    with pytest.raises(nx.NonFiniteGradient, match="enc.w"):
        nx.adam_step({"enc.w": np.zeros(2)}, {"enc.w": np.array([np.nan, 0.0])}, nx.AdamState(), lr=1e-3)


# -- grad_check ------------------------------------------------------------------


def test_grad_check_linear_is_exact():
    # dyadic inputs and a power-of-two step keep every difference exact
    x = Tensor(np.random.default_rng(6).integers(-8, 9, size=(3, 3)) / 4.0)
    assert grad_check(nx.total, x, eps=2.0**-20) == 0.0


def test_grad_check_softmax_sum():
    x = Tensor(np.random.default_rng(7).uniform(-2, 2, size=(3, 3)))
    # f is constant, so a wide step carries no truncation error and keeps
    # the rounding noise of f(x+e) - f(x-e) under the 1e-8 denominator floor
    assert grad_check(lambda t: nx.total(nx.softmax_rows(t)), x, eps=0.1) < 1e-6


# -- checkpoint -------------------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    params = {"a.w": np.arange(6.0).reshape(2, 3), "b": np.array([0.1])}
    nx.save_checkpoint(tmp_path / "ck.json", params, {"d": 2})
    loaded, meta = nx.load_checkpoint(tmp_path / "ck.json")
    assert meta == {"d": 2}
    assert all(np.array_equal(loaded[k], params[k]) for k in params)
    doc = json.loads((tmp_path / "ck.json").read_text())
    assert doc["format_version"] == 1
    assert doc["params"]["a.w"]["shape"] == [2, 3]


def test_checkpoint_rejects_unknown_version(tmp_path):
    (tmp_path / "ck.json").write_text(json.dumps({"format_version": 99, "params": {}}))
    with pytest.raises(nx.CheckpointMismatch):
        nx.load_checkpoint(tmp_path / "ck.json")
