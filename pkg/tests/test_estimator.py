import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from shadowgnn.data import desk_schemas
from shadowgnn.estimator import ShadowGNNParser
from shadowgnn.harness.synthetic import synthetic_corpus
from shadowgnn.schema import make_example

SCHEMAS = desk_schemas()
RECORDS = synthetic_corpus(SCHEMAS, 6, seed=1)
X = [(r["question"], SCHEMAS[r["db_id"]]) for r in RECORDS]
Y = [r["query"] for r in RECORDS]
SMALL = dict(d=8, heads=2, bases=2, gpnn_layers=1, rat_layers=1, dropout=0.2, epochs=2, batch_size=3, beam_size=2)


def test_params_roundtrip_and_clone():
    est = ShadowGNNParser(**SMALL)
    params = est.get_params()
    assert params["d"] == 8 and params["lr"] == 2e-4 and params["value_indexes"] is None
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(lr=1e-3)
    assert est.lr == 1e-3 and twin.lr == 2e-4


def test_defaults_match_reference_setup():
    p = ShadowGNNParser().get_params()
    assert (p["d"], p["heads"], p["gpnn_layers"], p["rat_layers"]) == (512, 8, 4, 4)
    assert (p["dropout"], p["lr"], p["batch_size"], p["beam_size"]) == (0.3, 2e-4, 16, 5)


@pytest.mark.parametrize(
    "X_bad, y_bad, exc",
    [
        ([], [], ValueError),
        ("what", ["SELECT 1"], TypeError),
        ([("q", "not a graph")], ["SELECT 1"], TypeError),
        ([("", SCHEMAS["school"])], ["SELECT name FROM student"], ValueError),
        ([("name", SCHEMAS["school"])], [], ValueError),
        ([("name", SCHEMAS["school"])], [3], TypeError),
    ],
)
def test_input_validation(X_bad, y_bad, exc):
    with pytest.raises(exc):
        ShadowGNNParser(**SMALL).fit(X_bad, y_bad)


@pytest.mark.parametrize("bad", [dict(batch_size=0), dict(beam_size=0), dict(lr=-1.0), dict(d=7), dict(epochs=1.5)])
def test_parameter_validation(bad):
    with pytest.raises(ValueError):
        ShadowGNNParser(**{**SMALL, **bad}).fit(X, Y)


def test_unfitted_predict_raises():
    with pytest.raises(NotFittedError):
        ShadowGNNParser(**SMALL).predict(X)


def test_unsupported_training_sql_is_skipped():
    y = list(Y)
    y[0] = "SELECT name FROM student UNION ALL SELECT name FROM student"
    X0 = list(X)
    X0[0] = ("names", SCHEMAS["school"])
    est = ShadowGNNParser(**SMALL).fit(X0, y)
    assert [i for i, _ in est.skipped_] == [0]
    with pytest.raises(ValueError):
        ShadowGNNParser(**SMALL).fit(X0[:1], y[:1])


def test_fit_predict_score_and_checkpoint(tmp_path):
    est = ShadowGNNParser(**SMALL).fit(X, Y)
    assert est.n_steps_ == len(est.loss_log_) == 4
    assert len(est.history_) == 2
    preds = est.predict(X)
    assert len(preds) == len(X)
    assert all(p is None or isinstance(p, str) for p in preds)
    assert 0.0 <= est.score(X, Y) <= 1.0
    est.save(tmp_path / "m.json")
    again = ShadowGNNParser.load(tmp_path / "m.json")
    assert again.predict(X) == preds
    for (name, a), (_, b) in zip(est.model_.named_parameters(), again.model_.named_parameters()):
        np.testing.assert_array_equal(a.data, b.data, err_msg=name)


def test_seeded_fits_are_bit_identical():
    a = ShadowGNNParser(**SMALL, seed=5).fit(X, Y)
    b = ShadowGNNParser(**SMALL, seed=5).fit(X, Y)
    c = ShadowGNNParser(**SMALL, seed=6).fit(X, Y)
    assert a.loss_log_ == b.loss_log_
    assert a.loss_log_ != c.loss_log_


def test_dev_set_keeps_best_epoch():
    est = ShadowGNNParser(**{**SMALL, "epochs": 3}).fit(X, Y, X[:2], Y[:2])
    assert all("dev_em" in r for r in est.history_)


def test_encode_exposes_abstract_question():
    est = ShadowGNNParser(**SMALL).fit(X, Y)
    out = est.encode("how many students", SCHEMAS["school"])
    assert out.q_abstract.shape == (3, 8)
    assert out.f.shape == (3 + SCHEMAS["school"].num_nodes, 8)


def test_make_example_tokens_feed_estimator():
    ex = make_example(RECORDS[0], SCHEMAS)
    est = ShadowGNNParser(**SMALL).fit([(ex.question_tokens, SCHEMAS[ex.db_id])], [ex.query])
    assert est.n_steps_ == SMALL["epochs"]
    assert len(est.predict([(ex.question_tokens, SCHEMAS[ex.db_id])])) == 1
