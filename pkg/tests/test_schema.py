import json

import numpy as np
import pytest
from linking_cases import CASES, expected_matrix

from shadowgnn.data import desk_schemas, desk_tables_path
from shadowgnn.schema import (
    EdgeLabel,
    LinkTag,
    Rel,
    SchemaError,
    build_relation_matrix,
    check_reverse_edges,
    graph_from_dict,
    graph_to_dict,
    load_examples,
    load_tables,
    load_value_index,
    tag_linking,
    tokenize_question,
    value_index_from_rows,
)


def _db(**over):
    entry = {
        "db_id": "tiny",
        "table_names_original": ["team"],
        "column_names_original": [[-1, "*"], [0, "name"]],
        "column_types": ["text", "text"],
        "primary_keys": [1],
        "foreign_keys": [],
    }
    entry.update(over)
    return entry


def test_smallest_schema_nodes_and_edges():
    g = graph_from_dict(_db())
    assert g.num_nodes == 3
    labels = {(s, EdgeLabel(l), d) for s, l, d in g.edges}
    name = g.column_node(1)
    assert labels == {
        (name, EdgeLabel.BELONGS_TO, 0),
        (0, EdgeLabel.HAS_COLUMN, name),
        (name, EdgeLabel.PRIMARY_KEY, 0),
        (0, EdgeLabel.PRIMARY_KEY_OF, name),
    }
    assert g.column_tables[0] is None


def test_two_word_table_name():
    g = desk_schemas()["soccer"]
    t = g.table_names_original.index("match_season")
    assert g.node_tokens(t) == ("match", "season")
    assert g.node_tokens(g.table_names_original.index("team")) == ("team",)


def test_foreign_key_reverse_edges():
    entry = _db(
        table_names_original=["a", "b"],
        column_names_original=[[-1, "*"], [0, "x"], [0, "y"], [0, "z"], [1, "u"], [1, "v"], [1, "w"], [1, "k"]],
        column_types=["text"] * 8,
        primary_keys=[],
        foreign_keys=[[3, 7]],
    )
    g = graph_from_dict(entry)
    s, d = g.column_node(3), g.column_node(7)
    assert (s, int(EdgeLabel.FOREIGN_KEY_FORWARD), d) in g.edges
    assert (d, int(EdgeLabel.FOREIGN_KEY_BACKWARD), s) in g.edges
    assert check_reverse_edges(g)


@pytest.mark.parametrize(
    "over, needle",
    [
        ({"foreign_keys": [[1, 9]]}, "dangling foreign-key"),
        ({"column_names_original": [[-1, "*"], [4, "name"]]}, "out of range"),
        ({"primary_keys": [7]}, "dangling primary-key"),
    ],
)
def test_schema_errors_name_the_database(over, needle):
    with pytest.raises(SchemaError, match=needle) as info:
        graph_from_dict(_db(**over))
    assert "tiny" in str(info.value)


def test_missing_field():
    entry = _db()
    del entry["column_types"]
    with pytest.raises(SchemaError, match="column_types"):
        graph_from_dict(entry)


def test_load_tables_and_roundtrip(tmp_path):
    graphs = load_tables(desk_tables_path())
    assert [g.db_id for g in graphs] == ["soccer", "concert_singer", "school"]
    assert all(check_reverse_edges(g) for g in graphs)
    path = tmp_path / "tables.json"
    path.write_text(json.dumps([graph_to_dict(g) for g in graphs]))
    assert load_tables(path) == graphs


def test_tokenize_question():
    assert tokenize_question("How many games has each season?") == ["how", "many", "games", "has", "each", "season", "?"]
    assert tokenize_question("total_wl > 2.5") == ["total", "wl", ">", "2.5"]


# -- linking ----------------------------------------------------------------


def _tag(g, question, values=None):
    toks = tokenize_question(question)
    return toks, tag_linking(toks, g, value_index_from_rows(g, values) if values else None)


def test_exact_and_partial():
    g = desk_schemas()["soccer"]
    toks, tags = _tag(g, "the name of the season")
    name = next(j for j in range(g.num_nodes) if g.node_label(j) == "team.name")
    assert tags[toks.index("name"), name] == LinkTag.COLUMN_EXACT
    ms = g.table_names_original.index("match_season")
    assert tags[toks.index("season"), ms] == LinkTag.TABLE_PARTIAL


def test_value_exact_matches_brute_force():
    g = desk_schemas()["soccer"]
    values = {"match_season.year": ["2007", "2010"], "team.country": ["Spain"]}
    toks, tags = _tag(g, "How many games has each season in 2007?", values)
    index = value_index_from_rows(g, values)
    for node, vals in index.items():
        for i, tok in enumerate(toks):
            hit = (tok,) in vals
            assert (tags[i, node] == LinkTag.COLUMN_VALUE_EXACT) == hit


def test_value_index_from_csv(tmp_path):
    g = desk_schemas()["soccer"]
    (tmp_path / "match_season.csv").write_text("season_id,year,college\n1,2007,UCLA\n2,2010,\n")
    index = load_value_index(tmp_path, g)
    year = next(j for j in range(g.num_nodes) if g.node_label(j) == "match_season.year")
    assert index[year] == [("2007",), ("2010",)]
    toks = tokenize_question("players from 2007")
    assert tag_linking(toks, g, index)[2, year] == LinkTag.COLUMN_VALUE_EXACT


def test_empty_question_rejected():
    with pytest.raises(ValueError):
        tag_linking([], desk_schemas()["school"])


def test_full_name_yields_exact_cell():
    for g in desk_schemas().values():
        for j in range(g.num_nodes):
            if j == g.star_node:
                continue
            toks = ["show"] + list(g.node_tokens(j)) + ["please"]
            tags = tag_linking(toks, g)
            assert {LinkTag.TABLE_EXACT, LinkTag.COLUMN_EXACT} & set(tags[:, j].tolist())


def test_star_never_linked():
    g = desk_schemas()["school"]
    _, tags = _tag(g, "count * of all rows")
    assert (tags[:, g.star_node] == LinkTag.NO_MATCH).all()


def _label(g, j):
    return g.table_names_original[j] if g.is_table(j) else g.node_label(j)


def test_linking_ignores_renaming_and_reordering():
    base = desk_schemas()["school"]
    entry = graph_to_dict(base)
    toks = tokenize_question("title and credits of each course")
    before = {_label(base, j): base_col for j, base_col in enumerate(tag_linking(toks, base).T)}

    entry["db_id"] = "renamed"
    assert (tag_linking(toks, graph_from_dict(entry)) == tag_linking(toks, base)).all()

    # reverse the table order and regroup columns to match
    order = [2, 1, 0]
    new_pos = {old: new for new, old in enumerate(order)}
    old_cols = entry["column_names_original"]
    perm = [0] + sorted(range(1, len(old_cols)), key=lambda c: new_pos[old_cols[c][0]])
    reordered = graph_from_dict({
        "db_id": "reordered",
        "table_names_original": [entry["table_names_original"][t] for t in order],
        "column_names_original": [[-1, "*"]] + [[new_pos[old_cols[c][0]], old_cols[c][1]] for c in perm[1:]],
        "column_types": [entry["column_types"][c] for c in perm],
        "primary_keys": [perm.index(c) for c in entry["primary_keys"]],
        "foreign_keys": [[perm.index(a), perm.index(b)] for a, b in entry["foreign_keys"]],
    })
    after = tag_linking(toks, reordered)
    for j in range(reordered.num_nodes):
        np.testing.assert_array_equal(after[:, j], before[_label(reordered, j)])


@pytest.mark.parametrize("case", CASES, ids=[c[1] for c in CASES])
def test_hand_labelled_linking(case):
    db, question, values, cells = case
    g = desk_schemas()[db]
    toks, tags = _tag(g, question, values)
    np.testing.assert_array_equal(tags, expected_matrix(g, toks, cells))


# -- relations ----------------------------------------------------------------


def test_relation_matrix_one_by_one():
    g = graph_from_dict(_db(table_names_original=["t"], column_names_original=[[-1, "*"]], column_types=["text"], primary_keys=[]))
    # only the table and the star column; restrict to a 1-node view via the table row
    link = np.array([[int(LinkTag.TABLE_EXACT), int(LinkTag.NO_MATCH)]])
    r = build_relation_matrix(["t"], g, link)
    assert r[0, 0] == Rel.QQ_DIST_0
    assert r[0, 1] == Rel.LINK_TABLE_EXACT and r[1, 0] == Rel.LINK_TABLE_EXACT
    assert r[1, 1] == Rel.SELF_TABLE and r[2, 2] == Rel.SELF_COLUMN


def test_question_distances():
    g = desk_schemas()["school"]
    toks = ["a", "b", "c", "d"]
    r = build_relation_matrix(toks, g, tag_linking(toks, g))
    assert r[0, 1] == Rel.QQ_DIST_P1 and r[1, 0] == Rel.QQ_DIST_M1
    assert r[0, 3] == Rel.QQ_DIST_P2 and r[3, 0] == Rel.QQ_DIST_M2


def test_table_column_pair_mirrored():
    g = desk_schemas()["school"]
    toks = ["x"]
    r = build_relation_matrix(toks, g, tag_linking(toks, g))
    t = g.table_names_original.index("student")
    age = next(j for j in range(g.num_nodes) if g.node_label(j) == "student.age")
    assert r[1 + t, 1 + age] == Rel.HAS_COLUMN and r[1 + age, 1 + t] == Rel.BELONGS_TO
    stu_id = next(j for j in range(g.num_nodes) if g.node_label(j) == "student.stu_id")
    assert r[1 + t, 1 + stu_id] == Rel.PRIMARY_KEY_OF and r[1 + stu_id, 1 + t] == Rel.PRIMARY_KEY


def test_relation_matrix_valid_and_diagonal():
    for g in desk_schemas().values():
        toks = tokenize_question("name of each student in the stadium season")
        r = build_relation_matrix(toks, g, tag_linking(toks, g))
        assert ((0 <= r) & (r < 24)).all()
        assert set(np.diag(r)) <= {Rel.QQ_DIST_0, Rel.SELF_TABLE, Rel.SELF_COLUMN}


@pytest.mark.parametrize("case", CASES[:10], ids=[c[1] for c in CASES[:10]])
def test_link_block_bijection(case):
    db, question, values, _ = case
    g = desk_schemas()[db]
    toks, tags = _tag(g, question, values)
    r = build_relation_matrix(toks, g, tags)
    n = len(toks)
    block = r[:n, n:]
    assert set(np.unique(block)) <= set(range(7))
    np.testing.assert_array_equal(block, tags)
    np.testing.assert_array_equal(r[n:, :n], tags.T)


def test_relation_shape_mismatch():
    g = desk_schemas()["school"]
    with pytest.raises(ValueError):
        build_relation_matrix(["a"], g, np.zeros((2, g.num_nodes), dtype=int))


# -- examples ----------------------------------------------------------------


def test_load_examples(tmp_path):
    schemas = desk_schemas()
    path = tmp_path / "train.json"
    path.write_text(json.dumps([{"db_id": "school", "question": "List student names.", "query": "SELECT name FROM student"}]))
    (ex,) = load_examples(path, schemas)
    assert list(ex.question_tokens) == ["list", "student", "names", "."]
    assert ex.db_id == "school"


def test_load_examples_empty(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("[]")
    assert load_examples(path, desk_schemas()) == []


def test_unknown_db_lists_known(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps([{"db_id": "nope", "question": "q", "query": "SELECT 1"}]))
    with pytest.raises(SchemaError) as info:
        load_examples(path, desk_schemas())
    assert "school" in str(info.value) and "nope" in str(info.value)
