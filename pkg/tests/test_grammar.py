import pytest

from shadowgnn.data import desk_schemas, golden_corpus
from shadowgnn.grammar import (
    RULES,
    ApplyRule,
    BindError,
    ColumnRef,
    Cursor,
    EmitLiteral,
    GrammarViolation,
    IncompleteSequence,
    SelectColumn,
    SelectTable,
    SqlSyntaxError,
    UnsupportedSql,
    ast_to_sql,
    canonicalize,
    equivalent,
    flatten,
    lex,
    min_lengths,
    recover_rate,
    rule_id,
    rules_for,
    sql_to_ast,
    unflatten,
)
from shadowgnn.grammar.rules import NONTERMINALS, TERMINAL_SLOTS

SCHEMAS = desk_schemas()
CORPUS = golden_corpus()


def _soccer(sql):
    return sql_to_ast(sql, SCHEMAS["soccer"])


def test_production_table_shape():
    assert len(RULES) == 59
    assert [r.id for r in RULES] == list(range(59))
    for r in RULES:
        for child in r.children:
            assert child in NONTERMINALS or child in TERMINAL_SLOTS
    lengths = min_lengths()
    assert all(lengths[h] >= 1 for h in NONTERMINALS)
    assert lengths["Agg"] == 1 and lengths["C"] == 1


def test_minimal_query_tree():
    g = SCHEMAS["soccer"]
    tree = _soccer("SELECT name FROM team")
    query = tree.children[0]
    select, from_, where, group, order = query.children
    assert select.name == "select"
    operand = select.children[0].children[0]
    assert operand.children[0].name == "none"
    col = operand.children[1].children[0].children[1]
    assert col == ColumnRef(g.column_node(g.column_names_original.index("name")))
    assert from_.children[0].children[0].node == g.table_names_original.index("team")
    assert (where.name, group.name, order.name) == ("none", "none", "none")


def test_group_by_having_tree():
    tree = _soccer("SELECT count(*) FROM match_season GROUP BY team HAVING count(*) > 3")
    group = tree.children[0].children[3]
    assert group.name == "group_by_having"
    having = group.children[1]
    assert having.name == "gt"
    operand, value = having.children
    assert operand.children[0].name == "count"
    assert value.children[0].text == "3"


def test_order_desc_limit_tree():
    order = _soccer("SELECT player FROM match_season ORDER BY year DESC LIMIT 1").children[0].children[4]
    assert order.name == "desc_limit"
    assert order.children[1].text == "1"


def test_group_columns_are_explicit():
    tree = _soccer("SELECT team, count(*) FROM player GROUP BY team")
    group = tree.children[0].children[3]
    assert group.name == "group_by"
    assert isinstance(group.children[0].children[0], ColumnRef)


def test_no_where_emitted_without_filter():
    g = SCHEMAS["soccer"]
    assert "WHERE" not in ast_to_sql(_soccer("SELECT name FROM team"), g)


def test_intersect_emits_two_statements():
    g = SCHEMAS["soccer"]
    sql = ast_to_sql(_soccer("SELECT country FROM team INTERSECT SELECT country FROM team WHERE name = 'x'"), g)
    left, right = sql.split(" INTERSECT ")
    assert left.startswith("SELECT") and right.startswith("SELECT")


def test_joins_come_from_foreign_keys():
    g = SCHEMAS["soccer"]
    sql = ast_to_sql(_soccer("SELECT T1.name FROM team AS T1, match_season AS T2 WHERE T2.year = 2000"), g)
    assert "JOIN match_season AS T2 ON T1.team_id = T2.team" in sql


# -- golden corpus ------------------------------------------------------------


def test_corpus_size():
    assert len(CORPUS) >= 60


def test_recover_rate_golden():
    assert recover_rate(CORPUS) == 1.0


def test_every_rule_covered():
    used = set()
    for sql, g in CORPUS:
        used |= {node.rule for node in sql_to_ast(sql, g).walk()}
    missing = [str(r) for r in RULES if r.id not in used]
    assert not missing, missing


@pytest.mark.parametrize("sql, g", CORPUS, ids=[s for s, _ in CORPUS])
def test_golden_roundtrip(sql, g):
    tree = sql_to_ast(sql, g)
    actions = flatten(tree)
    assert unflatten(actions, g) == tree
    emitted = ast_to_sql(tree, g)
    assert sql_to_ast(emitted, g) == tree
    assert ast_to_sql(sql_to_ast(emitted, g), g) == emitted
    assert equivalent(sql, emitted, g)


def test_recover_rate_unsupported_only():
    g = SCHEMAS["soccer"]
    assert recover_rate([("SELECT name FROM team WHERE name IS NULL", g)]) == 0.0


def test_recover_rate_empty_corpus():
    with pytest.raises(ValueError):
        recover_rate([])


@pytest.mark.parametrize(
    "sql",
    [
        "SELECT name FROM team WHERE country IS NULL",
        "SELECT name FROM team LEFT JOIN player ON team.team_id = player.team",
        "SELECT name FROM team AS a JOIN team AS b ON a.team_id = b.team_id",
        "SELECT name FROM team UNION ALL SELECT player FROM player",
        "SELECT CASE WHEN country = 'x' THEN 1 END FROM team",
        "SELECT name FROM team WHERE EXISTS (SELECT * FROM player)",
        "SELECT name FROM team ORDER BY name ASC, country DESC",
        "SELECT name FROM team WHERE NOT country = 'x'",
        "SELECT 1",
    ],
)
def test_unsupported(sql):
    with pytest.raises(UnsupportedSql):
        _soccer(sql)


@pytest.mark.parametrize(
    "sql", ["SELECT nope FROM team", "SELECT name FROM nowhere", "SELECT x.name FROM team"]
)
def test_bind_errors(sql):
    with pytest.raises(BindError):
        _soccer(sql)


def test_case_insensitive_identifiers():
    assert _soccer("select NAME from TEAM") == _soccer("SELECT name FROM team")


# -- actions ----------------------------------------------------------------


def test_empty_sequence():
    with pytest.raises(IncompleteSequence):
        unflatten([])


def test_truncated_sequence():
    actions = flatten(_soccer("SELECT name FROM team"))
    with pytest.raises(IncompleteSequence):
        unflatten(actions[:-1])


def test_trailing_actions():
    actions = flatten(_soccer("SELECT name FROM team"))
    with pytest.raises(GrammarViolation):
        unflatten(actions + [ApplyRule(rule_id("Agg", "none"))])


def test_sibling_swap_violates_grammar():
    actions = flatten(_soccer("SELECT name FROM team"))
    where = actions.index(ApplyRule(rule_id("Where", "none")))
    assert actions[where + 1] == ApplyRule(rule_id("Group", "none"))
    actions[where], actions[where + 1] = actions[where + 1], actions[where]
    with pytest.raises(GrammarViolation):
        unflatten(actions)


def test_wrong_node_type_with_graph():
    g = SCHEMAS["soccer"]
    actions = flatten(_soccer("SELECT name FROM team"))
    i = next(k for k, a in enumerate(actions) if isinstance(a, SelectTable))
    actions[i] = SelectTable(g.num_tables)
    with pytest.raises(GrammarViolation):
        unflatten(actions, g)


def test_flatten_is_preorder():
    actions = flatten(_soccer("SELECT name FROM team"))
    names = [str(a) for a in actions]
    assert names[:3] == ["Statement.single", "Query.query", "Select.select"]
    assert isinstance(actions[9], SelectColumn)
    assert names[-3:] == ["Where.none", "Group.none", "Order.none"]


def test_cursor_matches_production_table():
    for sql, g in CORPUS[:20]:
        cursor = Cursor()
        for action in flatten(sql_to_ast(sql, g)):
            slot = cursor.expected
            if isinstance(action, ApplyRule):
                assert cursor.legal_rules() == [r.id for r in rules_for(slot)]
            else:
                assert cursor.legal_rules() == []
            cursor.advance(action)
        assert cursor.done


def test_cursor_budget_masking():
    cursor = Cursor()
    need = min_lengths()["Statement"]
    assert cursor.legal_rules(max_length=need) == [rule_id("Statement", "single")]
    assert cursor.legal_rules(max_length=need - 1) == []
    assert len(cursor.legal_rules(max_length=128)) == 4


def test_cursor_rejects_illegal():
    with pytest.raises(GrammarViolation):
        Cursor().advance(EmitLiteral("x"))


# -- canonical form ------------------------------------------------------------


def test_alias_and_order_insensitive():
    g = SCHEMAS["soccer"]
    a = "SELECT T1.name FROM team AS T1 JOIN player AS T2 ON T1.team_id = T2.team WHERE T2.player = 'a' AND T1.country = 'b'"
    b = "select team.name from player join team on player.team = team.team_id where country = \"b\" and player.player = 'a'"
    assert canonicalize(a, g) == canonicalize(b, g)


def test_values_masked_or_kept():
    g = SCHEMAS["soccer"]
    a, b = "SELECT name FROM team WHERE country = 'x'", "SELECT name FROM team WHERE country = 'y'"
    assert not equivalent(a, b, g)
    assert equivalent(a, b, g, keep_values=False)


def test_between_not_split():
    g = SCHEMAS["soccer"]
    text = canonicalize("SELECT player FROM match_season WHERE year BETWEEN 1 AND 2 AND season = 3", g)
    assert "between 1 and 2" in text


def test_or_blocks_sorting():
    g = SCHEMAS["soccer"]
    a = "SELECT name FROM team WHERE country = 'a' OR name = 'b' AND team_id = 1"
    b = "SELECT name FROM team WHERE name = 'b' AND team_id = 1 OR country = 'a'"
    assert not equivalent(a, b, g)


def test_canonical_rejects_unbalanced():
    with pytest.raises(SqlSyntaxError):
        canonicalize("SELECT name FROM (team", SCHEMAS["soccer"])


def test_lexer():
    toks = lex("SELECT a <> 'it''s' , `b c`;")
    assert [t.kind for t in toks] == ["id", "id", "op", "str", "op", "id"]
    assert toks[-1].text == "b c"
    with pytest.raises(SqlSyntaxError):
        lex("SELECT #")
