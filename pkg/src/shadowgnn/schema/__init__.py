"""Schema graphs, Spider ingestion, schema linking and relation matrices."""
from .examples import TrainExample, load_examples, make_example
from .graph import (
    COLUMN,
    NUM_EDGE_LABELS,
    TABLE,
    EdgeLabel,
    SchemaError,
    SchemaGraph,
    check_reverse_edges,
    graph_from_dict,
    graph_to_dict,
    load_tables,
    normalize_name,
    tokenize_question,
)
from .linking import NUM_LINK_TAGS, PRIORITY, LinkTag, load_value_index, tag_linking, value_index_from_rows
from .relations import (
    LINK_RELATIONS,
    NUM_RELATIONS,
    SELF_LOOP_RELATIONS,
    Rel,
    build_relation_matrix,
    question_distance_relation,
    schema_relations,
)

__all__ = [name for name in dir() if not name.startswith("_")]
