"""Training and evaluation orchestration behind the CLI."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from ..data import desk_schemas
from ..estimator import ShadowGNNParser
from ..grammar import ast_to_sql, recover_rate, sql_to_ast, unflatten
from ..schema import load_examples, load_tables, load_value_index, make_example
from ..schema.graph import SchemaGraph
from .config import RunConfig
from .metrics import EvalReport, Scored, build_report
from .synthetic import synthetic_corpus


@dataclass
class Corpus:
    questions: list
    sqls: list
    graphs: list

    @property
    def pairs(self) -> list:
        return list(zip(self.questions, self.graphs))

    def __len__(self) -> int:
        return len(self.sqls)


def load_schemas(config: RunConfig) -> dict[str, SchemaGraph]:
    if config.tables is None:
        return desk_schemas()
    return {g.db_id: g for g in load_tables(config.tables)}


def value_indexes(config: RunConfig, schemas: dict[str, SchemaGraph]) -> Optional[dict]:
    """Per-database cell values from ``<values>/<db_id>/<table>.csv``."""
    if config.values is None:
        return None
    root = Path(config.values)
    return {db: load_value_index(root / db, g) for db, g in schemas.items() if (root / db).is_dir()}


def _corpus(examples, schemas) -> Corpus:
    return Corpus(
        questions=[ex.question_tokens for ex in examples],
        sqls=[ex.query for ex in examples],
        graphs=[schemas[ex.db_id] for ex in examples],
    )


def synthetic_examples(config: RunConfig, schemas: dict[str, SchemaGraph]) -> Corpus:
    records = synthetic_corpus(schemas, config.synthetic, config.seed)
    return _corpus([make_example(r, schemas) for r in records], schemas)


def load_corpus(config: RunConfig, split: str, schemas: dict[str, SchemaGraph]) -> Corpus:
    path = getattr(config, split)
    if path is None:
        if config.synthetic:
            return synthetic_examples(config, schemas)
        raise ValueError(f"config has no {split!r} path and synthetic=0")
    return _corpus(load_examples(path, schemas), schemas)


def make_estimator(config: RunConfig, schemas: dict[str, SchemaGraph]) -> ShadowGNNParser:
    return ShadowGNNParser(**config.estimator_params(), value_indexes=value_indexes(config, schemas))


def train(config: RunConfig, verbose: bool = False) -> tuple[ShadowGNNParser, dict]:
    """Fit, save the checkpoint and loss log, return the estimator and a summary."""
    schemas = load_schemas(config)
    train_set = load_corpus(config, "train", schemas)
    dev = load_corpus(config, "dev", schemas) if config.dev else None
    est = make_estimator(config, schemas)
    est.set_params(verbose=verbose)
    if dev is not None:
        est.fit(train_set.pairs, train_set.sqls, dev.pairs, dev.sqls)
    else:
        est.fit(train_set.pairs, train_set.sqls)
    if config.checkpoint:
        est.save(config.checkpoint)
    if config.log_dir:
        log = Path(config.log_dir)
        log.mkdir(parents=True, exist_ok=True)
        (log / "loss_log.json").write_text(json.dumps(est.loss_log_))
        (log / "history.json").write_text(json.dumps(est.history_, indent=1))
        (log / "config.json").write_text(json.dumps(config.to_dict(), indent=1))
    summary = {
        "examples": len(train_set),
        "skipped": len(est.skipped_),
        "steps": est.n_steps_,
        "epochs": len(est.history_),
        "seconds": est.train_seconds_,
        "initial_loss": est.loss_log_[0] if est.loss_log_ else None,
        "final_loss": est.loss_log_[-1] if est.loss_log_ else None,
        "history": est.history_[-1] if est.history_ else None,
    }
    return est, summary


def _gold_tree(sql: str, graph: SchemaGraph):
    try:
        return sql_to_ast(sql, graph)
    except ValueError:
        return None


def evaluate(est: Optional[ShadowGNNParser], corpus: Corpus, oracle: bool = False) -> EvalReport:
    """Score decoded SQL against gold; ``oracle`` pipes the gold trees through instead."""
    if len(corpus) == 0:
        raise ValueError("cannot evaluate an empty corpus")
    items = []
    gold_trees = [_gold_tree(sql, g) for sql, g in zip(corpus.sqls, corpus.graphs)]
    if oracle:
        pred_trees = gold_trees
    else:
        if est is None:
            raise ValueError("evaluation needs a model unless oracle=True")
        pred_trees = []
        for actions, g in zip(est.decode(corpus.pairs), corpus.graphs):
            try:
                pred_trees.append(unflatten(actions, g))
            except ValueError:
                pred_trees.append(None)
    for sql, g, gold, pred in zip(corpus.sqls, corpus.graphs, gold_trees, pred_trees):
        pred_sql = None
        if pred is not None:
            try:
                pred_sql = ast_to_sql(pred, g)
            except ValueError:
                pred_sql = None
        items.append(Scored(sql, pred_sql, g, gold, pred))
    rate = recover_rate(zip(corpus.sqls, corpus.graphs))
    return build_report(items, recover_rate=rate)


def evaluate_checkpoint(config: RunConfig, checkpoint: Optional[str] = None, oracle: bool = False) -> EvalReport:
    schemas = load_schemas(config)
    corpus = load_corpus(config, "dev", schemas)
    est = None
    if not oracle:
        est = ShadowGNNParser.load(checkpoint or config.checkpoint, expect=config.to_dict())
        est.set_params(beam_size=config.beam_size, value_indexes=value_indexes(config, schemas))
    return evaluate(est, corpus, oracle)
