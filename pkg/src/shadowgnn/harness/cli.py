"""Command line entry point: ``shadowgnn <command> [--config PATH] [--set key=value ...]``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence, TextIO

import numpy as np

from ..estimator import ShadowGNNParser
from ..grammar import roundtrip
from ..schema.graph import SchemaGraph
from ..validation import check_fraction, check_question
from .config import RunConfig
from .run import evaluate_checkpoint, load_schemas, train


def _config(args) -> RunConfig:
    return RunConfig.load(args.config, args.set or ())


def _emit(obj) -> None:
    print(json.dumps(obj, indent=1, default=float))


def cmd_train(args) -> int:
    _, summary = train(_config(args), verbose=args.verbose)
    _emit(summary)
    return 0


def cmd_eval(args) -> int:
    report = evaluate_checkpoint(_config(args), args.checkpoint, oracle=args.oracle)
    _emit(report.to_dict())
    return 0


def transpile_stream(
    lines: Sequence[str], schemas: dict[str, SchemaGraph], db: Optional[str], out: TextIO, err: TextIO
) -> int:
    """Roundtrip each line; lines are ``SQL`` (with ``db``) or ``db_id<TAB>SQL``."""
    status = 0
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        db_id, sql = (db, line) if db is not None else line.split("\t", 1) if "\t" in line else (None, line)
        try:
            if db_id not in schemas:
                raise ValueError(f"unknown db_id {db_id!r}")
            out.write(roundtrip(sql, schemas[db_id]) + "\n")
        except ValueError as exc:
            status = 1
            err.write(json.dumps({"line": lineno, "error": type(exc).__name__, "message": str(exc)}) + "\n")
    return status


def cmd_transpile(args) -> int:
    schemas = load_schemas(_config(args))
    return transpile_stream(sys.stdin, schemas, args.db, sys.stdout, sys.stderr)


def cosine_grid(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ValueError(f"questions have different lengths: {a.shape[0]} vs {b.shape[0]} tokens")
    na = a / np.maximum(np.linalg.norm(a, axis=1, keepdims=True), 1e-12)
    nb = b / np.maximum(np.linalg.norm(b, axis=1, keepdims=True), 1e-12)
    return na @ nb.T


def abstraction_grid(est: ShadowGNNParser, graph: SchemaGraph, question_a, question_b) -> tuple[list, list, np.ndarray]:
    """Tokens of both questions and the cosine grid between their final projection-layer question states."""
    ta, tb = check_question(question_a), check_question(question_b)
    if len(ta) != len(tb):
        raise ValueError(f"questions have different lengths: {len(ta)} vs {len(tb)} tokens")
    qa = est.encode(ta, graph).q_abstract.data
    qb = est.encode(tb, graph).q_abstract.data
    return list(ta), list(tb), cosine_grid(qa, qb)


def cmd_diagnose(args) -> int:
    config = _config(args)
    schemas = load_schemas(config)
    if args.db not in schemas:
        raise ValueError(f"unknown db_id {args.db!r}")
    est = ShadowGNNParser.load(args.checkpoint or config.checkpoint, expect=config.to_dict())
    ta, tb, grid = abstraction_grid(est, schemas[args.db], args.question_a, args.question_b)
    writer = csv.writer(sys.stdout)
    writer.writerow([""] + tb)
    for tok, row in zip(ta, grid):
        writer.writerow([tok] + [f"{v:.6f}" for v in row])
    return 0


def subsample(records: list, fraction: float, seed: int) -> list:
    """``round(fraction * n)`` records (at least one), order preserved."""
    fraction = check_fraction(fraction)
    n = len(records)
    if fraction == 1.0:
        return list(records)
    k = max(1, int(fraction * n + 0.5))
    keep = np.sort(np.random.default_rng(seed).choice(n, size=k, replace=False))
    return [records[i] for i in keep]


def cmd_subsample(args) -> int:
    config = _config(args)
    source = args.input or config.train
    if source is None:
        raise ValueError("subsample needs --input or a config with 'train'")
    records = json.loads(Path(source).read_text())
    subset = subsample(records, args.fraction, config.seed if args.seed is None else args.seed)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    Path(args.output).write_text(json.dumps(subset, indent=1))
    _emit({"input": len(records), "output": len(subset), "path": args.output})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shadowgnn", description="Desk-scale ShadowGNN text-to-SQL toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        p.set_defaults(func=func)
        return p

    p = add("train", cmd_train, "train a model and write a checkpoint")
    p.add_argument("--verbose", action="store_true")
    p = add("eval", cmd_eval, "evaluate a checkpoint on the dev corpus")
    p.add_argument("--checkpoint")
    p.add_argument("--oracle", action="store_true", help="score gold trees instead of model output")
    p = add("transpile", cmd_transpile, "SQL -> SemQL -> SQL on stdin lines")
    p.add_argument("--db", help="db_id for every line (otherwise lines are db_id<TAB>SQL)")
    p = add("diagnose-abstraction", cmd_diagnose, "cosine grid between two questions' abstract states")
    p.add_argument("--checkpoint")
    p.add_argument("--db", required=True)
    p.add_argument("--question-a", required=True)
    p.add_argument("--question-b", required=True)
    p = add("subsample", cmd_subsample, "write a reproducible random subset of a training file")
    p.add_argument("--input")
    p.add_argument("--output", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
