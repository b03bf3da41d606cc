"""Scikit-learn style text-to-SQL estimator."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .decoder import Teacher, teacher
from .encoder import EncoderConfig, EncoderInput, EncoderOutput, Vocabulary, prepare_input
from .grammar import ast_to_sql, flatten, sql_to_ast, unflatten
from .harness.metrics import exact_match
from .model import ShadowGNN
from .numerics import Adam, CheckpointMismatch, load_checkpoint, save_checkpoint
from .schema.graph import SchemaGraph
from .validation import check_pairs, check_positive_int, check_targets

_DIM_KEYS = ("d", "heads", "bases", "gpnn_layers", "rat_layers", "hash_buckets")


@dataclass
class _Item:
    inp: EncoderInput
    gold: Optional[Teacher]
    sql: Optional[str]


class ShadowGNNParser(BaseEstimator):
    """Question + schema -> SQL.

    ``X`` is a sequence of ``(question, SchemaGraph)`` pairs and ``y`` the
    gold SQL strings.  Training examples whose SQL falls outside the grammar
    are skipped and listed in ``skipped_``.
    """

    def __init__(
        self,
        d: int = 512,
        heads: int = 8,
        bases: int = 8,
        gpnn_layers: int = 4,
        rat_layers: int = 4,
        dropout: float = 0.3,
        scaled: bool = False,
        hash_buckets: int = 512,
        lr: float = 2e-4,
        batch_size: int = 16,
        epochs: int = 30,
        beam_size: int = 5,
        seed: int = 0,
        time_limit: Optional[float] = None,
        target_train_em: Optional[float] = None,
        eval_every: int = 1,
        value_indexes: Optional[dict] = None,
        verbose: bool = False,
    ):
        self.d = d
        self.heads = heads
        self.bases = bases
        self.gpnn_layers = gpnn_layers
        self.rat_layers = rat_layers
        self.dropout = dropout
        self.scaled = scaled
        self.hash_buckets = hash_buckets
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.beam_size = beam_size
        self.seed = seed
        self.time_limit = time_limit
        self.target_train_em = target_train_em
        self.eval_every = eval_every
        self.value_indexes = value_indexes
        self.verbose = verbose

    # -- helpers --------------------------------------------------------------
    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            d=self.d, heads=self.heads, bases=self.bases, gpnn_layers=self.gpnn_layers,
            rat_layers=self.rat_layers, dropout=self.dropout, scaled=self.scaled,
            hash_buckets=self.hash_buckets,
        )

    def _input(self, tokens, graph: SchemaGraph) -> EncoderInput:
        values = (self.value_indexes or {}).get(graph.db_id)
        return prepare_input(tokens, graph, self.vocab_, values)

    def _items(self, pairs, y=None, skip_unsupported: bool = False) -> list[_Item]:
        out = []
        for i, (tokens, graph) in enumerate(pairs):
            gold = None
            sql = None if y is None else y[i]
            if sql is not None:
                try:
                    gold = teacher(flatten(sql_to_ast(sql, graph)), graph)
                except ValueError as exc:
                    if not skip_unsupported:
                        raise
                    self.skipped_.append((i, f"{type(exc).__name__}: {exc}"))
                    continue
            out.append(_Item(self._input(tokens, graph), gold, sql))
        return out

    def _check_params(self) -> None:
        check_positive_int(self.batch_size, "batch_size")
        check_positive_int(self.epochs, "epochs", 0)
        check_positive_int(self.beam_size, "beam_size")
        check_positive_int(self.eval_every, "eval_every")
        if self.lr < 0:
            raise ValueError(f"lr must be >= 0, got {self.lr}")
        self.encoder_config()

    # -- training -------------------------------------------------------------
    def fit(self, X, y, X_dev=None, y_dev=None, callback: Optional[Callable[[dict], None]] = None):
        """Mini-batch Adam on the summed skeleton + detail loss.

        The batch loss is the mean over its examples; ``loss_log_`` keeps one
        value per optimizer step.  With a dev set the best-scoring epoch's
        parameters are restored at the end.
        """
        self._check_params()
        pairs = check_pairs(X)
        y = check_targets(y, len(pairs))
        self.skipped_ = []
        self.vocab_ = Vocabulary.build([t for t, _ in pairs], [g for _, g in pairs], self.hash_buckets)
        rng = np.random.default_rng(self.seed)
        self.model_ = ShadowGNN(rng, len(self.vocab_), self.encoder_config())
        items = self._items(pairs, y, skip_unsupported=True)
        if not items:
            raise ValueError("no training example is expressible in the grammar")
        dev = None
        if X_dev is not None:
            dev_pairs = check_pairs(X_dev)
            dev = (dev_pairs, check_targets(y_dev, len(dev_pairs)))

        train_rng = np.random.default_rng([self.seed, 1])
        drop_rng = train_rng if self.dropout > 0 else None
        opt = Adam(self.model_.named_parameters(), lr=self.lr)
        self.loss_log_: list[float] = []
        self.history_: list[dict] = []
        best_state, best_em = None, -1.0
        start = time.perf_counter()
        out_of_time = False
        for epoch in range(1, self.epochs + 1):
            perm = train_rng.permutation(len(items))
            epoch_loss = 0.0
            for lo in range(0, len(items), self.batch_size):
                batch = perm[lo : lo + self.batch_size]
                batch_loss = 0.0
                for i in batch:
                    loss = self.model_.loss(items[i].inp, items[i].gold, drop_rng)
                    (loss * (1.0 / len(batch))).backward()
                    batch_loss += loss.item()
                opt.step()
                opt.zero_grad()
                self.loss_log_.append(batch_loss / len(batch))
                epoch_loss += batch_loss
                if self.time_limit is not None and time.perf_counter() - start > self.time_limit:
                    out_of_time = True
                    break
            record = {"epoch": epoch, "loss": epoch_loss / len(items), "seconds": time.perf_counter() - start}
            last = out_of_time or epoch == self.epochs
            if epoch % self.eval_every == 0 or last:
                if self.target_train_em is not None:
                    record["train_em"] = self._exact(items)
                if dev is not None:
                    record["dev_em"] = self.score(*dev)
                    if record["dev_em"] > best_em:
                        best_em, best_state = record["dev_em"], self.model_.state_dict()
            self.history_.append(record)
            if callback is not None:
                callback(record)
            if self.verbose:
                print(" ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in record.items()))
            if out_of_time or record.get("train_em", -1.0) >= (self.target_train_em or np.inf):
                break
        if best_state is not None:
            self.model_.load_state_dict(best_state)
        self.n_steps_ = len(self.loss_log_)
        self.train_seconds_ = time.perf_counter() - start
        return self

    def _exact(self, items: list[_Item]) -> float:
        hits = 0
        for it in items:
            hits += exact_match(self._sql(self.model_.decode_scored(it.inp, self.beam_size)[0], it.inp.graph), it.sql, it.inp.graph)
        return hits / len(items)

    # -- inference ------------------------------------------------------------
    @staticmethod
    def _sql(actions, graph: SchemaGraph) -> Optional[str]:
        try:
            return ast_to_sql(unflatten(actions, graph), graph)
        except ValueError:
            return None

    def decode(self, X) -> list[list]:
        """Best action sequence per pair."""
        check_is_fitted(self, "model_")
        return [self.model_.decode_scored(self._input(t, g), self.beam_size)[0] for t, g in check_pairs(X)]

    def predict(self, X) -> list[Optional[str]]:
        """SQL per pair; ``None`` where the decoded tree cannot be written as SQL."""
        check_is_fitted(self, "model_")
        pairs = check_pairs(X)
        return [self._sql(actions, g) for actions, (_, g) in zip(self.decode(X), pairs)]

    def score(self, X, y) -> float:
        """Exact-match accuracy (literal values masked)."""
        pairs = check_pairs(X)
        y = check_targets(y, len(pairs))
        preds = self.predict(X)
        return float(np.mean([exact_match(p, gold, g) for p, gold, (_, g) in zip(preds, y, pairs)]))

    def encode(self, question, graph: SchemaGraph) -> EncoderOutput:
        check_is_fitted(self, "model_")
        (tokens, graph), = check_pairs([(question, graph)])
        return self.model_.encode(self._input(tokens, graph))

    # -- persistence ------------------------------------------------------------
    def save(self, path) -> None:
        check_is_fitted(self, "model_")
        params = {k: v for k, v in self.get_params().items() if k != "value_indexes"}
        save_checkpoint(path, self.model_.state_dict(), {"params": params, "vocab": self.vocab_.to_dict()})

    @classmethod
    def load(cls, path, expect: Optional[dict] = None, **overrides) -> "ShadowGNNParser":
        """Rebuild a fitted estimator; ``expect`` dims must agree with the checkpoint."""
        state, meta = load_checkpoint(path)
        params = dict(meta.get("params", {}))
        for key in _DIM_KEYS:
            if expect is not None and key in expect and key in params and expect[key] != params[key]:
                raise CheckpointMismatch(f"{path}: checkpoint has {key}={params[key]}, config asks for {expect[key]}")
        params.update(overrides)
        est = cls(**params)
        est.vocab_ = Vocabulary.from_dict(meta["vocab"])
        est.model_ = ShadowGNN(np.random.default_rng(0), len(est.vocab_), est.encoder_config())
        try:
            est.model_.load_state_dict(state)
        except (KeyError, ValueError) as exc:
            raise CheckpointMismatch(f"{path}: {exc}") from None
        return est
