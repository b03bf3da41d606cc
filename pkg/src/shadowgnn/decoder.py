"""Coarse-to-fine SemQL decoder.

Pass one walks the action sequence with a GRU and predicts every grammar rule;
schema and literal terminals appear only as typed placeholders.  Pass two
starts from the last skeleton state and visits the column/table placeholders
in order, choosing schema nodes with a bilinear pointer over ``f_schema``.
Literal slots are filled with fixed stand-ins; their content is not modelled.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .encoder import EncoderOutput
from .grammar.ast import (
    Action,
    ApplyRule,
    Cursor,
    EmitLiteral,
    GrammarViolation,
    IncompleteSequence,
    SelectColumn,
    SelectTable,
    action_fits,
)
from .grammar.rules import COLUMN_SLOT, LITERAL_SLOT, NONTERMINALS, RULES, TABLE_SLOT, TERMINAL_SLOTS, rule_id
from .numerics import (
    Linear,
    Module,
    Tensor,
    concat_last_dim,
    concat_rows,
    embedding_lookup,
    embedding_table,
    gru_sequence,
    gru_step,
    matmul,
    mean_rows,
    mul,
    nll_rows,
    row,
    softmax_rows,
    take_rows,
    tanh,
    transpose,
    uniform_weight,
    zeros,
    zeros_param,
)
from .schema.graph import SchemaGraph

MAX_LENGTH = 128
NUM_RULES = len(RULES)
PLACEHOLDER = {COLUMN_SLOT: NUM_RULES, TABLE_SLOT: NUM_RULES + 1, LITERAL_SLOT: NUM_RULES + 2}
START = NUM_RULES + 3
NUM_TOKENS = NUM_RULES + 4
SLOTS = NONTERMINALS + TERMINAL_SLOTS
SLOT_ID = {s: i for i, s in enumerate(SLOTS)}
_VALUE_LITERAL = rule_id("Value", "literal")
# one field per (rule, child position); a slot's tree path is the bag of fields above it
FIELDS = [(r.id, i) for r in RULES for i in range(len(r.children))]
FIELD_ID = {f: k for k, f in enumerate(FIELDS)}


def child_paths(path: tuple, rule: int) -> list[tuple]:
    """Paths of the children of ``rule`` applied at ``path``, in stack (reversed) order."""
    n = len(RULES[rule].children)
    return [path + (FIELD_ID[(rule, i)],) for i in reversed(range(n))]


class DecodeTimeout(RuntimeError):
    """No hypothesis completed within the length budget."""

    def __init__(self, message: str, partial: list, score: float):
        super().__init__(message)
        self.partial = partial
        self.score = score


@dataclass
class Teacher:
    """Gold sequence split into skeleton and detail targets."""

    actions: tuple
    prev: np.ndarray
    slots: np.ndarray
    paths: np.ndarray
    rule_steps: np.ndarray
    rule_targets: np.ndarray
    rule_mask: np.ndarray
    detail_steps: np.ndarray
    detail_is_column: np.ndarray
    detail_nodes: np.ndarray
    detail_prev: np.ndarray
    detail_mask: np.ndarray


def node_mask(graph: SchemaGraph, slot: str) -> np.ndarray:
    mask = np.zeros(graph.num_nodes, dtype=bool)
    if slot == COLUMN_SLOT:
        mask[graph.num_tables :] = True
    else:
        mask[: graph.num_tables] = True
    return mask


def teacher(actions: Sequence[Action], graph: SchemaGraph, max_length: int = MAX_LENGTH) -> Teacher:
    """Validate ``actions`` against the grammar and the budget; build loss targets."""
    actions = tuple(actions)
    if not actions:
        raise IncompleteSequence("empty action sequence")
    cursor = Cursor()
    stack: list[tuple] = [()]
    prev, slots, paths = [], [], []
    rule_steps, rule_targets, rule_mask = [], [], []
    detail_steps, is_col, nodes, detail_prev, detail_mask = [], [], [], [], []
    token = START
    last_node = -1
    for t, act in enumerate(actions):
        if cursor.done:
            raise GrammarViolation(f"{len(actions) - t} trailing actions after a complete tree")
        slot = cursor.expected
        if not action_fits(slot, act):
            raise GrammarViolation(f"action {act} at position {t} is illegal where {slot} is expected")
        prev.append(token)
        slots.append(SLOT_ID[slot])
        path = stack.pop()
        paths.append(path)
        if isinstance(act, ApplyRule):
            legal = cursor.legal_rules(max_length)
            if act.rule not in legal:
                raise GrammarViolation(f"action {act} at position {t} cannot finish within {max_length} actions")
            mask = np.zeros(NUM_RULES, dtype=bool)
            mask[legal] = True
            rule_steps.append(t)
            rule_targets.append(act.rule)
            rule_mask.append(mask)
            token = act.rule
            stack.extend(child_paths(path, act.rule))
        else:
            token = PLACEHOLDER[slot]
            if slot != LITERAL_SLOT:
                mask = node_mask(graph, slot)
                if not (0 <= act.node < graph.num_nodes and mask[act.node]):
                    raise GrammarViolation(f"node {act.node} at position {t} does not fit slot {slot}")
                detail_steps.append(t)
                is_col.append(slot == COLUMN_SLOT)
                nodes.append(act.node)
                detail_prev.append(last_node + 1)
                detail_mask.append(mask)
                last_node = act.node
        cursor.advance(act)
    if not cursor.done:
        raise IncompleteSequence(f"sequence ended while expecting {cursor.expected}")
    m = graph.num_nodes
    counts = np.zeros((len(actions), len(FIELDS)))
    for t, path in enumerate(paths):
        np.add.at(counts[t], list(path), 1.0)
    return Teacher(
        actions=actions,
        prev=np.array(prev, dtype=np.int64),
        slots=np.array(slots, dtype=np.int64),
        paths=counts,
        rule_steps=np.array(rule_steps, dtype=np.int64),
        rule_targets=np.array(rule_targets, dtype=np.int64),
        rule_mask=np.array(rule_mask, dtype=bool).reshape(-1, NUM_RULES),
        detail_steps=np.array(detail_steps, dtype=np.int64),
        detail_is_column=np.array(is_col, dtype=bool),
        detail_nodes=np.array(nodes, dtype=np.int64),
        detail_prev=np.array(detail_prev, dtype=np.int64),
        detail_mask=np.array(detail_mask, dtype=bool).reshape(-1, m),
    )


def literal_stand_in(previous_token: int) -> str:
    return "'value'" if previous_token == _VALUE_LITERAL else "1"


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    x = np.where(mask, x, -np.inf)
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


@dataclass
class _Skeleton:
    tokens: list
    cursor: Cursor
    paths: list
    h: np.ndarray
    score: float
    slots_out: list = field(default_factory=list)  # (slot, readout) per column/table placeholder


class Decoder(Module):
    def __init__(self, rng: np.random.Generator, d: int):
        self.d = d
        self.action_embed = embedding_table(rng, NUM_TOKENS, d)
        self.slot_embed = embedding_table(rng, len(SLOTS), d)
        self.field_embed = embedding_table(rng, len(FIELDS), d)
        self.init = Linear(rng, d, d)
        self.w_in = uniform_weight(rng, 3 * d, 3 * d)
        self.b_in = zeros_param(3 * d)
        self.w_h = uniform_weight(rng, d, 3 * d)
        self.b_h = zeros_param(3 * d)
        self.w_att = uniform_weight(rng, d, d)
        self.out = Linear(rng, 2 * d, d)
        self.rules = Linear(rng, d, NUM_RULES)
        # detail pass
        self.w_in2 = uniform_weight(rng, 2 * d, 3 * d)
        self.b_in2 = zeros_param(3 * d)
        self.w_h2 = uniform_weight(rng, d, 3 * d)
        self.b_h2 = zeros_param(3 * d)
        self.w_att2 = uniform_weight(rng, d, d)
        self.out2 = Linear(rng, 2 * d, d)
        self.w_col = uniform_weight(rng, d, d)
        self.w_tab = uniform_weight(rng, d, d)

    # -- teacher-forced loss -------------------------------------------------
    def _readout(self, h: Tensor, f: Tensor, w_att: Tensor, out: Linear) -> Tensor:
        alpha = softmax_rows(matmul(matmul(h, w_att), transpose(f)))
        return tanh(out(concat_last_dim([h, matmul(alpha, f)])))

    def loss(self, enc: EncoderOutput, gold: Teacher, return_parts: bool = False):
        """Skeleton cross-entropy over rule steps plus pointer cross-entropy over schema slots."""
        f = enc.f
        x = concat_last_dim([
            embedding_lookup(self.action_embed, gold.prev),
            embedding_lookup(self.slot_embed, gold.slots),
            matmul(Tensor(gold.paths), self.field_embed),
        ])
        h0 = tanh(self.init(mean_rows(f)))
        H = gru_sequence(matmul(x, self.w_in) + self.b_in, h0, self.w_h, self.b_h)
        O = self._readout(H, f, self.w_att, self.out)
        skeleton = nll_rows(self.rules(take_rows(O, gold.rule_steps)), gold.rule_targets, gold.rule_mask)
        if len(gold.detail_steps) == 0:
            detail = Tensor(np.asarray(0.0))
        else:
            fs = enc.f_schema
            fs_ext = concat_rows([zeros((1, self.d)), fs])
            x2 = concat_last_dim([take_rows(O, gold.detail_steps), take_rows(fs_ext, gold.detail_prev)])
            H2 = gru_sequence(matmul(x2, self.w_in2) + self.b_in2, row(H, H.shape[0] - 1), self.w_h2, self.b_h2)
            O2 = self._readout(H2, f, self.w_att2, self.out2)
            keys = transpose(fs)
            col = Tensor(gold.detail_is_column.astype(np.float64)[:, None])
            scores = mul(matmul(matmul(O2, self.w_col), keys), col) + mul(
                matmul(matmul(O2, self.w_tab), keys), 1.0 - col
            )
            detail = nll_rows(scores, gold.detail_nodes, gold.detail_mask)
        total = skeleton + detail
        if return_parts:
            return total, skeleton, detail
        return total

    # -- numpy inference -------------------------------------------------------
    def _arrays(self, enc: EncoderOutput) -> dict:
        d = self.d
        F = enc.f.data
        p = {
            "F": F,
            "Fs_ext": np.vstack([np.zeros((1, d)), F[enc.n :]]),
            "tok_in": self.action_embed.data @ self.w_in.data[:d],
            "slot_in": self.slot_embed.data @ self.w_in.data[d : 2 * d] + self.b_in.data,
            "field_in": self.field_embed.data @ self.w_in.data[2 * d :],
            "h0": np.tanh(F.mean(axis=0) @ self.init.weight.data + self.init.bias.data),
        }
        return p

    def _read(self, h: np.ndarray, F: np.ndarray, w_att: np.ndarray, out: Linear) -> np.ndarray:
        alpha = _softmax((h @ w_att) @ F.T)
        return np.tanh(np.concatenate([h, alpha @ F], axis=-1) @ out.weight.data + out.bias.data)

    @staticmethod
    def _path_in(p: dict, path: tuple) -> np.ndarray:
        return p["field_in"][list(path)].sum(axis=0)

    def _skeleton_step(self, p: dict, prev: list, slots: list, path_in: np.ndarray, h: np.ndarray):
        gx = p["tok_in"][prev] + p["slot_in"][slots] + path_in
        h = gru_step(gx, h, self.w_h.data, self.b_h.data)
        o = self._read(h, p["F"], self.w_att.data, self.out)
        return h, o

    def _rule_logits(self, o: np.ndarray) -> np.ndarray:
        return o @ self.rules.weight.data + self.rules.bias.data

    def _detail_step(self, p: dict, o_slot: np.ndarray, prev: list, h: np.ndarray, slot: str, graph: SchemaGraph):
        x = np.concatenate([o_slot, p["Fs_ext"][prev]], axis=-1)
        h = gru_step(x @ self.w_in2.data + self.b_in2.data, h, self.w_h2.data, self.b_h2.data)
        o2 = self._read(h, p["F"], self.w_att2.data, self.out2)
        w = self.w_col.data if slot == COLUMN_SLOT else self.w_tab.data
        scores = (o2 @ w) @ p["F"][-graph.num_nodes :].T
        return h, _log_softmax(scores, node_mask(graph, slot))

    def _skeleton_beam(self, p: dict, beam_size: int, max_length: int) -> list[_Skeleton]:
        beams = [_Skeleton([], Cursor(), [()], p["h0"], 0.0)]
        complete: list[_Skeleton] = []
        best_partial = beams[0]
        while beams:
            prev = [b.tokens[-1] if b.tokens else START for b in beams]
            slots = [b.cursor.expected for b in beams]
            path_in = np.stack([self._path_in(p, b.paths[-1]) for b in beams])
            H, O = self._skeleton_step(p, prev, [SLOT_ID[s] for s in slots], path_in, np.stack([b.h for b in beams]))
            cands = []
            for i, (b, slot) in enumerate(zip(beams, slots)):
                if b.cursor.length >= max_length:
                    continue
                if slot in TERMINAL_SLOTS:
                    cands.append((-b.score, i, PLACEHOLDER[slot], b.score))
                    continue
                legal = b.cursor.legal_rules(max_length)
                if not legal and b.cursor.length < max_length:
                    # budget already infeasible: keep growing so the timeout has a partial to report
                    legal = b.cursor.legal_rules()
                if not legal:
                    continue
                mask = np.zeros(NUM_RULES, dtype=bool)
                mask[legal] = True
                logp = _log_softmax(self._rule_logits(O[i]), mask)
                for r in legal:
                    s = b.score + float(logp[r])
                    cands.append((-s, i, r, s))
            cands.sort()
            nxt = []
            for _, i, tok, s in cands[: beam_size - len(complete)]:
                b = beams[i]
                cursor = b.cursor.copy()
                paths = b.paths[:-1]
                slot = slots[i]
                if tok >= NUM_RULES:
                    cursor.advance(_TERMINAL_DUMMY[slot])
                else:
                    cursor.advance(ApplyRule(tok))
                    paths.extend(child_paths(b.paths[-1], tok))
                slots_out = b.slots_out + [(slot, O[i])] if slot in (COLUMN_SLOT, TABLE_SLOT) else b.slots_out
                hyp = _Skeleton(b.tokens + [tok], cursor, paths, H[i], s, slots_out)
                (complete if cursor.done else nxt).append(hyp)
            if nxt:
                best_partial = nxt[0]
            beams = nxt
            if complete and (not beams or max(c.score for c in complete) >= beams[0].score):
                break
            if len(complete) >= beam_size:
                break
        if not complete:
            raise DecodeTimeout(
                f"no complete hypothesis within {max_length} actions",
                self._partial_actions(best_partial.tokens),
                best_partial.score,
            )
        complete.sort(key=lambda c: -c.score)
        return complete

    @staticmethod
    def _partial_actions(tokens: list) -> list:
        out = []
        for tok in tokens:
            if tok < NUM_RULES:
                out.append(ApplyRule(tok))
            else:
                out.append(None)  # unfilled terminal
        return out

    def _detail_beam(self, p: dict, skel: _Skeleton, graph: SchemaGraph, beam_size: int) -> tuple[list, float]:
        beams = [(0.0, skel.h, [])]
        for slot, o in skel.slots_out:
            prev = [nodes[-1] + 1 if nodes else 0 for _, _, nodes in beams]
            H, logp = self._detail_step(p, np.stack([o] * len(beams)), prev, np.stack([b[1] for b in beams]), slot, graph)
            cands = []
            for i, (score, _, nodes) in enumerate(beams):
                for j in np.flatnonzero(np.isfinite(logp[i])):
                    s = score + float(logp[i, j])
                    cands.append((-s, i, int(j), s))
            cands.sort()
            beams = [(s, H[i], beams[i][2] + [j]) for _, i, j, s in cands[:beam_size]]
        score, _, nodes = beams[0]
        return nodes, score

    def _assemble(self, tokens: list, nodes: list) -> list:
        out: list[Action] = []
        it = iter(nodes)
        for k, tok in enumerate(tokens):
            if tok < NUM_RULES:
                out.append(ApplyRule(tok))
            elif tok == PLACEHOLDER[COLUMN_SLOT]:
                out.append(SelectColumn(next(it)))
            elif tok == PLACEHOLDER[TABLE_SLOT]:
                out.append(SelectTable(next(it)))
            else:
                out.append(EmitLiteral(literal_stand_in(tokens[k - 1] if k else START)))
        return out

    def decode_scored(
        self, enc: EncoderOutput, graph: SchemaGraph, beam_size: int = 5, max_length: int = MAX_LENGTH
    ) -> tuple[list, float]:
        """Best action sequence and its log-probability (skeleton plus detail)."""
        if beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {beam_size}")
        if enc.m != graph.num_nodes:
            raise ValueError(f"encoder output has {enc.m} schema rows, graph has {graph.num_nodes} nodes")
        p = self._arrays(enc)
        best: Optional[tuple] = None
        sizes = [beam_size] if beam_size == 1 else [1, beam_size]
        for k in sizes:
            for skel in self._skeleton_beam(p, k, max_length):
                nodes, detail = self._detail_beam(p, skel, graph, k)
                total = skel.score + detail
                if best is None or total > best[1]:
                    best = (self._assemble(skel.tokens, nodes), total)
        return best

    def decode(self, enc: EncoderOutput, graph: SchemaGraph, beam_size: int = 5, max_length: int = MAX_LENGTH) -> list:
        return self.decode_scored(enc, graph, beam_size, max_length)[0]

    def step_distributions(self, enc: EncoderOutput, graph: SchemaGraph, actions: Sequence[Action]) -> list:
        """Teacher-forced ``(slot, probabilities)`` for each action (``None`` for literals)."""
        gold = teacher(actions, graph)
        p = self._arrays(enc)
        h = p["h0"]
        out: list = []
        readouts = []
        for t in range(len(gold.actions)):
            path_in = gold.paths[t] @ p["field_in"]
            h, o = self._skeleton_step(p, [gold.prev[t]], [gold.slots[t]], path_in[None], h[None])
            h, o = h[0], o[0]
            readouts.append(o)
            slot = SLOTS[gold.slots[t]]
            if slot in NONTERMINALS:
                mask = gold.rule_mask[list(gold.rule_steps).index(t)]
                out.append((slot, np.exp(_log_softmax(self._rule_logits(o), mask))))
            else:
                out.append((slot, None))
        h2 = h
        for k, t in enumerate(gold.detail_steps):
            slot = SLOTS[gold.slots[t]]
            h2, logp = self._detail_step(p, readouts[t][None], [gold.detail_prev[k]], h2[None], slot, graph)
            h2 = h2[0]
            out[t] = (slot, np.exp(logp[0]))
        return out

    def sequence_log_prob(self, enc: EncoderOutput, graph: SchemaGraph, actions: Sequence[Action]) -> float:
        """Log-probability of ``actions`` computed by the inference path."""
        total = 0.0
        for act, (slot, probs) in zip(actions, self.step_distributions(enc, graph, actions)):
            if probs is None:
                continue
            index = act.rule if isinstance(act, ApplyRule) else act.node
            total += float(np.log(probs[index]))
        return total


_TERMINAL_DUMMY = {COLUMN_SLOT: SelectColumn(0), TABLE_SLOT: SelectTable(0), LITERAL_SLOT: EmitLiteral("")}


def decode_loss(decoder: Decoder, enc: EncoderOutput, actions: Sequence[Action], graph: SchemaGraph) -> Tensor:
    return decoder.loss(enc, teacher(actions, graph))
