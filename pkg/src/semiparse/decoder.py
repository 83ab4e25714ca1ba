"""Beam-search decoding over a transition system.

Every beam entry is expanded with every permissible transition, terminal
entries are carried over unchanged, and the ``b`` best by accumulated score
survive (ties keep expansion order).  The loop stops once every entry is
terminal.  Greedy decoding is ``b = 1``.
"""
from __future__ import annotations

import heapq
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import multiprocessing as mp

import numpy as np

from .corpus import Sentence
from .features import FeatureVector, dlm_ids, id_matrix
from .transitions import ARC_EAGER, Configuration, Kind, Transition, finalize, get_system


class InfeasibleConstraint(RuntimeError):
    """The constraint removed every hypothesis from the beam."""


class DecodeError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"sentence {index}: {cause}")


@dataclass(frozen=True)
class DecodeConstraint:
    forbidden_edge: Optional[tuple] = None  # (head, dependent, label)

    def allows(self, arc) -> bool:
        return self.forbidden_edge is None or arc != self.forbidden_edge


class Hypothesis:
    """Beam entry; the feature vector is kept as a parent chain of step ids."""

    __slots__ = ("config", "score", "parent", "step", "gold")

    def __init__(self, config: Configuration, score: float, parent=None, step=(), gold=True):
        self.config = config
        self.score = score
        self.parent = parent
        self.step = step
        self.gold = gold

    @property
    def steps(self) -> int:
        return len(self.config.history)

    @property
    def features(self) -> FeatureVector:
        fv = FeatureVector()
        h = self
        while h is not None:
            fv.update(h.step.tolist() if isinstance(h.step, np.ndarray) else h.step)
            h = h.parent
        return fv

    @property
    def transitions(self) -> tuple:
        return self.config.history


@dataclass
class SearchResult:
    best: Hypothesis
    heads: list
    labels: list
    # set when decoding against a gold sequence and the gold prefix fell out of the beam
    early: Optional[Hypothesis] = None
    early_steps: int = 0

    @property
    def arcs(self) -> frozenset:
        return frozenset((h, d, l) for d, (h, l) in enumerate(zip(self.heads, self.labels), 1))


@dataclass
class Parse:
    tree: Sentence
    score: float  # accumulated score divided by the number of transitions
    total: float  # accumulated score
    n_transitions: int
    hypothesis: Hypothesis = None

    def __iter__(self):
        # unpacks as (tree, score)
        return iter((self.tree, self.score))


def beam_search(sentence: Sentence, model, beam: int = 40, constraint: Optional[DecodeConstraint] = None,
                gold: Optional[Sequence[Transition]] = None) -> SearchResult:
    if beam < 1:
        raise ValueError(f"beam size must be >= 1, got {beam}")
    sys_ = get_system(model.system)
    # training decodes (gold given) always score with the raw weights
    w = model.weights if gold is not None else model.active
    labels = model.labels
    index = model.transition_index
    use_dlm = bool(model.dlm_tables)
    forbidden = constraint.forbidden_edge if constraint is not None else None
    beam_ = [Hypothesis(sys_.initial(len(sentence)), 0.0)]
    if forbidden is not None and sys_.is_terminal(beam_[0].config):
        if forbidden in _final_arcs(beam_[0].config):
            raise InfeasibleConstraint("empty sentence cannot avoid the forbidden edge")
    rounds = 0
    while True:
        if all(sys_.is_terminal(h.config) for h in beam_):
            break
        rounds += 1
        cands = []
        for h in beam_:
            c = h.config
            if sys_.is_terminal(c):
                cands.append((h.score, h, None, None))
                continue
            ts = sys_.candidates(c, labels)
            if forbidden is not None:
                ts = [t for t in ts if sys_.arc_of(c, t) != forbidden and not _finalizes_into(sys_, c, t, forbidden)]
            if not ts:
                continue
            mat = id_matrix(c, sentence, model)[:, [index[t] for t in ts]]
            gains = w.take(mat).sum(axis=0)
            for k, t in enumerate(ts):
                if use_dlm and t.is_arc:
                    extra = dlm_ids(c, t, sentence, model)
                    ids = mat[:, k].tolist() + extra
                    gain = float(gains[k]) + float(w.take(extra).sum())
                else:
                    ids = mat[:, k]
                    gain = float(gains[k])
                cands.append((h.score + gain, h, t, ids))
        top = heapq.nlargest(beam, cands, key=lambda x: x[0])
        beam_ = []
        for s, h, t, ids in top:
            if t is None:
                beam_.append(h)
                continue
            c = sys_.apply(h.config, t)
            on_gold = gold is not None and h.gold and h.steps < len(gold) and gold[h.steps] == t
            beam_.append(Hypothesis(c, s, h, ids, on_gold))
        if not beam_:
            raise InfeasibleConstraint(f"constraint {forbidden} removed every hypothesis")
        if gold is not None and not any(h.gold for h in beam_):
            return SearchResult(beam_[0], *finalize(beam_[0].config), early=beam_[0],
                                early_steps=min(rounds, len(gold)))
    best = beam_[0]
    heads, labs = finalize(best.config)
    return SearchResult(best, heads, labs)


def _finalizes_into(sys_, c: Configuration, t: Transition, edge) -> bool:
    # arc-eager finalization adds root arcs, so a terminal successor can still carry the edge
    if edge[0] != 0 or sys_.name != ARC_EAGER or t.kind not in (Kind.SHIFT, Kind.RIGHT_ARC) or len(c.buffer) > 1:
        return False
    return edge in _final_arcs(sys_.apply(c, t))


def _final_arcs(c: Configuration):
    heads, labels = finalize(c)
    return {(h, d, l) for d, (h, l) in enumerate(zip(heads, labels), 1)}


def decode(sentence: Sentence, model, beam: int = 40, constraint: Optional[DecodeConstraint] = None) -> Parse:
    """Best tree and its length-normalised score."""
    res = beam_search(sentence, model, beam, constraint)
    n_trans = len(res.best.config.history)
    total = res.best.score
    norm = total / n_trans if n_trans else 0.0
    return Parse(sentence.with_arcs(res.heads, res.labels), norm, total, n_trans, res.best)


# worker-process state for parallel decoding; set by the pool initializer
_WORKER = {}


def _init_worker(model, beam):
    _WORKER["model"] = model
    _WORKER["beam"] = beam


def _decode_one(item):
    i, sent = item
    try:
        p = decode(sent, _WORKER["model"], _WORKER["beam"])
    except Exception as exc:  # re-raised in the parent with the index
        return i, None, exc
    return i, (p.tree, p.score, p.total, p.n_transitions), None


def decode_corpus(sentences: Sequence[Sentence], model, beam: int = 40, workers: int = 1) -> list:
    """Decode every sentence; results keep input order whatever the worker count."""
    sentences = list(sentences)
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(sentences) < 2:
        out = []
        for i, s in enumerate(sentences):
            try:
                out.append(decode(s, model, beam))
            except Exception as exc:
                raise DecodeError(i, exc) from exc
        return out
    results = [None] * len(sentences)
    ctx = mp.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx, initializer=_init_worker,
                             initargs=(model, beam)) as pool:
        for i, res, exc in pool.map(_decode_one, enumerate(sentences), chunksize=8):
            if exc is not None:
                raise DecodeError(i, exc)
            results[i] = Parse(*res)
    return results
