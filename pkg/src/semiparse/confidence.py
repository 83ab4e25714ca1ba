"""Confidence scores for automatically parsed sentences.

Three scores are supported: the raw parse score (accumulated transition score
over the number of transitions), the length-adjusted score
``raw - L * d``, and the Delta score, the mean absolute gap between the best
parse and the best parse that avoids each of its labelled edges in turn.
``d`` is tuned by minimising the binned root-mean-square error between the
accuracy a score predicts and the accuracy observed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, TextIO

from .corpus import Sentence
from .decoder import DecodeConstraint, InfeasibleConstraint, decode, decode_corpus
from .evalkit import check_aligned, sentence_las

log = logging.getLogger(__name__)

DEFAULT_D = 0.015
D_GRID = tuple(round(0.005 * i, 3) for i in range(11))
N_BINS = 100
SCORE_MAX = 3.0
METHODS = ("raw", "adjusted", "delta")


@dataclass(frozen=True)
class ScoredParse:
    sentence: Sentence  # predicted tree
    raw: float
    length: int
    adjusted: Optional[float] = None
    d: Optional[float] = None
    delta: Optional[float] = None
    accuracy: Optional[float] = None  # per-sentence LAS against gold, when known

    def with_d(self, d: float) -> "ScoredParse":
        return replace(self, adjusted=adjusted_score(self.raw, self.length, d), d=d)

    def value(self, method: str) -> Optional[float]:
        if method not in METHODS:
            raise ValueError(f"unknown confidence method {method!r}; expected one of {', '.join(METHODS)}")
        return getattr(self, method)


def adjusted_score(raw: float, length: int, d: float = DEFAULT_D) -> float:
    if length < 1:
        raise ValueError(f"sentence length must be >= 1, got {length}")
    if d < 0:
        raise ValueError(f"d must be >= 0, got {d}")
    return raw - length * d


# -- calibration ----------------------------------------------------------------

def score_bin(score: float) -> int:
    """1-based bin over [0, 3] in 100 equal steps; out-of-range scores go to the end bins."""
    s = min(max(score, 0.0), SCORE_MAX)
    return min(int(math.floor(s * N_BINS / SCORE_MAX)) + 1, N_BINS)


def bin_center(i: int) -> float:
    """Accuracy a score in bin ``i`` stands for."""
    return (i - 0.5) / N_BINS


def f_r(scores: Sequence[float], accuracies: Sequence[float]) -> float:
    """sqrt(sum_i n_i (c_i - a_i)^2 / sum_i n_i) with a_i the mean accuracy in bin i."""
    if len(scores) != len(accuracies):
        raise ValueError("scores and accuracies differ in length")
    if not scores:
        raise ValueError("empty corpus")
    n: dict = {}
    acc: dict = {}
    for s, a in zip(scores, accuracies):
        i = score_bin(s)
        n[i] = n.get(i, 0) + 1
        acc[i] = acc.get(i, 0.0) + a
    err = sum(n[i] * (bin_center(i) - acc[i] / n[i]) ** 2 for i in n)
    return math.sqrt(err / sum(n.values()))


@dataclass(frozen=True)
class DTuningReport:
    grid: tuple  # (d, f_r) pairs in grid order
    chosen_d: float

    def table(self) -> str:
        lines = ["d\tf_r"]
        for d, f in self.grid:
            mark = "\t*" if d == self.chosen_d else ""
            lines.append(f"{d:.3f}\t{f:.6f}{mark}")
        return "\n".join(lines) + "\n"


def tune_d(items: Sequence, grid: Sequence[float] = D_GRID) -> DTuningReport:
    """Pick the d with the lowest f_r; ``items`` are ScoredParse objects carrying
    ``accuracy`` or (raw, length, accuracy) triples.  Ties go to the smallest d."""
    triples = []
    for it in items:
        if isinstance(it, ScoredParse):
            if it.accuracy is None:
                raise ValueError("every scored parse needs a gold accuracy for tuning")
            triples.append((it.raw, it.length, it.accuracy))
        else:
            triples.append(tuple(it))
    if not triples:
        raise ValueError("cannot tune d on an empty corpus")
    rows = []
    for d in grid:
        rows.append((d, f_r([adjusted_score(r, L, d) for r, L, _ in triples], [a for _, _, a in triples])))
    best_d, best_f = None, math.inf
    for d, f in sorted(rows):
        # float noise must not break the smallest-d tie rule
        if f < best_f and not math.isclose(f, best_f, rel_tol=1e-12, abs_tol=1e-12):
            best_d, best_f = d, f
    return DTuningReport(tuple(rows), best_d)


# -- Delta score ----------------------------------------------------------------

@dataclass(frozen=True)
class DeltaDetails:
    best: float  # normalized score of the unconstrained parse
    edges: tuple  # ((head, dependent, label), normalized score or None when no alternative exists)

    @property
    def delta(self) -> float:
        gaps = [abs(self.best - s) for _, s in self.edges if s is not None]
        return sum(gaps) / len(gaps) if gaps else 0.0


def delta_details(sentence: Sentence, model, beam: int = 40) -> DeltaDetails:
    best = decode(sentence, model, beam)
    edges = []
    for tok in best.tree:
        arc = (tok.head, tok.index, tok.deprel)
        try:
            alt = decode(sentence, model, beam, DecodeConstraint(arc)).score
        except InfeasibleConstraint:
            # no tree avoids this edge, so it has no alternative to compare with
            alt = None
        edges.append((arc, alt))
    return DeltaDetails(best.score, tuple(edges))


def delta_score(sentence: Sentence, model, beam: int = 40) -> float:
    """sum_i |Score_best - Score_i| / L over the labelled edges of the best parse."""
    return delta_details(sentence, model, beam).delta


# -- scoring and ranking ----------------------------------------------------------

def score_corpus(sentences: Sequence[Sentence], model, beam: int = 40, d: Optional[float] = DEFAULT_D,
                 with_delta: bool = False, gold: Optional[Sequence[Sentence]] = None, workers: int = 1) -> list:
    """Decode every sentence and attach the requested confidence scores."""
    if gold is not None:
        check_aligned(gold, sentences)
    parses = decode_corpus(sentences, model, beam, workers)
    out = []
    for i, (s, p) in enumerate(zip(sentences, parses)):
        sp = ScoredParse(p.tree, p.score, len(s))
        if d is not None and len(s):
            sp = sp.with_d(d)
        if with_delta and len(s):
            sp = replace(sp, delta=delta_score(s, model, beam))
        if gold is not None:
            sp = replace(sp, accuracy=sentence_las(gold[i], p.tree))
        out.append(sp)
    return out


def rank_by_confidence(items: Sequence[ScoredParse], method: str = "adjusted", d: Optional[float] = None) -> list:
    """Items in descending confidence; equal scores keep their input order.

    With ``method="adjusted"`` and an explicit ``d`` the adjusted score is
    recomputed from the raw score.
    """
    if method not in METHODS:
        raise ValueError(f"unknown confidence method {method!r}; expected one of {', '.join(METHODS)}")
    if method == "adjusted" and d is not None:
        items = [it.with_d(d) for it in items]
    keys = []
    for i, it in enumerate(items):
        v = it.value(method)
        if v is None:
            raise ValueError(f"item {i} has no {method} score")
        keys.append(v)
    order = sorted(range(len(items)), key=lambda i: -keys[i])
    return [items[i] for i in order]


# -- sidecar file ------------------------------------------------------------------

def _fmt(v: Optional[float]) -> str:
    return "_" if v is None else repr(float(v))


def write_sidecar(items: Sequence[ScoredParse], stream: TextIO) -> None:
    """One line per sentence: index, raw, adjusted and delta scores ("_" when absent)."""
    for i, it in enumerate(items):
        stream.write(f"{i}\t{_fmt(it.raw)}\t{_fmt(it.adjusted)}\t{_fmt(it.delta)}\n")


def save_sidecar(items: Sequence[ScoredParse], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        write_sidecar(items, fh)


def read_sidecar(stream: TextIO) -> list:
    """Rows of (index, raw, adjusted, delta) with None for "_"."""
    rows = []
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\n")
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise ValueError(f"line {lineno}: expected 4 columns, got {len(cols)}")
        vals = [None if c == "_" else float(c) for c in cols[1:]]
        rows.append((int(cols[0]), *vals))
    return rows


def load_sidecar(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return read_sidecar(fh)
