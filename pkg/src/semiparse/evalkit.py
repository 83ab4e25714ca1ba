"""Attachment scores, label scores, the randomized comparator and bucket analysis.

All functions take aligned corpora: the same sentences in the same order,
with identical forms.  Gold POS tags decide punctuation, prepositions and
conjunctions.
"""
from __future__ import annotations

import random
import string
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .corpus import Sentence

DEFAULT_PUNCT_TAGS = frozenset({"P", "PU", "PUNCT"})
PREPOSITION_TAGS = frozenset({"IN"})
CONJUNCTION_TAGS = frozenset({"CC"})
LENGTH_BUCKET_WIDTH = 4
FACTORS = ("length", "unknown-words", "prepositions", "conjunctions")


class AlignmentError(ValueError):
    def __init__(self, index: int, reason: str):
        self.index = index
        super().__init__(f"corpora misaligned at sentence {index}: {reason}")


def is_punct(pos: Optional[str], tags: Iterable = DEFAULT_PUNCT_TAGS) -> bool:
    if pos is None:
        return False
    if pos in tags:
        return True
    return all(ch in string.punctuation or unicodedata.category(ch).startswith("P") for ch in pos)


def check_aligned(*corpora: Sequence[Sentence]) -> None:
    first = corpora[0]
    for other in corpora[1:]:
        for i, (a, b) in enumerate(zip(first, other)):
            if a.forms != b.forms:
                raise AlignmentError(i, "token forms differ")
        if len(first) != len(other):
            raise AlignmentError(min(len(first), len(other)), f"{len(first)} vs {len(other)} sentences")


@dataclass(frozen=True)
class EvalResult:
    correct_heads: int  # C_a
    correct_labeled: int  # C_a+l
    total: int  # C_t
    include_punct: bool = True

    @property
    def empty(self) -> bool:
        return self.total == 0

    @property
    def uas(self) -> float:
        return self.correct_heads / self.total if self.total else 0.0

    @property
    def las(self) -> float:
        return self.correct_labeled / self.total if self.total else 0.0

    def __add__(self, other: "EvalResult") -> "EvalResult":
        return EvalResult(self.correct_heads + other.correct_heads, self.correct_labeled + other.correct_labeled,
                          self.total + other.total, self.include_punct)

    def row(self) -> list:
        if self.empty:
            return ["0/0", "empty", "empty"]
        return [str(self.total), f"{100 * self.uas:.2f}", f"{100 * self.las:.2f}"]


def _scored(gold: Sentence, include_punct: bool, punct_tags):
    for i, tok in enumerate(gold):
        if include_punct or not is_punct(tok.pos, punct_tags):
            yield i


def _count(gold: Sentence, pred: Sentence, indices) -> tuple:
    ca = cal = ct = 0
    for i in indices:
        g, p = gold.tokens[i], pred.tokens[i]
        ct += 1
        if g.head == p.head:
            ca += 1
            if g.deprel == p.deprel:
                cal += 1
    return ca, cal, ct


def attachment_scores(gold: Sequence[Sentence], predicted: Sequence[Sentence], include_punct: bool = True,
                      punct_tags: Iterable = DEFAULT_PUNCT_TAGS) -> EvalResult:
    check_aligned(gold, predicted)
    ca = cal = ct = 0
    for g, p in zip(gold, predicted):
        a, al, t = _count(g, p, _scored(g, include_punct, punct_tags))
        ca, cal, ct = ca + a, cal + al, ct + t
    return EvalResult(ca, cal, ct, include_punct)


def sentence_scores(gold: Sentence, predicted: Sentence, include_punct: bool = True,
                    punct_tags: Iterable = DEFAULT_PUNCT_TAGS) -> EvalResult:
    return EvalResult(*_count(gold, predicted, _scored(gold, include_punct, punct_tags)), include_punct)


def sentence_las(gold: Sentence, predicted: Sentence, include_punct: bool = True,
                 punct_tags: Iterable = DEFAULT_PUNCT_TAGS) -> float:
    """Per-sentence LAS; a sentence with no scored token counts as fully correct."""
    r = sentence_scores(gold, predicted, include_punct, punct_tags)
    return r.las if r.total else 1.0


# -- randomized comparator -------------------------------------------------------

@dataclass(frozen=True)
class SignificanceResult:
    p: float
    i_less: int
    iterations: int
    las_first: float
    las_second: float
    swapped: bool  # inputs were reordered so the first has the higher LAS
    degenerate: bool  # every sentence ties, so p = 0 carries no evidence

    @property
    def stars(self) -> str:
        if self.degenerate:
            return ""
        return "**" if self.p < 0.01 else "*" if self.p < 0.05 else ""

    def report(self) -> str:
        lines = [f"LAS first\t{100 * self.las_first:.2f}", f"LAS second\t{100 * self.las_second:.2f}",
                 f"i_less\t{self.i_less}", f"iterations\t{self.iterations}", f"p\t{self.p:.4f}{self.stars}"]
        if self.swapped:
            lines.append("note\tinputs swapped so that the first has the higher LAS")
        if self.degenerate:
            lines.append("note\tdegenerate: predictions tie on every sentence")
        return "\n".join(lines) + "\n"


def significance(gold: Sequence[Sentence], first: Sequence[Sentence], second: Sequence[Sentence],
                 iterations: int = 10000, seed: int = 0, include_punct: bool = True,
                 punct_tags: Iterable = DEFAULT_PUNCT_TAGS) -> SignificanceResult:
    """p = i_less / iterations over sentences sampled uniformly with replacement."""
    check_aligned(gold, first, second)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if not gold:
        raise ValueError("empty corpus")
    # per-sentence correct counts share the gold denominator, so they order like per-sentence LAS
    s1 = [sentence_scores(g, p, include_punct, punct_tags) for g, p in zip(gold, first)]
    s2 = [sentence_scores(g, p, include_punct, punct_tags) for g, p in zip(gold, second)]
    las1 = sum(s1, EvalResult(0, 0, 0)).las
    las2 = sum(s2, EvalResult(0, 0, 0)).las
    swapped = las1 < las2
    if swapped:
        s1, s2, las1, las2 = s2, s1, las2, las1
    c1 = [r.correct_labeled for r in s1]
    c2 = [r.correct_labeled for r in s2]
    rng = random.Random(seed)
    n = len(c1)
    i_less = 0
    for _ in range(iterations):
        k = rng.randrange(n)
        if c1[k] < c2[k]:
            i_less += 1
    return SignificanceResult(i_less / iterations, i_less, iterations, las1, las2, swapped, c1 == c2)


# -- labels ------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelScore:
    label: str
    predicted: int  # P_L
    gold: int  # G_L
    correct: int  # PG_L

    @property
    def precision(self) -> float:
        return self.correct / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.correct / self.gold if self.gold else 0.0

    @property
    def f_score(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


def label_scores(gold: Sequence[Sentence], predicted: Sequence[Sentence], include_punct: bool = True,
                 punct_tags: Iterable = DEFAULT_PUNCT_TAGS) -> tuple:
    """(label scores sorted by label, confusion Counter of (gold, predicted) for mislabelled tokens)."""
    check_aligned(gold, predicted)
    p_l, g_l, pg_l = Counter(), Counter(), Counter()
    confusion = Counter()
    for g, p in zip(gold, predicted):
        for i in _scored(g, include_punct, punct_tags):
            gl, pl = g.tokens[i].deprel, p.tokens[i].deprel
            g_l[gl] += 1
            p_l[pl] += 1
            if gl == pl:
                pg_l[gl] += 1
            else:
                confusion[(gl, pl)] += 1
    labels = sorted(set(g_l) | set(p_l), key=lambda x: (x is None, x or ""))
    return [LabelScore(l, p_l[l], g_l[l], pg_l[l]) for l in labels], confusion


# -- known / unknown words -----------------------------------------------------------

def vocabulary(corpus: Iterable[Sentence]) -> frozenset:
    return frozenset(t.form for s in corpus for t in s)


def unknown_split(gold: Sequence[Sentence], predicted: Sequence[Sentence], vocab: Iterable,
                  include_punct: bool = True, punct_tags: Iterable = DEFAULT_PUNCT_TAGS) -> tuple:
    """(known, unknown) attachment scores; a token is unknown when its form is not in ``vocab``."""
    check_aligned(gold, predicted)
    vocab = vocab if isinstance(vocab, (set, frozenset)) else set(vocab)
    known = unknown = EvalResult(0, 0, 0, include_punct)
    for g, p in zip(gold, predicted):
        idx = list(_scored(g, include_punct, punct_tags))
        k = [i for i in idx if g.tokens[i].form in vocab]
        u = [i for i in idx if g.tokens[i].form not in vocab]
        known = known + EvalResult(*_count(g, p, k), include_punct)
        unknown = unknown + EvalResult(*_count(g, p, u), include_punct)
    return known, unknown


# -- sentence-level buckets ----------------------------------------------------------

@dataclass(frozen=True)
class Bucket:
    key: int
    better: float  # percent of sentences
    worse: float
    no_change: float
    count: int

    @property
    def label(self) -> str:
        return str(self.key)


@dataclass
class BucketReport:
    factor: str
    buckets: list = field(default_factory=list)
    width: int = 1

    def label(self, b: Bucket) -> str:
        return f"{b.key}-{b.key + self.width - 1}" if self.width > 1 else str(b.key)

    def rows(self) -> list:
        return [[self.label(b), f"{b.better:.2f}", f"{b.worse:.2f}", f"{b.no_change:.2f}", str(b.count)]
                for b in self.buckets]


def bucket_analysis(gold: Sequence[Sentence], base: Sequence[Sentence], new: Sequence[Sentence], factor: str,
                    vocab: Optional[Iterable] = None, preposition_tags: Iterable = PREPOSITION_TAGS,
                    conjunction_tags: Iterable = CONJUNCTION_TAGS, include_punct: bool = True,
                    punct_tags: Iterable = DEFAULT_PUNCT_TAGS, width: int = LENGTH_BUCKET_WIDTH) -> BucketReport:
    """Share of sentences improved, worsened or unchanged by ``new`` relative to ``base``."""
    check_aligned(gold, base, new)
    if factor not in FACTORS:
        raise ValueError(f"unknown factor {factor!r}; expected one of {', '.join(FACTORS)}")
    if factor == "unknown-words":
        if vocab is None:
            raise ValueError("the unknown-words factor needs a training vocabulary")
        vocab = vocab if isinstance(vocab, (set, frozenset)) else set(vocab)
    preposition_tags, conjunction_tags = set(preposition_tags), set(conjunction_tags)

    def key(s: Sentence) -> int:
        if factor == "length":
            return (len(s) - 1) // width * width + 1
        if factor == "unknown-words":
            return sum(t.form not in vocab for t in s)
        tags = preposition_tags if factor == "prepositions" else conjunction_tags
        return sum(t.pos in tags for t in s)

    groups: dict = {}
    for g, b, n in zip(gold, base, new):
        # correct counts over the same scored tokens compare like per-sentence LAS
        cb = sentence_scores(g, b, include_punct, punct_tags).correct_labeled
        cn = sentence_scores(g, n, include_punct, punct_tags).correct_labeled
        tally = groups.setdefault(key(g), [0, 0, 0])
        tally[0 if cn > cb else 1 if cn < cb else 2] += 1
    buckets = []
    for k in sorted(groups):
        better, worse, same = groups[k]
        total = better + worse + same
        buckets.append(Bucket(k, 100 * better / total, 100 * worse / total, 100 * same / total, total))
    return BucketReport(factor, buckets, width if factor == "length" else 1)


# -- tables ----------------------------------------------------------------------------

def format_table(header: Sequence[str], rows: Sequence[Sequence], tsv: bool = False) -> str:
    rows = [[str(c) for c in r] for r in rows]
    if tsv:
        return "".join("\t".join(r) + "\n" for r in [list(header)] + rows)
    widths = [max(len(str(h)), *(len(r[i]) for r in rows)) if rows else len(str(h)) for i, h in enumerate(header)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)
    return "\n".join(lines) + "\n"


def eval_table(results: dict, tsv: bool = False) -> str:
    """``results`` maps a row name to an EvalResult."""
    return format_table(["set", "tokens", "UAS", "LAS"], [[name] + r.row() for name, r in results.items()], tsv)


def label_table(scores: Sequence[LabelScore], tsv: bool = False) -> str:
    rows = [[s.label, s.predicted, s.gold, s.correct, f"{100 * s.precision:.2f}", f"{100 * s.recall:.2f}",
             f"{100 * s.f_score:.2f}"] for s in scores]
    return format_table(["label", "P_L", "G_L", "PG_L", "precision", "recall", "F"], rows, tsv)


def confusion_table(confusion: Counter, tsv: bool = False) -> str:
    rows = [[g, p, n] for (g, p), n in sorted(confusion.items(), key=lambda x: (-x[1], str(x[0])))]
    return format_table(["gold", "predicted", "count"], rows, tsv)


def bucket_table(report: BucketReport, tsv: bool = False) -> str:
    return format_table([report.factor, "better%", "worse%", "no-change%", "sentences"], report.rows(), tsv)
