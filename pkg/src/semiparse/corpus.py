"""CoNLL treebank reading/writing and corpus statistics.

Two layouts are understood:

* ``conll06`` -- the 10-column CoNLL-X layout
  (ID FORM LEMMA CPOSTAG POSTAG FEATS HEAD DEPREL PHEAD PDEPREL)
* ``conll09`` -- the 14+-column CoNLL-2009 layout
  (ID FORM LEMMA PLEMMA POS PPOS FEAT PFEAT HEAD PHEAD DEPREL PDEPREL FILLPRED PRED ...)

An underscore marks an absent value.  Columns the toolkit does not interpret
are kept verbatim so that a read/write round trip reproduces the file.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Sequence, TextIO

ROOT = 0


class ConllError(ValueError):
    """Malformed CoNLL input; carries the 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class TreeError(ValueError):
    """Head assignments that do not form a single tree rooted at 0."""


@dataclass(frozen=True)
class ConllFormat:
    name: str
    min_columns: int
    form: int
    lemma: int
    pos: int
    head: int
    deprel: int


FORMATS = {
    "conll06": ConllFormat("conll06", 10, form=1, lemma=2, pos=4, head=6, deprel=7),
    "conll09": ConllFormat("conll09", 14, form=1, lemma=2, pos=4, head=8, deprel=10),
    # predicted-annotation columns of the 2009 layout
    "conll09p": ConllFormat("conll09p", 14, form=1, lemma=3, pos=5, head=9, deprel=11),
}


def get_format(fmt) -> ConllFormat:
    if isinstance(fmt, ConllFormat):
        return fmt
    try:
        return FORMATS[fmt]
    except KeyError:
        raise ValueError(f"unknown CoNLL format {fmt!r}; expected one of {sorted(FORMATS)}") from None


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    pos: Optional[str] = None
    head: Optional[int] = None
    deprel: Optional[str] = None
    lemma: Optional[str] = None
    # raw column strings of the source row, kept for faithful rewriting
    columns: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.index < 1:
            raise TreeError(f"token index must be >= 1, got {self.index}")
        if not self.form:
            raise TreeError(f"token {self.index} has an empty form")
        if self.head is not None:
            if self.head < 0:
                raise TreeError(f"token {self.index} has negative head {self.head}")
            if self.head == self.index:
                raise TreeError(f"token {self.index} is its own head")


@dataclass(frozen=True)
class Sentence:
    """An ordered token sequence; position 0 is the implicit artificial root."""

    tokens: tuple

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        n = len(self.tokens)
        for i, tok in enumerate(self.tokens, 1):
            if tok.index != i:
                raise TreeError(f"token at position {i} has index {tok.index}")
            if tok.head is not None and tok.head > n:
                raise TreeError(f"token {i} has head {tok.head} outside [0, {n}]")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @property
    def forms(self) -> list:
        return [t.form for t in self.tokens]

    @property
    def heads(self) -> list:
        return [t.head for t in self.tokens]

    @property
    def deprels(self) -> list:
        return [t.deprel for t in self.tokens]

    def is_annotated(self) -> bool:
        return all(t.head is not None for t in self.tokens)

    def arcs(self) -> frozenset:
        """Labelled arcs as (head, dependent, label) triples."""
        return frozenset((t.head, t.index, t.deprel) for t in self.tokens if t.head is not None)

    def with_arcs(self, heads: Sequence, labels: Sequence) -> "Sentence":
        """Copy of this sentence with heads/labels replaced (1-based lists of length n)."""
        if len(heads) != len(self.tokens) or len(labels) != len(self.tokens):
            raise ValueError("head/label list length does not match sentence length")
        return Sentence(tuple(replace(t, head=h, deprel=l) for t, h, l in zip(self.tokens, heads, labels)))

    def stripped(self) -> "Sentence":
        """Copy with all head/label annotation removed."""
        return Sentence(tuple(replace(t, head=None, deprel=None) for t in self.tokens))

    def validate(self) -> None:
        """Raise TreeError unless the heads form a single tree rooted at 0 with one root child."""
        check_tree([t.head for t in self.tokens])

    def is_projective(self) -> bool:
        return is_projective([t.head for t in self.tokens])


def check_tree(heads: Sequence) -> None:
    n = len(heads)
    roots = []
    for d, h in enumerate(heads, 1):
        if h is None:
            raise TreeError(f"token {d} has no head")
        if h < 0 or h > n:
            raise TreeError(f"token {d} has head {h} outside [0, {n}]")
        if h == d:
            raise TreeError(f"token {d} is its own head")
        if h == ROOT:
            roots.append(d)
    if n and len(roots) != 1:
        raise TreeError(f"expected exactly one root dependent, found {len(roots)}")
    # every token must reach the root; state 1 = on current path, 2 = known good
    state = [0] * (n + 1)
    state[ROOT] = 2
    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            raise TreeError(f"cycle through token {node}")
        for p in path:
            state[p] = 2


def is_tree(heads: Sequence) -> bool:
    try:
        check_tree(heads)
    except TreeError:
        return False
    return True


def is_projective(heads: Sequence) -> bool:
    arcs = [(min(h, d), max(h, d)) for d, h in enumerate(heads, 1)]
    for a, b in arcs:
        for c, e in arcs:
            if a < c < b < e:
                return False
    return True


def _field(value: str) -> Optional[str]:
    return None if value == "_" else value


def _parse_row(cols: list, fmt: ConllFormat, lineno: int) -> Token:
    if len(cols) < fmt.min_columns or (fmt.min_columns == 10 and len(cols) != 10):
        raise ConllError(f"expected {fmt.min_columns} columns for {fmt.name}, got {len(cols)}", lineno)
    try:
        index = int(cols[0])
    except ValueError:
        raise ConllError(f"non-integer token id {cols[0]!r}", lineno) from None
    head_s = cols[fmt.head]
    if head_s == "_":
        head = None
    else:
        try:
            head = int(head_s)
        except ValueError:
            raise ConllError(f"non-integer head {head_s!r}", lineno) from None
    try:
        return Token(
            index=index,
            form=cols[fmt.form],
            pos=_field(cols[fmt.pos]),
            head=head,
            deprel=_field(cols[fmt.deprel]),
            lemma=_field(cols[fmt.lemma]),
            columns=tuple(cols),
        )
    except TreeError as exc:
        raise ConllError(str(exc), lineno) from None


def iter_conll(stream: TextIO, fmt="conll09") -> Iterator[Sentence]:
    fmt = get_format(fmt)
    rows: list = []
    first_line = None
    for lineno, line in enumerate(stream, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            if rows:
                yield _make_sentence(rows, first_line)
                rows = []
            continue
        if not rows:
            first_line = lineno
        rows.append(_parse_row(line.split("\t"), fmt, lineno))
    if rows:
        yield _make_sentence(rows, first_line)


def _make_sentence(rows: list, first_line: int) -> Sentence:
    try:
        return Sentence(tuple(rows))
    except TreeError as exc:
        raise TreeError(f"sentence starting at line {first_line}: {exc}") from None


def read_conll(stream, fmt="conll09") -> list:
    """Read all sentences from a text stream or a path."""
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        with open(stream, encoding="utf-8") as fh:
            return list(iter_conll(fh, fmt))
    return list(iter_conll(stream, fmt))


def _row(tok: Token, fmt: ConllFormat) -> str:
    width = max(fmt.min_columns, len(tok.columns))
    cols = list(tok.columns) + ["_"] * (width - len(tok.columns))
    cols[0] = str(tok.index)
    cols[fmt.form] = tok.form
    cols[fmt.lemma] = tok.lemma if tok.lemma is not None else "_"
    cols[fmt.pos] = tok.pos if tok.pos is not None else "_"
    cols[fmt.head] = str(tok.head) if tok.head is not None else "_"
    cols[fmt.deprel] = tok.deprel if tok.deprel is not None else "_"
    return "\t".join(c if c != "" else "_" for c in cols)


def write_conll(sentences: Iterable[Sentence], stream: Optional[TextIO] = None, fmt="conll09"):
    """Write sentences; returns the text when no stream is given."""
    fmt = get_format(fmt)
    out = stream if stream is not None else io.StringIO()
    for sent in sentences:
        for tok in sent.tokens:
            out.write(_row(tok, fmt))
            out.write("\n")
        out.write("\n")
    if stream is None:
        return out.getvalue()
    return None


def save_conll(sentences: Iterable[Sentence], path, fmt="conll09") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_conll(sentences, fh, fmt)


def make_sentence(forms: Sequence, pos: Sequence = None, heads: Sequence = None, labels: Sequence = None) -> Sentence:
    """Build a sentence from parallel lists (convenience for tests and synthetic data)."""
    n = len(forms)
    pos = pos if pos is not None else [None] * n
    heads = heads if heads is not None else [None] * n
    labels = labels if labels is not None else [None] * n
    return Sentence(tuple(Token(i + 1, forms[i], pos[i], heads[i], labels[i]) for i in range(n)))


@dataclass(frozen=True)
class CorpusStats:
    sentences: int
    tokens: int
    average_length: float
    vocabulary: frozenset

    def row(self) -> str:
        return f"{self.sentences}\t{self.tokens}\t{self.average_length:.2f}"


def corpus_stats(sentences: Iterable[Sentence]) -> CorpusStats:
    n_sent = 0
    n_tok = 0
    vocab = set()
    for s in sentences:
        n_sent += 1
        n_tok += len(s)
        vocab.update(s.forms)
    avg = n_tok / n_sent if n_sent else 0.0
    return CorpusStats(n_sent, n_tok, avg, frozenset(vocab))
