"""N-gram dependency language models over auto-parsed corpora.

For a child ``x_ch`` of head ``x_h`` the history is the head plus the N-1
previous children on the same side, i.e. the siblings between the child and
the head, listed nearest-to-the-child first.  Relative-frequency estimates
are filtered by a minimum count, sorted into one global list and replaced by
coarse classes: the top 10% become PH, up to 30% PM, the rest PL.  Events
missing from the table are classed PO at lookup time.
"""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .corpus import ROOT, Sentence

PH, PM, PL, PO = "PH", "PM", "PL", "PO"
PAD = "<s>"
ROOT_UNIT = "<root>"
UNIT_SCHEMES = ("form", "pos", "form_pos")
_HEADER = "#dlm"


class DlmKey(NamedTuple):
    head: str
    context: tuple  # N-1 previous children, nearest to the child first
    side: str  # "L" or "R"


def unit(sentence: Sentence, i: int, scheme: str) -> str:
    if i == ROOT:
        return ROOT_UNIT
    tok = sentence[i - 1]
    pos = tok.pos or "_"
    if scheme == "form":
        return tok.form.lower()
    if scheme == "pos":
        return pos
    if scheme == "form_pos":
        return f"{tok.form.lower()}/{pos}"
    raise ValueError(f"unknown unit scheme {scheme!r}; expected one of {UNIT_SCHEMES}")


@dataclass
class DlmTable:
    order: int
    min_count: int = 3
    scheme: str = "form"
    entries: dict = field(default_factory=dict)  # (DlmKey, child) -> class
    # sorted entry list (key, child, probability); empty for loaded tables
    ranked: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, key: DlmKey, child: str) -> str:
        return self.entries.get((key, child), PO)

    def class_sizes(self) -> Counter:
        return Counter(self.entries.values())

    def dumps(self) -> str:
        lines = [f"{_HEADER}\torder={self.order}\tmin_count={self.min_count}\tunits={self.scheme}"]
        for (key, child), cls in self.entries.items():
            ctx = "|".join(key.context) if key.context else "_"
            lines.append(f"{self.order}\t{key.side}\t{key.head}\t{ctx}\t{child}\t{cls}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "DlmTable":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(_HEADER):
            raise ValueError("missing DLM header line")
        meta = dict(part.split("=", 1) for part in lines[0].split("\t")[1:])
        table = cls(order=int(meta["order"]), min_count=int(meta["min_count"]), scheme=meta["units"])
        for lineno, line in enumerate(lines[1:], 2):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise ValueError(f"DLM line {lineno}: expected 6 fields, got {len(parts)}")
            _, side, head, ctx, child, klass = parts
            context = () if ctx == "_" else tuple(ctx.split("|"))
            table.entries[(DlmKey(head, context, side), child)] = klass
        return table

    @classmethod
    def load(cls, path) -> "DlmTable":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read())


def history(children: Sequence, k: int, n_context: int) -> tuple:
    """Context for the k-th child (0-based, ordered outward from the head)."""
    ctx = [children[k - m] if k - m >= 0 else PAD for m in range(1, n_context + 1)]
    return tuple(ctx)


def count_events(corpus: Iterable[Sentence], order: int, scheme: str = "form") -> Counter:
    """Counts of (DlmKey, child) events; mergeable by Counter addition."""
    counts: Counter = Counter()
    for sent in corpus:
        kids = defaultdict(list)
        for tok in sent:
            if tok.head is not None:
                kids[tok.head].append(tok.index)
        for h, ch in kids.items():
            hu = unit(sent, h, scheme)
            left = sorted((d for d in ch if d < h), reverse=True)  # outward from the head
            right = sorted(d for d in ch if d > h)
            for side, seq in (("L", left), ("R", right)):
                units = [unit(sent, d, scheme) for d in seq]
                for k, u in enumerate(units):
                    counts[(DlmKey(hu, history(units, k, order - 1), side), u)] += 1
    return counts


def extract_dlm(corpus: Iterable[Sentence], order: int = 2, min_count: int = 3, scheme: str = "form") -> DlmTable:
    if order < 1:
        raise ValueError(f"DLM order must be >= 1, got {order}")
    if scheme not in UNIT_SCHEMES:
        raise ValueError(f"unknown unit scheme {scheme!r}; expected one of {UNIT_SCHEMES}")
    return build_table(count_events(corpus, order, scheme), order, min_count, scheme)


def build_table(counts: Counter, order: int, min_count: int = 3, scheme: str = "form") -> DlmTable:
    """Estimate, filter and classify counted events."""
    totals: Counter = Counter()
    for (key, _), c in counts.items():
        totals[key] += c
    kept = [(key, child, c / totals[key]) for (key, child), c in counts.items() if c >= min_count]
    # probability descending, then a total order on the event for determinism
    kept.sort(key=lambda e: (-e[2], e[0].side, e[0].head, e[0].context, e[1]))
    table = DlmTable(order=order, min_count=min_count, scheme=scheme, ranked=kept)
    m = len(kept)
    if not m:
        return table
    # integer ceilings: ceil(0.1 m) and ceil(0.3 m)
    cut_h = (m * 10 + 99) // 100
    cut_m = (m * 30 + 99) // 100
    p_h = kept[cut_h - 1][2]
    p_m = kept[cut_m - 1][2]
    for key, child, p in kept:
        # entries tied with a boundary entry take the better class
        table.entries[(key, child)] = PH if p >= p_h else PM if p >= p_m else PL
    return table


def lookup_class(table: DlmTable, key: DlmKey, child: str) -> str:
    return table.lookup(key, child)


def attached_context(config, head: int, child: int, n_context: int, sentence: Sentence, scheme: str) -> tuple:
    """Context of ``child`` under ``head`` from children already attached in ``config``."""
    if child < head:
        sibs = sorted((d for d, h in enumerate(config.heads) if h == head and child < d < head), reverse=True)
    else:
        sibs = sorted(d for d, h in enumerate(config.heads) if h == head and head < d < child)
    # sibs run outward from the head; the nearest to the child comes last
    units = [unit(sentence, d, scheme) for d in sibs]
    ctx = list(reversed(units))[:n_context]
    return tuple(ctx + [PAD] * (n_context - len(ctx)))


def child_class(table: DlmTable, config, head: int, child: int, sentence: Sentence) -> str:
    if head is None or child is None or child == ROOT:
        return PO
    side = "L" if child < head else "R"
    ctx = attached_context(config, head, child, table.order - 1, sentence, table.scheme)
    key = DlmKey(unit(sentence, head, table.scheme), ctx, side)
    return table.lookup(key, unit(sentence, child, table.scheme))


def classify_for_configuration(tables: Sequence, config, sentence: Sentence, candidate) -> list:
    """(table index, class of s0 under s1, class of s1 under s0) per attached table.

    Each focus token is classed as the next child of its partner, so both
    attachment directions are described whichever arc the candidate makes.
    """
    from .transitions import get_system

    if not tables or not candidate.is_arc:
        return []
    s0, s1 = get_system(config.system).focus(config)
    return [(no, child_class(t, config, s1, s0, sentence), child_class(t, config, s0, s1, sentence))
            for no, t in enumerate(tables)]
