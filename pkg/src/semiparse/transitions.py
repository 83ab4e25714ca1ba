"""Parser configurations and transition systems.

Two systems are provided:

``arc_standard_swap``
    Arc-standard with a Swap transition for non-projective trees.  The
    artificial root sits at the bottom of the stack from the start and is
    attached last, so a terminal configuration has stack ``[0]`` and an empty
    buffer.
``arc_eager``
    The classic four-transition arc-eager system (projective only).  Tokens
    left without a head when the buffer runs out are attached to the root
    with label ``ROOT`` by :func:`finalize`.
"""
from __future__ import annotations

from enum import IntEnum
from typing import NamedTuple, Optional, Sequence

from .corpus import ROOT, Sentence

ARC_STANDARD = "arc_standard_swap"
ARC_EAGER = "arc_eager"
SYSTEMS = (ARC_STANDARD, ARC_EAGER)
ROOT_LABEL = "ROOT"


class Kind(IntEnum):
    # ordinal order doubles as the tie-break order for equal scores
    SHIFT = 0
    LEFT_ARC = 1
    RIGHT_ARC = 2
    SWAP = 3
    REDUCE = 4


_SHORT = {Kind.SHIFT: "SH", Kind.LEFT_ARC: "LA", Kind.RIGHT_ARC: "RA", Kind.SWAP: "SW", Kind.REDUCE: "RE"}


class Transition(NamedTuple):
    kind: Kind
    label: Optional[str] = None

    def __str__(self) -> str:
        s = _SHORT[self.kind]
        return f"{s}:{self.label}" if self.label is not None else s

    @property
    def is_arc(self) -> bool:
        return self.kind in (Kind.LEFT_ARC, Kind.RIGHT_ARC)

    @classmethod
    def parse(cls, text: str) -> "Transition":
        short, _, label = text.partition(":")
        kind = {v: k for k, v in _SHORT.items()}[short]
        return cls(kind, label or None)


SHIFT = Transition(Kind.SHIFT)
SWAP = Transition(Kind.SWAP)
REDUCE = Transition(Kind.REDUCE)


def LeftArc(label: str) -> Transition:
    return Transition(Kind.LEFT_ARC, label)


def RightArc(label: str) -> Transition:
    return Transition(Kind.RIGHT_ARC, label)


class TransitionError(ValueError):
    """A transition applied where it is not permissible."""


class UnsupportedStructure(ValueError):
    """Gold tree the requested transition system cannot derive."""


class Configuration:
    """Immutable parser state.

    ``heads``/``labels`` are indexed by token position (index 0 is the root,
    whose head stays -1); they encode the arc set.
    """

    __slots__ = ("system", "stack", "buffer", "heads", "labels", "history")

    def __init__(self, system: str, stack: tuple, buffer: tuple, heads: tuple, labels: tuple, history: tuple = ()):
        self.system = system
        self.stack = stack
        self.buffer = buffer
        self.heads = heads
        self.labels = labels
        self.history = history

    def __repr__(self) -> str:
        return f"Configuration({self.system}, stack={list(self.stack)}, buffer={list(self.buffer)}, arcs={sorted(self.arcs)})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return (self.system, self.stack, self.buffer, self.heads, self.labels) == (
            other.system, other.stack, other.buffer, other.heads, other.labels)

    def __hash__(self) -> int:
        return hash((self.system, self.stack, self.buffer, self.heads, self.labels))

    @property
    def n(self) -> int:
        return len(self.heads) - 1

    @property
    def arcs(self) -> frozenset:
        return frozenset((h, d, self.labels[d]) for d, h in enumerate(self.heads) if h >= 0)

    def has_head(self, i: int) -> bool:
        return self.heads[i] >= 0

    def children(self, i: int) -> list:
        return [d for d, h in enumerate(self.heads) if h == i]

    def is_terminal(self) -> bool:
        return get_system(self.system).is_terminal(self)


class ArcStandardSwap:
    name = ARC_STANDARD

    def initial(self, n: int) -> Configuration:
        return Configuration(self.name, (ROOT,), tuple(range(1, n + 1)), (-1,) * (n + 1), (None,) * (n + 1))

    def is_terminal(self, c: Configuration) -> bool:
        return not c.buffer and len(c.stack) == 1

    def permissible(self, c: Configuration, t: Transition) -> bool:
        k = t.kind
        if k == Kind.SHIFT:
            return bool(c.buffer)
        if len(c.stack) < 2:
            return False
        i, j = c.stack[-2], c.stack[-1]
        if k == Kind.LEFT_ARC:
            return i != ROOT and t.label is not None
        if k == Kind.RIGHT_ARC:
            # the root takes its single dependent only at the very end
            return t.label is not None and (i != ROOT or not c.buffer)
        if k == Kind.SWAP:
            return 0 < i < j
        return False

    def candidates(self, c: Configuration, labels: Sequence) -> list:
        """Permissible transitions in tie-break order."""
        out = []
        if c.buffer:
            out.append(SHIFT)
        if len(c.stack) >= 2:
            i, j = c.stack[-2], c.stack[-1]
            if i != ROOT:
                out.extend(Transition(Kind.LEFT_ARC, l) for l in labels)
            if i != ROOT or not c.buffer:
                out.extend(Transition(Kind.RIGHT_ARC, l) for l in labels)
            if 0 < i < j:
                out.append(SWAP)
        return out

    def arc_of(self, c: Configuration, t: Transition):
        """The labelled arc ``t`` would add, or None."""
        if t.kind == Kind.LEFT_ARC:
            return (c.stack[-1], c.stack[-2], t.label)
        if t.kind == Kind.RIGHT_ARC:
            return (c.stack[-2], c.stack[-1], t.label)
        return None

    def apply(self, c: Configuration, t: Transition) -> Configuration:
        if not self.permissible(c, t):
            raise TransitionError(f"{t} not permissible in {c!r}")
        stack, buffer, heads, labels = c.stack, c.buffer, c.heads, c.labels
        k = t.kind
        if k == Kind.SHIFT:
            stack = stack + (buffer[0],)
            buffer = buffer[1:]
        elif k == Kind.SWAP:
            i = stack[-2]
            stack = stack[:-2] + (stack[-1],)
            buffer = (i,) + buffer
        else:
            i, j = stack[-2], stack[-1]
            if k == Kind.LEFT_ARC:
                h, d = j, i
                stack = stack[:-2] + (j,)
            else:
                h, d = i, j
                stack = stack[:-1]
            heads = heads[:d] + (h,) + heads[d + 1:]
            labels = labels[:d] + (t.label,) + labels[d + 1:]
        return Configuration(self.name, stack, buffer, heads, labels, c.history + (t,))

    def focus(self, c: Configuration):
        """(s0, s1): the token pair an arc transition would connect."""
        s = c.stack
        return (s[-1] if s else None, s[-2] if len(s) > 1 else None)

    def oracle(self, sentence: Sentence) -> list:
        heads = [-1] + [t.head for t in sentence]
        labels = [None] + [t.deprel for t in sentence]
        n = len(sentence)
        order = projective_order(heads)
        pending = [0] * (n + 1)
        for d in range(1, n + 1):
            pending[heads[d]] += 1
        c = self.initial(n)
        seq = []
        limit = 4 * (n + 1) ** 2 + 8
        while not self.is_terminal(c):
            if len(seq) > limit:
                raise UnsupportedStructure("oracle failed to terminate")
            t = None
            if len(c.stack) >= 2:
                i, j = c.stack[-2], c.stack[-1]
                if i != ROOT and heads[i] == j and pending[i] == 0:
                    t = LeftArc(labels[i])
                    pending[j] -= 1
                elif (heads[j] == i and pending[j] == 0
                      and all(order[b] > order[j] for b in c.buffer)
                      and (i != ROOT or not c.buffer)):
                    # right attachment waits until no buffered token precedes
                    # the dependent in projective order
                    t = RightArc(labels[j])
                    pending[i] -= 1
                elif i != ROOT and order[j] < order[i]:
                    t = SWAP
            if t is None:
                if not c.buffer:
                    raise UnsupportedStructure(f"oracle stuck at {c!r}")
                t = SHIFT
            seq.append(t)
            c = self.apply(c, t)
        return seq


class ArcEager:
    name = ARC_EAGER

    def initial(self, n: int) -> Configuration:
        return Configuration(self.name, (ROOT,), tuple(range(1, n + 1)), (-1,) * (n + 1), (None,) * (n + 1))

    def is_terminal(self, c: Configuration) -> bool:
        return not c.buffer

    def _root_free(self, c: Configuration) -> bool:
        return ROOT not in c.heads

    def permissible(self, c: Configuration, t: Transition) -> bool:
        k = t.kind
        if not c.buffer:
            return False
        if k == Kind.SHIFT:
            return True
        if k == Kind.SWAP:
            return False
        if not c.stack:
            return False
        s0 = c.stack[-1]
        if k == Kind.LEFT_ARC:
            return s0 != ROOT and not c.has_head(s0) and t.label is not None
        if k == Kind.RIGHT_ARC:
            return t.label is not None and (s0 != ROOT or self._root_free(c))
        if k == Kind.REDUCE:
            return s0 != ROOT and c.has_head(s0)
        return False

    def candidates(self, c: Configuration, labels: Sequence) -> list:
        if not c.buffer:
            return []
        out = [SHIFT]
        if c.stack:
            s0 = c.stack[-1]
            if s0 != ROOT and not c.has_head(s0):
                out.extend(Transition(Kind.LEFT_ARC, l) for l in labels)
            if s0 != ROOT or self._root_free(c):
                out.extend(Transition(Kind.RIGHT_ARC, l) for l in labels)
            if s0 != ROOT and c.has_head(s0):
                out.append(REDUCE)
        return out

    def arc_of(self, c: Configuration, t: Transition):
        if t.kind == Kind.LEFT_ARC:
            return (c.buffer[0], c.stack[-1], t.label)
        if t.kind == Kind.RIGHT_ARC:
            return (c.stack[-1], c.buffer[0], t.label)
        return None

    def apply(self, c: Configuration, t: Transition) -> Configuration:
        if not self.permissible(c, t):
            raise TransitionError(f"{t} not permissible in {c!r}")
        stack, buffer, heads, labels = c.stack, c.buffer, c.heads, c.labels
        k = t.kind
        if k == Kind.SHIFT:
            stack = stack + (buffer[0],)
            buffer = buffer[1:]
        elif k == Kind.REDUCE:
            stack = stack[:-1]
        else:
            s0, b0 = stack[-1], buffer[0]
            if k == Kind.LEFT_ARC:
                h, d = b0, s0
                stack = stack[:-1]
            else:
                h, d = s0, b0
                stack = stack + (b0,)
                buffer = buffer[1:]
            heads = heads[:d] + (h,) + heads[d + 1:]
            labels = labels[:d] + (t.label,) + labels[d + 1:]
        return Configuration(self.name, stack, buffer, heads, labels, c.history + (t,))

    def focus(self, c: Configuration):
        # b0 plays the role of s0: LeftArc makes it the head, RightArc the dependent
        return (c.buffer[0] if c.buffer else None, c.stack[-1] if c.stack else None)

    def oracle(self, sentence: Sentence) -> list:
        heads = [-1] + [t.head for t in sentence]
        labels = [None] + [t.deprel for t in sentence]
        if not sentence.is_projective():
            raise UnsupportedStructure("arc-eager cannot derive a non-projective tree")
        n = len(sentence)
        pending = [0] * (n + 1)
        for d in range(1, n + 1):
            pending[heads[d]] += 1
        c = self.initial(n)
        seq = []
        while not self.is_terminal(c):
            s0, b0 = c.stack[-1], c.buffer[0]
            if s0 != ROOT and heads[s0] == b0:
                t = LeftArc(labels[s0])
                pending[b0] -= 1
            elif heads[b0] == s0:
                t = RightArc(labels[b0])
                pending[s0] -= 1
            elif s0 != ROOT and c.has_head(s0) and pending[s0] == 0:
                t = REDUCE
            else:
                t = SHIFT
            seq.append(t)
            c = self.apply(c, t)
        return seq


_SYSTEMS = {ARC_STANDARD: ArcStandardSwap(), ARC_EAGER: ArcEager()}


def inventory(system: str, labels: Sequence) -> list:
    """Every transition of a system over a label set, in tie-break order."""
    labels = sorted(labels)
    out = [SHIFT] + [LeftArc(l) for l in labels] + [RightArc(l) for l in labels]
    out.append(SWAP if system == ARC_STANDARD else REDUCE)
    return out


def get_system(name: str):
    try:
        return _SYSTEMS[name]
    except KeyError:
        raise ValueError(f"unknown transition system {name!r}; expected one of {SYSTEMS}") from None


def initial_configuration(sentence, system: str = ARC_STANDARD) -> Configuration:
    n = sentence if isinstance(sentence, int) else len(sentence)
    return get_system(system).initial(n)


def permissible(config: Configuration, transition: Transition) -> bool:
    return get_system(config.system).permissible(config, transition)


def apply(config: Configuration, transition: Transition) -> Configuration:
    return get_system(config.system).apply(config, transition)


def finalize(config: Configuration):
    """Final (heads, labels) lists, 1-based, for a terminal configuration."""
    heads = list(config.heads[1:])
    labels = list(config.labels[1:])
    if config.system == ARC_EAGER:
        for d in range(len(heads)):
            if heads[d] < 0:
                heads[d] = ROOT
                labels[d] = ROOT_LABEL
    return heads, labels


def oracle_sequence(sentence: Sentence, system: str = ARC_STANDARD) -> list:
    """Static oracle: a transition sequence that derives the sentence's gold tree."""
    sentence.validate()
    return get_system(system).oracle(sentence)


def replay(sentence, transitions: Sequence, system: str = ARC_STANDARD) -> Configuration:
    c = initial_configuration(sentence, system)
    sys_ = get_system(system)
    for t in transitions:
        c = sys_.apply(c, t)
    return c


def projective_order(heads: Sequence) -> list:
    """Position of every token (root first) in an inorder traversal of the tree.

    ``heads[0]`` is the root placeholder and is ignored.
    """
    n = len(heads) - 1
    kids = [[] for _ in range(n + 1)]
    for d in range(1, n + 1):
        kids[heads[d]].append(d)
    order = [0] * (n + 1)
    counter = 0
    # iterative inorder: left children, node, right children
    stack = [(ROOT, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order[node] = counter
            counter += 1
            continue
        left = [k for k in kids[node] if k < node]
        right = [k for k in kids[node] if k > node]
        for k in reversed(right):
            stack.append((k, False))
        stack.append((node, True))
        for k in reversed(left):
            stack.append((k, False))
    return order
