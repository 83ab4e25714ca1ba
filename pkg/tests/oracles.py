"""Independent reference implementations used as test oracles.

Nothing here goes through the beam decoder or the cached id matrix: scores
are recomputed from feature strings, and search is exhaustive.
"""
from __future__ import annotations

import math
import random
import time
from functools import lru_cache

import numpy as np

from semiparse.corpus import Sentence, Token
from semiparse.features import config_features, dlm_features, feature_id, feature_state
from semiparse.model import WeightModel
from semiparse.transitions import finalize, get_system


def random_heads(n: int, rng: random.Random) -> list:
    """Uniform-ish random tree: tokens join in random order under an earlier one."""
    order = list(range(1, n + 1))
    rng.shuffle(order)
    heads = [0] * (n + 1)
    placed = [order[0]]
    for d in order[1:]:
        heads[d] = rng.choice(placed)
        placed.append(d)
    return heads[1:]


def random_tree(n: int, rng: random.Random, labels=("A", "B", "C"), tags=("N", "V", "D")) -> Sentence:
    heads = random_heads(n, rng)
    toks = []
    for i, h in enumerate(heads, 1):
        lab = "ROOT" if h == 0 else rng.choice(labels)
        toks.append(Token(i, f"w{rng.randrange(5)}", rng.choice(tags), h, lab))
    return Sentence(tuple(toks))


def random_sentence(n: int, rng: random.Random, tags=("N", "V", "D")) -> Sentence:
    return Sentence(tuple(Token(i, f"w{rng.randrange(6)}", rng.choice(tags)) for i in range(1, n + 1)))


def random_model(labels, system: str, rng: np.random.Generator, hash_bits: int = 12, templates: str = "full"):
    m = WeightModel(labels, system, hash_bits, templates)
    m.weights = rng.normal(size=1 << hash_bits)
    m.use_averaged = False
    return m


def brute_tree_check(heads) -> bool:
    """Single root dependent, every token reaches 0 without revisiting a node."""
    n = len(heads)
    if any(not 0 <= h <= n for h in heads) or any(h == i for i, h in enumerate(heads, 1)):
        return False
    if sum(1 for h in heads if h == 0) != 1:
        return False
    for start in range(1, n + 1):
        seen = set()
        cur = start
        while cur != 0:
            if cur in seen:
                return False
            seen.add(cur)
            cur = heads[cur - 1]
    return True


def brute_projective(heads) -> bool:
    arcs = [(min(h, d), max(h, d)) for d, h in enumerate(heads, 1)]
    for a, b in arcs:
        for c, d in arcs:
            if a < c < b < d:
                return False
    return True


def step_score(model, config, transition, sentence) -> float:
    """Score of one transition recomputed from feature strings."""
    name = str(transition)
    w = model.active
    total = 0.0
    for f in config_features(config, sentence, model.templates):
        total += w[feature_id(f, name, model.hash_bits)]
    mask = (1 << model.hash_bits) - 1
    for f in dlm_features(config, transition, sentence, model.dlm_tables):
        total += w[feature_state(f) & mask]
    return float(total)


def exhaustive_best(sentence: Sentence, model, forbidden=None, cache=None, deadline=None):
    """(best total score, transitions of the argmax sequence) over every
    complete transition sequence; ``forbidden`` excludes a labelled edge.

    ``cache`` may be shared between calls on the same sentence and model to
    reuse step scores; past ``deadline`` (a ``time.monotonic`` value) the
    search raises ``TimeoutError``.
    """
    sys_ = get_system(model.system)
    cache = {} if cache is None else cache

    def key(c):
        return (c.stack, c.buffer, c.heads, c.labels)

    memo = {}

    def best(c):
        k = key(c)
        if k in memo:
            return memo[k]
        if sys_.is_terminal(c):
            if forbidden is not None:
                heads, labels = finalize(c)
                arcs = {(h, d, l) for d, (h, l) in enumerate(zip(heads, labels), 1)}
                if forbidden in arcs:
                    memo[k] = (-math.inf, ())
                    return memo[k]
            memo[k] = (0.0, ())
            return memo[k]
        if deadline is not None and time.monotonic() > deadline:
            raise TimeoutError("exhaustive search ran past its deadline")
        out = (-math.inf, ())
        for t in sys_.candidates(c, model.labels):
            if forbidden is not None and sys_.arc_of(c, t) == forbidden:
                continue
            sk = (k, t)
            if sk not in cache:
                cache[sk] = step_score(model, c, t, sentence)
            s = cache[sk]
            rest, seq = best(sys_.apply(c, t))
            if s + rest > out[0]:
                out = (s + rest, (t,) + seq)
        memo[k] = out
        return out

    return best(sys_.initial(len(sentence)))
