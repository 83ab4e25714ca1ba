"""Feature templates and hashed binary feature vectors.

Every feature is a string ``"<template-id>=<attr>|<attr>..."`` conjoined with
the candidate transition and hashed with 64-bit FNV-1a, masked to the model's
hash width.  FNV-1a is a streaming hash, so the configuration part is hashed
once and the transition bytes are folded into that state afterwards; the
result equals hashing the full concatenation.
"""
from __future__ import annotations

from collections import Counter
from functools import lru_cache
from typing import Sequence

import numpy as np

from .corpus import ROOT
from .transitions import Configuration, Transition, get_system

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1

NONE = "<none>"
ROOT_UNIT = "<root>"

FeatureVector = Counter  # hashed id -> count

# ordered template registries; the id is the position-independent name
BASE_TEMPLATES = (
    "bias",
    "s0w", "s0p", "s1w", "s1p", "s2w", "s2p",
    "b0w", "b0p", "b1w", "b1p", "b2w", "b2p",
    "s0w.s1w", "s0p.s1p", "s0w.s1p", "s0p.s1w",
    "s0w.b0w", "s0p.b0p", "s0w.b0p", "s0p.b0w",
    "s1p.s0p.b0p", "s0p.b0p.b1p",
    "s0lc", "s0rc", "s1lc", "s1rc", "b0lc",
    "s0p.s1p.dist",
    "s0p.val", "s1p.val",
)
_LEXICAL = {"s0w", "s1w", "s2w", "b0w", "b1w", "b2w",
            "s0w.s1w", "s0w.s1p", "s0p.s1w", "s0w.b0w", "s0w.b0p", "s0p.b0w"}

TEMPLATE_SETS = {
    "full": BASE_TEMPLATES,
    # word-blind set: scores depend on tags and structure only
    "delex": tuple(t for t in BASE_TEMPLATES if t not in _LEXICAL),
}

DLM_TEMPLATES = ("", "s0p", "s0w", "s1p", "s1w", "s0p.s1p", "s0w.s1w")


def fnv1a(data: bytes, state: int = FNV_OFFSET) -> int:
    h = state
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


@lru_cache(maxsize=1 << 20)
def feature_state(feature: str) -> int:
    return fnv1a(feature.encode("utf-8"))


@lru_cache(maxsize=1 << 21)
def conjoined(state: int, transition: str) -> int:
    return fnv1a(b"\x1f" + transition.encode("utf-8"), state)


def feature_id(feature: str, transition: str, hash_bits: int) -> int:
    """Hashed id of a configuration feature conjoined with a transition."""
    return conjoined(feature_state(feature), transition) & ((1 << hash_bits) - 1)


def _dist_bucket(d: int) -> str:
    if d <= 4:
        return str(d)
    return "5-9" if d < 10 else "10+"


def config_features(c: Configuration, sentence, templates: Sequence = BASE_TEMPLATES) -> list:
    """Configuration feature strings (not yet conjoined with a transition)."""
    forms, tags = _columns(sentence)
    st, bf = c.stack, c.buffer
    s0 = st[-1] if len(st) > 0 else None
    s1 = st[-2] if len(st) > 1 else None
    s2 = st[-3] if len(st) > 2 else None
    b0 = bf[0] if len(bf) > 0 else None
    b1 = bf[1] if len(bf) > 1 else None
    b2 = bf[2] if len(bf) > 2 else None

    w0, w1, w2 = _at(forms, s0), _at(forms, s1), _at(forms, s2)
    p0, p1, p2 = _at(tags, s0), _at(tags, s1), _at(tags, s2)
    wb0, wb1, wb2 = _at(forms, b0), _at(forms, b1), _at(forms, b2)
    pb0, pb1, pb2 = _at(tags, b0), _at(tags, b1), _at(tags, b2)

    # one pass over the arcs for leftmost/rightmost children and valency
    heads, labels = c.heads, c.labels
    focus = {i for i in (s0, s1, b0) if i is not None}
    lm: dict = {}
    rm: dict = {}
    nl: dict = {}
    nr: dict = {}
    for d, h in enumerate(heads):
        if h in focus:
            if h not in lm:
                lm[h] = d
            rm[h] = d
            if d < h:
                nl[h] = nl.get(h, 0) + 1
            else:
                nr[h] = nr.get(h, 0) + 1

    def edge(i, table):
        d = table.get(i)
        return NONE if d is None else f"{tags[d]}/{labels[d]}"

    def valency(i):
        return NONE if i is None else f"{nl.get(i, 0)}/{nr.get(i, 0)}"

    dist = NONE if s0 is None or s1 is None else _dist_bucket(abs(s0 - s1))
    vals = {
        "bias": "",
        "s0w": w0, "s0p": p0, "s1w": w1, "s1p": p1, "s2w": w2, "s2p": p2,
        "b0w": wb0, "b0p": pb0, "b1w": wb1, "b1p": pb1, "b2w": wb2, "b2p": pb2,
        "s0w.s1w": f"{w0}|{w1}", "s0p.s1p": f"{p0}|{p1}", "s0w.s1p": f"{w0}|{p1}", "s0p.s1w": f"{p0}|{w1}",
        "s0w.b0w": f"{w0}|{wb0}", "s0p.b0p": f"{p0}|{pb0}", "s0w.b0p": f"{w0}|{pb0}", "s0p.b0w": f"{p0}|{wb0}",
        "s1p.s0p.b0p": f"{p1}|{p0}|{pb0}", "s0p.b0p.b1p": f"{p0}|{pb0}|{pb1}",
        "s0lc": edge(s0, lm), "s0rc": edge(s0, rm), "s1lc": edge(s1, lm), "s1rc": edge(s1, rm),
        "b0lc": edge(b0, lm),
        "s0p.s1p.dist": f"{p0}|{p1}|{dist}",
        "s0p.val": f"{p0}|{valency(s0)}", "s1p.val": f"{p1}|{valency(s1)}",
    }
    try:
        return [f"{name}={vals[name]}" for name in templates]
    except KeyError as exc:
        raise KeyError(f"unknown feature template {exc.args[0]!r}") from None


def _at(column, i):
    return NONE if i is None else column[i]


def _columns(sentence):
    """(forms, tags) lists with the root at index 0; cached on the sentence."""
    cached = getattr(sentence, "_feature_columns", None)
    if cached is not None:
        return cached
    forms = [ROOT_UNIT] + [t.form for t in sentence]
    tags = [ROOT_UNIT] + [t.pos if t.pos is not None else NONE for t in sentence]
    cols = (forms, tags)
    try:
        object.__setattr__(sentence, "_feature_columns", cols)
    except AttributeError:
        pass
    return cols


def dlm_features(c: Configuration, t: Transition, sentence, tables) -> list:
    """DLM template strings for an arc candidate, seven per attached table."""
    from .dlm import classify_for_configuration

    if not tables or not t.is_arc:
        return []
    forms, tags = _columns(sentence)
    s0, s1 = get_system(c.system).focus(c)
    label = str(t)
    out = []
    for no, phi0, phi1 in classify_for_configuration(tables, c, sentence, t):
        base = f"dlm{no}={phi0}|{phi1}|{label}"
        attrs = {
            "": "",
            "s0p": tags[s0], "s0w": forms[s0], "s1p": tags[s1], "s1w": forms[s1],
            "s0p.s1p": f"{tags[s0]}|{tags[s1]}", "s0w.s1w": f"{forms[s0]}|{forms[s1]}",
        }
        for name in DLM_TEMPLATES:
            out.append(f"{base}#{name}={attrs[name]}" if name else base)
    return out


def extract_features(config: Configuration, transition: Transition, sentence, model) -> FeatureVector:
    """Hashed feature vector of one (configuration, candidate transition) pair."""
    return FeatureVector(step_ids(config, [transition], sentence, model)[0])


def id_matrix(config: Configuration, sentence, model) -> np.ndarray:
    """Hashed ids of every configuration feature (rows) under every transition of
    the model's inventory (columns)."""
    cache = model.id_cache
    rows = []
    for f in config_features(config, sentence, model.templates):
        st = feature_state(f)
        row = cache.get(st)
        if row is None:
            mask = (1 << model.hash_bits) - 1
            row = np.array([conjoined(st, name) & mask for name in model.transition_names], dtype=np.int64)
            cache[st] = row
        rows.append(row)
    return np.array(rows)


def dlm_ids(config: Configuration, transition: Transition, sentence, model) -> list:
    mask = (1 << model.hash_bits) - 1
    # DLM strings already carry the transition, so no further conjunction
    return [feature_state(f) & mask for f in dlm_features(config, transition, sentence, model.dlm_tables)]


def step_ids(config: Configuration, transitions: Sequence, sentence, model) -> list:
    """Hashed feature ids for each candidate transition of one configuration."""
    mat = id_matrix(config, sentence, model)
    out = []
    for t in transitions:
        ids = mat[:, model.transition_index[t]].tolist()
        if model.dlm_tables and t.is_arc:
            ids.extend(dlm_ids(config, t, sentence, model))
        out.append(ids)
    return out


def is_dlm_feature(feature: str) -> bool:
    return feature.startswith("dlm")
