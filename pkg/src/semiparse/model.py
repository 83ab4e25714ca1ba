"""Hashed linear model, passive-aggressive learner and the model file."""
from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .corpus import Sentence
from .features import TEMPLATE_SETS, FeatureVector, step_ids
from .transitions import ARC_STANDARD, Transition, UnsupportedStructure, get_system, inventory, oracle_sequence

log = logging.getLogger(__name__)

MAGIC = b"SEMIPRSR"
VERSION = 1
DEFAULT_HASH_BITS = 22


class ModelFormatError(ValueError):
    pass


class WeightModel:
    """Weights over 2**hash_bits hashed features plus model metadata.

    Decoding uses the averaged weights when they exist and ``use_averaged``
    is set; training always decodes with the raw weights.
    """

    def __init__(self, labels: Sequence, system: str = ARC_STANDARD, hash_bits: int = DEFAULT_HASH_BITS,
                 templates: str = "full"):
        if not labels:
            raise ValueError("label inventory must not be empty")
        get_system(system)
        if templates not in TEMPLATE_SETS:
            raise ValueError(f"unknown template set {templates!r}; expected one of {sorted(TEMPLATE_SETS)}")
        self.labels = tuple(sorted(set(labels)))
        self.system = system
        self.hash_bits = hash_bits
        self.template_set = templates
        self.weights = np.zeros(1 << hash_bits)
        self.averaged: Optional[np.ndarray] = None
        self.use_averaged = True
        self.dlm_attachments: list = []  # (path, index) descriptors
        self.dlm_tables: list = []
        self.transitions = inventory(system, self.labels)
        self.transition_names = [str(t) for t in self.transitions]
        self.transition_index = {t: i for i, t in enumerate(self.transitions)}
        # feature hash state -> ids under every transition; cheap to rebuild
        self.id_cache: dict = {}
        # averaging accumulators
        self._acc: Optional[np.ndarray] = None
        self._instances = 0

    def __getstate__(self):
        state = self.__dict__.copy()
        state["id_cache"] = {}
        return state

    @property
    def templates(self):
        return TEMPLATE_SETS[self.template_set]

    @property
    def active(self) -> np.ndarray:
        if self.use_averaged and self.averaged is not None:
            return self.averaged
        return self.weights

    def attach_dlm(self, table, path: str = "") -> int:
        index = len(self.dlm_tables)
        self.dlm_tables.append(table)
        self.dlm_attachments.append((str(path), index))
        return index

    def features(self, config, transition, sentence) -> FeatureVector:
        return FeatureVector(step_ids(config, [transition], sentence, self)[0])

    # -- persistence -------------------------------------------------------

    def header(self) -> dict:
        return {
            "hash_bits": self.hash_bits,
            "system": self.system,
            "labels": list(self.labels),
            "templates": self.template_set,
            "template_registry": list(self.templates),
            "dlm": [{"path": p, "index": i} for p, i in self.dlm_attachments],
            "averaged": self.averaged is not None,
            "use_averaged": self.use_averaged,
        }

    def save(self, path) -> None:
        head = json.dumps(self.header(), sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", VERSION, len(head)))
            fh.write(head)
            fh.write(self.weights.astype("<f8").tobytes())
            if self.averaged is not None:
                fh.write(self.averaged.astype("<f8").tobytes())

    @classmethod
    def load(cls, path, load_dlms: bool = True) -> "WeightModel":
        from .dlm import DlmTable

        with open(path, "rb") as fh:
            data = fh.read()
        if data[:len(MAGIC)] != MAGIC:
            raise ModelFormatError(f"{path}: not a model file")
        off = len(MAGIC)
        version, hlen = struct.unpack_from("<II", data, off)
        if version != VERSION:
            raise ModelFormatError(f"{path}: unsupported model version {version}")
        off += 8
        head = json.loads(data[off:off + hlen].decode("utf-8"))
        off += hlen
        model = cls(head["labels"], head["system"], head["hash_bits"], head["templates"])
        if tuple(head["template_registry"]) != model.templates:
            raise ModelFormatError(f"{path}: template registry does not match set {head['templates']!r}")
        size = (1 << model.hash_bits) * 8
        model.weights = np.frombuffer(data, dtype="<f8", count=1 << model.hash_bits, offset=off).astype(np.float64)
        off += size
        if head["averaged"]:
            model.averaged = np.frombuffer(data, dtype="<f8", count=1 << model.hash_bits, offset=off).astype(np.float64)
        model.use_averaged = head["use_averaged"]
        for d in head["dlm"]:
            model.dlm_attachments.append((d["path"], d["index"]))
            if load_dlms:
                model.dlm_tables.append(DlmTable.load(d["path"]))
        return model


def score(model: WeightModel, fv: FeatureVector, weights: Optional[np.ndarray] = None) -> float:
    """Dot product of the weights with a sparse feature vector."""
    w = model.active if weights is None else weights
    total = 0.0
    for i, c in fv.items():
        total += w[i] * c
    return float(total)


def difference(gold: FeatureVector, predicted: FeatureVector) -> dict:
    delta = dict(gold)
    for i, c in predicted.items():
        delta[i] = delta.get(i, 0) - c
    return {i: v for i, v in delta.items() if v != 0}


def pa_update(model: WeightModel, gold: FeatureVector, predicted: FeatureVector) -> WeightModel:
    """w += (f_gold - f_pred) / ||f_gold - f_pred||^2; a no-op when they coincide."""
    delta = difference(gold, predicted)
    if not delta:
        return model
    norm2 = float(sum(v * v for v in delta.values()))
    ids = np.fromiter(delta.keys(), dtype=np.int64, count=len(delta))
    step = np.fromiter(delta.values(), dtype=np.float64, count=len(delta)) / norm2
    model.weights[ids] += step
    if model._acc is not None:
        model._acc[ids] += model._instances * step
    return model


@dataclass
class LabeledExample:
    sentence: Sentence
    transitions: list

    @classmethod
    def from_sentence(cls, sentence: Sentence, system: str = ARC_STANDARD) -> "LabeledExample":
        return cls(sentence, oracle_sequence(sentence, system))


def make_examples(sentences, system: str = ARC_STANDARD) -> list:
    """Oracle examples; trees the system cannot derive are skipped with a log line."""
    out = []
    skipped = 0
    for s in sentences:
        try:
            out.append(LabeledExample.from_sentence(s, system))
        except UnsupportedStructure:
            skipped += 1
    if skipped:
        log.info("skipped %d sentences not derivable by %s", skipped, system)
    return out


def sequence_features(model: WeightModel, sentence: Sentence, transitions: Sequence[Transition]) -> FeatureVector:
    """Summed features of a whole transition sequence from the initial configuration."""
    sys_ = get_system(model.system)
    c = sys_.initial(len(sentence))
    fv = FeatureVector()
    for t in transitions:
        fv.update(step_ids(c, [t], sentence, model)[0])
        c = sys_.apply(c, t)
    return fv


def collect_labels(sentences) -> list:
    return sorted({t.deprel for s in sentences for t in s if t.deprel is not None})


def train(model: WeightModel, examples: Sequence, iterations: int = 25, beam: int = 40,
          early_update: bool = False, average: bool = True, progress=None) -> WeightModel:
    """Online passive-aggressive training with beam-search decoding.

    Examples are visited in the given order every epoch; a sentence triggers
    an update when the decoded labelled tree differs from the gold tree.
    """
    from .decoder import beam_search

    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if not examples:
        raise ValueError("no training examples")
    examples = [e if isinstance(e, LabeledExample) else LabeledExample.from_sentence(e, model.system)
                for e in examples]
    model.use_averaged = False
    model._acc = np.zeros_like(model.weights) if average else None
    model._instances = 0
    for epoch in range(iterations):
        errors = 0
        for ex in examples:
            if early_update:
                res = beam_search(ex.sentence, model, beam, gold=ex.transitions)
                if res.early is not None:
                    gold_fv = sequence_features(model, ex.sentence, ex.transitions[:res.early_steps])
                    pa_update(model, gold_fv, res.early.features)
                    errors += 1
                elif res.arcs != ex.sentence.arcs():
                    pa_update(model, sequence_features(model, ex.sentence, ex.transitions), res.best.features)
                    errors += 1
            else:
                res = beam_search(ex.sentence, model, beam)
                if res.arcs != ex.sentence.arcs():
                    pa_update(model, sequence_features(model, ex.sentence, ex.transitions), res.best.features)
                    errors += 1
            model._instances += 1
        log.info("epoch %d: %d/%d sentences updated", epoch + 1, errors, len(examples))
        if progress is not None:
            progress(epoch + 1, errors)
    if average:
        model.averaged = model.weights - model._acc / model._instances
    model._acc = None
    model.use_averaged = True
    return model
