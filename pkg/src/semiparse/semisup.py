"""Selection of automatically parsed sentences for retraining.

Agreement-based selection keeps sentences that two learners annotate
identically (co-training when the evaluation learner is one of the two,
tri-training when it is a third).  Confidence-based self-training keeps the
evaluation learner's own best-scored parses.  ``run_pipeline`` chains
training, parsing, selection and retraining from a key-value spec file.
"""
from __future__ import annotations

import logging
import math
import os
import random
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .confidence import DEFAULT_D, METHODS, rank_by_confidence, score_corpus
from .corpus import Sentence, read_conll, save_conll
from .decoder import decode_corpus
from .evalkit import AlignmentError, attachment_scores, eval_table, significance
from .features import TEMPLATE_SETS
from .model import DEFAULT_HASH_BITS, WeightModel, collect_labels, make_examples, train
from .transitions import ARC_EAGER, ARC_STANDARD, SYSTEMS

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AgreementCriteria:
    min_length: Optional[int] = None
    max_selected: Optional[int] = None


@dataclass(frozen=True)
class SelectionReport:
    method: str
    candidates: int
    selected: int
    average_length: float  # over the selected sentences
    agreement_rate: Optional[float] = None  # agreement methods only
    pool: int = 0  # sentences considered

    def table(self) -> str:
        rows = [("method", self.method), ("pool", self.pool), ("candidates", self.candidates),
                ("selected", self.selected), ("average length", f"{self.average_length:.2f}")]
        if self.agreement_rate is not None:
            rows.append(("agreement rate", f"{self.agreement_rate:.4f}"))
        return "".join(f"{k}\t{v}\n" for k, v in rows)


def _same_tree(a: Sentence, b: Sentence) -> bool:
    return all(x.head == y.head and x.deprel == y.deprel for x, y in zip(a, b))


def _check_pair(a: Sequence[Sentence], b: Sequence[Sentence]) -> None:
    for i, (x, y) in enumerate(zip(a, b)):
        if x.forms != y.forms:
            raise AlignmentError(i, "token forms differ")
    if len(a) != len(b):
        raise AlignmentError(min(len(a), len(b)), f"{len(a)} vs {len(b)} sentences")


def select_agreement(parse_a: Sequence[Sentence], parse_b: Sequence[Sentence],
                     criteria: AgreementCriteria = AgreementCriteria(),
                     exclude: Optional[Sequence[Sentence]] = None) -> tuple:
    """Sentences whose labelled trees agree in both parses, in corpus order.

    ``exclude`` optionally holds a third learner's parses; agreed sentences
    that it also parses identically are dropped.
    """
    _check_pair(parse_a, parse_b)
    if exclude is not None:
        _check_pair(parse_a, exclude)
    agreed = [i for i, (a, b) in enumerate(zip(parse_a, parse_b)) if _same_tree(a, b)]
    candidates = len(agreed)
    if exclude is not None:
        agreed = [i for i in agreed if not _same_tree(parse_a[i], exclude[i])]
    if criteria.min_length is not None:
        agreed = [i for i in agreed if len(parse_a[i]) >= criteria.min_length]
    if criteria.max_selected is not None:
        agreed = agreed[:max(criteria.max_selected, 0)]
    selected = [parse_a[i] for i in agreed]
    n = len(parse_a)
    report = SelectionReport("agreement", candidates, len(selected),
                             sum(map(len, selected)) / len(selected) if selected else 0.0,
                             candidates / n if n else 0.0, n)
    return selected, report


def build_boosted_trainset(base: Sequence[Sentence], additional: Sequence[Sentence]) -> list:
    """Base corpus followed by the additional sentences; nothing is deduplicated."""
    return list(base) + list(additional)


def _selection_size(total: int, fraction: Optional[float], count: Optional[int]) -> int:
    if (fraction is None) == (count is None):
        raise ValueError("give exactly one of fraction and count")
    if fraction is not None:
        if not 0 < fraction <= 1:
            raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
        return math.floor(fraction * total)
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count > total:
        warnings.warn(f"requested {count} sentences but only {total} are available; selecting all")
        return total
    return count


def self_training_select(scored: Sequence, method: str = "adjusted", fraction: Optional[float] = None,
                         count: Optional[int] = None, d: Optional[float] = None) -> list:
    """Top of the confidence ranking; returns the selected ScoredParse items."""
    if fraction is None and count is None:
        fraction = 0.5
    n = _selection_size(len(scored), fraction, count)
    return rank_by_confidence(scored, method, d)[:n]


def random_select(items: Sequence, n: int, seed: int = 0) -> list:
    """``n`` items drawn without replacement, kept in corpus order."""
    idx = sorted(random.Random(seed).sample(range(len(items)), n))
    return [items[i] for i in idx]


# -- pipeline ----------------------------------------------------------------------

class PipelineConfigError(ValueError):
    pass


PIPELINE_METHODS = ("self_training", "co_training", "tri_training")
SELF_CONFIDENCE = METHODS + ("random",)

_DEFAULT_LEARNERS = {
    "learner_a": f"{ARC_EAGER}:full",
    "learner_b": f"{ARC_STANDARD}:delex",
    "learner_c": f"{ARC_STANDARD}:full",
}


@dataclass
class PipelineConfig:
    method: str
    train: str
    unlabelled: str
    output: Optional[str] = None
    test: Optional[str] = None
    format: str = "conll09"
    beam: int = 40
    iterations: int = 25
    hash_bits: int = DEFAULT_HASH_BITS
    seed: int = 0
    workers: int = 1
    confidence: str = "adjusted"
    d: float = DEFAULT_D
    fraction: Optional[float] = None
    count: Optional[int] = None
    min_length: Optional[int] = None
    max_selected: Optional[int] = None
    exclude_evaluation_learner: Optional[bool] = None
    learners: dict = field(default_factory=lambda: dict(_DEFAULT_LEARNERS))
    models: dict = field(default_factory=dict)  # learner key -> pretrained model path

    _INT = ("beam", "iterations", "hash_bits", "seed", "workers", "count", "min_length", "max_selected")
    _FLOAT = ("d", "fraction")

    @classmethod
    def parse(cls, text: str, base_dir: str = ".") -> "PipelineConfig":
        """Read ``key = value`` lines; ``#`` starts a comment.  Relative paths
        resolve against ``base_dir``."""
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise PipelineConfigError(f"line {lineno}: expected 'key = value'")
            key, value = key.strip(), value.strip()
            if key in raw:
                raise PipelineConfigError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = value
        return cls.from_dict(raw, base_dir)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read(), os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_dict(cls, raw: dict, base_dir: str = ".") -> "PipelineConfig":
        raw = dict(raw)
        kw: dict = {"learners": dict(_DEFAULT_LEARNERS), "models": {}}

        def path(v):
            return v if os.path.isabs(v) else os.path.normpath(os.path.join(base_dir, v))

        for key in ("method", "train", "unlabelled"):
            if key not in raw:
                raise PipelineConfigError(f"missing required key {key!r}")
        for key, value in raw.items():
            try:
                if key in ("train", "unlabelled", "test", "output"):
                    kw[key] = path(value)
                elif key in cls._INT:
                    kw[key] = int(value)
                elif key in cls._FLOAT:
                    kw[key] = float(value)
                elif key == "exclude_evaluation_learner":
                    if value.lower() not in ("true", "false"):
                        raise ValueError("expected true or false")
                    kw[key] = value.lower() == "true"
                elif key in _DEFAULT_LEARNERS:
                    kw["learners"][key] = value
                elif key.startswith("model_") and "learner_" + key[6:] in _DEFAULT_LEARNERS:
                    kw["models"]["learner_" + key[6:]] = path(value)
                elif key in ("method", "format", "confidence"):
                    kw[key] = value
                else:
                    raise PipelineConfigError(f"unknown key {key!r}")
            except ValueError as exc:
                if isinstance(exc, PipelineConfigError):
                    raise
                raise PipelineConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        """Check every setting and resource before any compute starts."""
        if self.method not in PIPELINE_METHODS:
            raise PipelineConfigError(f"method must be one of {', '.join(PIPELINE_METHODS)}, got {self.method!r}")
        if self.method == "tri_training" and self.exclude_evaluation_learner is None:
            raise PipelineConfigError("tri_training needs an explicit exclude_evaluation_learner = true|false")
        if self.confidence not in SELF_CONFIDENCE:
            raise PipelineConfigError(f"confidence must be one of {', '.join(SELF_CONFIDENCE)}")
        if self.fraction is not None and self.count is not None:
            raise PipelineConfigError("give at most one of fraction and count")
        if self.fraction is not None and not 0 < self.fraction <= 1:
            raise PipelineConfigError(f"fraction must lie in (0, 1], got {self.fraction}")
        if self.beam < 1 or self.iterations < 1:
            raise PipelineConfigError("beam and iterations must be >= 1")
        for key, value in self.learners.items():
            system, _, templates = value.partition(":")
            if system not in SYSTEMS or templates not in TEMPLATE_SETS:
                raise PipelineConfigError(f"{key}: expected <system>:<template set>, got {value!r}")
        for key in ("train", "unlabelled", "test"):
            p = getattr(self, key)
            if p is not None and not os.path.isfile(p):
                raise PipelineConfigError(f"{key}: file not found: {p}")
        for key, p in self.models.items():
            if not os.path.isfile(p):
                raise PipelineConfigError(f"model for {key}: file not found: {p}")

    def learner(self, key: str) -> tuple:
        system, _, templates = self.learners[key].partition(":")
        return system, templates

    @property
    def evaluation_learner(self) -> str:
        return "learner_a" if self.method == "co_training" else "learner_c"


@dataclass
class PipelineResult:
    model: WeightModel
    base_model: WeightModel
    selected: list
    report: SelectionReport
    evaluation: Optional[dict] = None  # name -> EvalResult on the test corpus
    significance: object = None

    def evaluation_table(self) -> str:
        if self.evaluation is None:
            return ""
        text = eval_table(self.evaluation)
        if self.significance is not None:
            text += "\n" + self.significance.report()
        return text


def train_learner(corpus: Sequence[Sentence], system: str, templates: str, cfg: PipelineConfig,
                  labels: Optional[Sequence] = None) -> WeightModel:
    model = WeightModel(labels or collect_labels(corpus), system, cfg.hash_bits, templates)
    train(model, make_examples(corpus, system), cfg.iterations, cfg.beam)
    return model


def _learner_model(key: str, corpus, cfg: PipelineConfig, cache: dict) -> WeightModel:
    if key not in cache:
        if key in cfg.models:
            cache[key] = WeightModel.load(cfg.models[key])
        else:
            system, templates = cfg.learner(key)
            log.info("training %s (%s:%s)", key, system, templates)
            cache[key] = train_learner(corpus, system, templates, cfg)
    return cache[key]


def _parse(model: WeightModel, sentences, cfg: PipelineConfig) -> list:
    return [p.tree for p in decode_corpus(sentences, model, cfg.beam, cfg.workers)]


def run_pipeline(cfg: PipelineConfig, write: bool = True) -> PipelineResult:
    """Train base learner(s), parse the unlabelled pool, select, retrain the
    evaluation learner and optionally evaluate it on the test corpus."""
    cfg.validate()
    base = read_conll(cfg.train, cfg.format)
    pool = [s.stripped() for s in read_conll(cfg.unlabelled, cfg.format)]
    test = read_conll(cfg.test, cfg.format) if cfg.test else None
    models: dict = {}
    eval_key = cfg.evaluation_learner
    base_model = _learner_model(eval_key, base, cfg, models)

    if cfg.method == "self_training":
        fraction = cfg.fraction if cfg.fraction is not None or cfg.count is not None else 0.5
        if cfg.confidence == "random":
            n = _selection_size(len(pool), fraction, cfg.count)
            parsed = _parse(base_model, pool, cfg)
            selected = random_select(parsed, n, cfg.seed)
        else:
            scored = score_corpus(pool, base_model, cfg.beam, cfg.d, cfg.confidence == "delta",
                                  workers=cfg.workers)
            chosen = self_training_select(scored, cfg.confidence, fraction, cfg.count,
                                          cfg.d if cfg.confidence == "adjusted" else None)
            selected = [sp.sentence for sp in chosen]
        report = SelectionReport(f"self_training:{cfg.confidence}", len(pool), len(selected),
                                 sum(map(len, selected)) / len(selected) if selected else 0.0, None, len(pool))
    else:
        a = _learner_model("learner_a", base, cfg, models)
        b = _learner_model("learner_b", base, cfg, models)
        parse_a, parse_b = _parse(a, pool, cfg), _parse(b, pool, cfg)
        exclude = None
        if cfg.method == "tri_training" and cfg.exclude_evaluation_learner:
            exclude = _parse(base_model, pool, cfg)
        selected, report = select_agreement(parse_a, parse_b, AgreementCriteria(cfg.min_length, cfg.max_selected),
                                            exclude)
        report = SelectionReport(cfg.method, report.candidates, report.selected, report.average_length,
                                 report.agreement_rate, report.pool)

    system, templates = cfg.learner(eval_key)
    boosted = build_boosted_trainset(base, selected)
    log.info("retraining %s on %d sentences (%d added)", eval_key, len(boosted), len(selected))
    model = train_learner(boosted, system, templates, cfg, collect_labels(boosted) + list(base_model.labels))

    result = PipelineResult(model, base_model, selected, report)
    if test is not None:
        stripped = [s.stripped() for s in test]
        before = _parse(base_model, stripped, cfg)
        after = _parse(model, stripped, cfg)
        result.evaluation = {"baseline": attachment_scores(test, before), "retrained": attachment_scores(test, after)}
        result.significance = significance(test, after, before, seed=cfg.seed)
    if write and cfg.output:
        write_outputs(result, cfg)
    return result


def write_outputs(result: PipelineResult, cfg: PipelineConfig) -> None:
    os.makedirs(cfg.output, exist_ok=True)
    result.model.save(os.path.join(cfg.output, "model.bin"))
    save_conll(result.selected, os.path.join(cfg.output, "selected.conll"), cfg.format)
    with open(os.path.join(cfg.output, "selection.txt"), "w", encoding="utf-8") as fh:
        fh.write(result.report.table())
    if result.evaluation is not None:
        with open(os.path.join(cfg.output, "evaluation.txt"), "w", encoding="utf-8") as fh:
            fh.write(result.evaluation_table())
