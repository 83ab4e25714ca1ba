"""Command-line interface.

Exit status: 0 on success, 1 when an operation fails (unreadable or
malformed file, bad configuration), 2 on usage errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

from .confidence import D_GRID, DEFAULT_D, METHODS, ScoredParse, load_sidecar, save_sidecar, score_corpus, tune_d
from .corpus import FORMATS, ConllError, TreeError, read_conll, save_conll
from .decoder import DecodeError, decode_corpus
from .dlm import UNIT_SCHEMES, DlmTable, extract_dlm
from .evalkit import (FACTORS, attachment_scores, bucket_analysis, bucket_table, confusion_table,
                      eval_table, label_scores, label_table, significance, unknown_split, vocabulary)
from .features import TEMPLATE_SETS
from .model import DEFAULT_HASH_BITS, ModelFormatError, WeightModel, collect_labels, make_examples, train
from .semisup import (AgreementCriteria, PipelineConfig, PipelineConfigError, random_select, run_pipeline,
                      select_agreement, self_training_select)
from .transitions import ARC_STANDARD, SYSTEMS

log = logging.getLogger("semiparse")

DEFAULT_BEAM = 40
DEFAULT_ITERATIONS = 25
DEFAULT_FRACTION = 0.5
DEFAULT_MIN_COUNT = 3


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    def _get_help_string(self, action):
        # flags without a meaningful default (None, False, empty list) are left bare
        d = action.default
        if d is None or d is False or d is argparse.SUPPRESS or (isinstance(d, list) and not d):
            return action.help
        return super()._get_help_string(action)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _common(p, beam=True, workers=False, fmt=True):
    if fmt:
        p.add_argument("--format", default="conll09", choices=sorted(FORMATS), help="CoNLL column layout")
    if beam:
        p.add_argument("--beam", type=int, default=DEFAULT_BEAM, help="beam size")
    if workers:
        p.add_argument("--workers", type=int, default=None,
                       help="parallel decoding processes; all available CPUs when omitted")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semiparse", formatter_class=_Formatter,
                     description="Transition-based dependency parser with semi-supervised data selection.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("train", help="train a model on a gold corpus", formatter_class=_Formatter)
    p.add_argument("--train", required=True, help="gold training corpus")
    p.add_argument("--model", required=True, help="output model file")
    p.add_argument("--system", default=ARC_STANDARD, choices=SYSTEMS, help="transition system")
    p.add_argument("--templates", default="full", choices=sorted(TEMPLATE_SETS), help="feature template set")
    p.add_argument("--iterations", type=int, default=DEFAULT_ITERATIONS, help="training epochs")
    p.add_argument("--hash-bits", type=int, default=DEFAULT_HASH_BITS, help="log2 of the weight vector size")
    p.add_argument("--dlm", action="append", default=[], help="DLM file to attach (repeatable)")
    p.add_argument("--early-update", action="store_true", help="update as soon as the gold prefix leaves the beam")
    p.add_argument("--no-average", action="store_true", help="keep the final weights instead of averaging")
    _common(p)

    p = sub.add_parser("parse", help="parse a corpus", formatter_class=_Formatter)
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--input", required=True, help="corpus to parse (existing trees are ignored)")
    p.add_argument("--output", required=True, help="parsed corpus")
    p.add_argument("--scores", help="write 'index<TAB>score' lines here")
    _common(p, workers=True)

    p = sub.add_parser("confidence", help="score parses with confidence measures", formatter_class=_Formatter)
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--input", required=True, help="corpus to parse and score")
    p.add_argument("--output", required=True, help="confidence file: index, raw, adjusted, delta")
    p.add_argument("--parsed", help="also write the parsed corpus here")
    p.add_argument("--d", type=float, default=DEFAULT_D, help="length penalty per token")
    p.add_argument("--delta", action="store_true", help="also compute Delta scores (one decode per edge)")
    _common(p, workers=True)

    p = sub.add_parser("tune-d", help="tune the length penalty d on a gold corpus", formatter_class=_Formatter)
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--gold", required=True, help="gold corpus; parsed with the model and compared")
    p.add_argument("--report", help="write the tuning table here instead of stdout")
    _common(p, workers=True)

    p = sub.add_parser("extract-dlm", help="extract a dependency language model", formatter_class=_Formatter)
    p.add_argument("--input", required=True, help="parsed corpus")
    p.add_argument("--output", required=True, help="DLM file")
    p.add_argument("--order", type=int, default=2, help="N-gram order")
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_COUNT, help="drop events seen fewer times")
    p.add_argument("--units", default="form", choices=UNIT_SCHEMES, help="token representation")
    _common(p, beam=False)

    p = sub.add_parser("select", help="select auto-parsed sentences", formatter_class=_Formatter)
    p.add_argument("--mode", default="agreement", choices=("agreement", "confidence", "random"),
                   help="selection method")
    p.add_argument("--output", required=True, help="selected corpus")
    p.add_argument("--report", help="write the selection report here")
    p.add_argument("--parse-a", help="agreement: first learner's parses")
    p.add_argument("--parse-b", help="agreement: second learner's parses")
    p.add_argument("--exclude", help="agreement: drop sentences this third parse also agrees on")
    p.add_argument("--min-length", type=int, help="agreement: minimum sentence length in tokens")
    p.add_argument("--max-selected", type=int, help="agreement: keep the first N agreed sentences")
    p.add_argument("--parsed", help="confidence/random: parsed corpus")
    p.add_argument("--scores", help="confidence: confidence file aligned with --parsed")
    p.add_argument("--method", default="adjusted", choices=METHODS, help="confidence: score to rank by")
    p.add_argument("--d", type=float, help="confidence: recompute adjusted scores with this d")
    p.add_argument("--fraction", type=float, default=DEFAULT_FRACTION, help="share of sentences to keep")
    p.add_argument("--count", type=int, help="number of sentences to keep; overrides --fraction")
    p.add_argument("--seed", type=int, default=0, help="random: sampling seed")
    _common(p, beam=False)

    p = sub.add_parser("pipeline", help="run a co-, tri- or self-training pipeline", formatter_class=_Formatter)
    p.add_argument("--spec", required=True, help="pipeline spec file (key = value lines)")
    p.add_argument("--workers", type=int, default=None, help="override the spec's worker count")

    p = sub.add_parser("eval", help="attachment scores and comparisons", formatter_class=_Formatter)
    p.add_argument("--gold", required=True, help="gold corpus")
    p.add_argument("--pred", required=True, help="predicted corpus")
    p.add_argument("--pred2", help="second predicted corpus for the randomized comparator")
    p.add_argument("--exclude-punct", action="store_true", help="do not score punctuation tokens")
    p.add_argument("--punct-tags", help="comma-separated extra punctuation tags")
    p.add_argument("--labels", action="store_true", help="per-label precision/recall/F and confusions")
    p.add_argument("--vocab-from", help="training corpus for the known/unknown split")
    p.add_argument("--iterations", type=int, default=10000, help="comparator samples")
    p.add_argument("--seed", type=int, default=0, help="comparator seed")
    p.add_argument("--tsv", action="store_true", help="tab-separated tables")
    _common(p, beam=False)

    p = sub.add_parser("analyze", help="sentence-level better/worse buckets", formatter_class=_Formatter)
    p.add_argument("--gold", required=True, help="gold corpus")
    p.add_argument("--base", required=True, help="baseline parses")
    p.add_argument("--new", required=True, help="new parses")
    p.add_argument("--factor", default="length", choices=FACTORS, help="bucketing factor")
    p.add_argument("--vocab-from", help="training corpus; needed for unknown-words")
    p.add_argument("--exclude-punct", action="store_true", help="do not score punctuation tokens")
    p.add_argument("--tsv", action="store_true", help="tab-separated table")
    _common(p, beam=False)
    return parser


def _read(path: str, fmt: str) -> list:
    try:
        return read_conll(path, fmt)
    except (ConllError, TreeError) as exc:
        raise ValueError(f"{path}: {exc}") from None


def _workers(n: Optional[int]) -> int:
    return n if n is not None else (os.cpu_count() or 1)


def _emit(text: str, path: Optional[str] = None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_train(a) -> None:
    corpus = _read(a.train, a.format)
    model = WeightModel(collect_labels(corpus), a.system, a.hash_bits, a.templates)
    for path in a.dlm:
        model.attach_dlm(DlmTable.load(path), path)
    examples = make_examples(corpus, a.system)
    train(model, examples, a.iterations, a.beam, early_update=a.early_update, average=not a.no_average)
    model.save(a.model)


def cmd_parse(a) -> None:
    model = WeightModel.load(a.model)
    sentences = _read(a.input, a.format)
    parses = decode_corpus(sentences, model, a.beam, _workers(a.workers))
    save_conll([p.tree for p in parses], a.output, a.format)
    if a.scores:
        _emit("".join(f"{i}\t{p.score!r}\n" for i, p in enumerate(parses)), a.scores)


def cmd_confidence(a) -> None:
    model = WeightModel.load(a.model)
    sentences = _read(a.input, a.format)
    scored = score_corpus(sentences, model, a.beam, a.d, a.delta, workers=_workers(a.workers))
    save_sidecar(scored, a.output)
    if a.parsed:
        save_conll([sp.sentence for sp in scored], a.parsed, a.format)


def cmd_tune_d(a) -> None:
    model = WeightModel.load(a.model)
    gold = _read(a.gold, a.format)
    scored = score_corpus([s.stripped() for s in gold], model, a.beam, None, gold=gold,
                          workers=_workers(a.workers))
    _emit(tune_d([sp for sp in scored if sp.length], D_GRID).table(), a.report)


def cmd_extract_dlm(a) -> None:
    corpus = _read(a.input, a.format)
    extract_dlm(corpus, a.order, a.min_count, a.units).save(a.output)


def _need(a, *names) -> None:
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(a, n) is None]
    if missing:
        raise UsageError(f"--mode {a.mode} requires {', '.join(missing)}")


class UsageError(Exception):
    pass


def cmd_select(a) -> None:
    if a.mode == "agreement":
        _need(a, "parse_a", "parse_b")
        pa, pb = _read(a.parse_a, a.format), _read(a.parse_b, a.format)
        exclude = _read(a.exclude, a.format) if a.exclude else None
        selected, report = select_agreement(pa, pb, AgreementCriteria(a.min_length, a.max_selected), exclude)
        text = report.table()
    else:
        _need(a, "parsed")
        parsed = _read(a.parsed, a.format)
        fraction = None if a.count is not None else a.fraction
        if a.mode == "random":
            from .semisup import _selection_size
            selected = random_select(parsed, _selection_size(len(parsed), fraction, a.count), a.seed)
        else:
            _need(a, "scores")
            rows = load_sidecar(a.scores)
            if len(rows) != len(parsed):
                raise ValueError(f"{a.scores}: {len(rows)} score lines for {len(parsed)} sentences")
            scored = [ScoredParse(s, raw, len(s), adj, None, delta) for s, (_, raw, adj, delta) in zip(parsed, rows)]
            selected = [sp.sentence for sp in self_training_select(scored, a.method, fraction, a.count, a.d)]
        text = f"mode\t{a.mode}\npool\t{len(parsed)}\nselected\t{len(selected)}\n"
    save_conll(selected, a.output, a.format)
    _emit(text, a.report)


def cmd_pipeline(a) -> None:
    cfg = PipelineConfig.load(a.spec)
    if a.workers is not None:
        cfg.workers = a.workers
    result = run_pipeline(cfg)
    sys.stdout.write(result.report.table())
    if result.evaluation is not None:
        sys.stdout.write("\n" + result.evaluation_table())


def _punct(a):
    from .evalkit import DEFAULT_PUNCT_TAGS
    extra = {t for t in (a.punct_tags or "").split(",") if t}
    return DEFAULT_PUNCT_TAGS | extra


def cmd_eval(a) -> None:
    gold = _read(a.gold, a.format)
    pred = _read(a.pred, a.format)
    inc = not a.exclude_punct
    tags = _punct(a)
    results = {"all": attachment_scores(gold, pred, inc, tags)}
    if a.vocab_from:
        known, unknown = unknown_split(gold, pred, vocabulary(_read(a.vocab_from, a.format)), inc, tags)
        results["known"], results["unknown"] = known, unknown
    out = [eval_table(results, a.tsv)]
    if a.labels:
        scores, confusion = label_scores(gold, pred, inc, tags)
        out += [label_table(scores, a.tsv), confusion_table(confusion, a.tsv)]
    if a.pred2:
        pred2 = _read(a.pred2, a.format)
        out.append(significance(gold, pred, pred2, a.iterations, a.seed, inc, tags).report())
    sys.stdout.write("\n".join(out))


def cmd_analyze(a) -> None:
    gold = _read(a.gold, a.format)
    base = _read(a.base, a.format)
    new = _read(a.new, a.format)
    vocab = vocabulary(_read(a.vocab_from, a.format)) if a.vocab_from else None
    if a.factor == "unknown-words" and vocab is None:
        raise UsageError("--factor unknown-words requires --vocab-from")
    report = bucket_analysis(gold, base, new, a.factor, vocab, include_punct=not a.exclude_punct)
    sys.stdout.write(bucket_table(report, a.tsv))


COMMANDS = {
    "train": cmd_train, "parse": cmd_parse, "confidence": cmd_confidence, "tune-d": cmd_tune_d,
    "extract-dlm": cmd_extract_dlm, "select": cmd_select, "pipeline": cmd_pipeline, "eval": cmd_eval,
    "analyze": cmd_analyze,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return 2
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if a.command is None:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(message)s")
    try:
        COMMANDS[a.command](a)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"semiparse {a.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        name = exc.filename if exc.filename is not None else ""
        print(f"semiparse {a.command}: error: {name}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except (ConllError, TreeError, ModelFormatError, PipelineConfigError, DecodeError, ValueError) as exc:
        print(f"semiparse {a.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def run() -> None:
    sys.exit(main())
