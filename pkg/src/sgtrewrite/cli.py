"""Command-line entry point: ``sgt <subcommand> [flags]``.

Settings come from an optional INI-style config file (``--config``) and are
overridden by flags. Exit codes: 0 success, 1 usage error, 2 I/O failure,
3 numeric failure, 4 round-trip mismatch.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

from . import __version__
from .bench import bench_decode, bench_model
from .corpus import Dialogue, load_connection_words, load_corpus
from .errors import (
    CorruptFile,
    EncodingFailure,
    IoFailure,
    NonFiniteGradient,
    NonFiniteLoss,
    SGTError,
    Uncoverable,
    VersionMismatch,
)
from .labeler import CoverageReport, LabelConfig, build_labeled_example, label_corpus, splice_spans
from .metrics import evaluate_corpus
from .splicer import DecodePolicy, DuplicateResolution, EmptyFallback, Rewriter, decode
from .tagger.params import EncoderConfig, load_params, save_params
from .tagger.train import TrainConfig, train
from .text_units import normalize_text

log = logging.getLogger("sgtrewrite")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3, 4
DEFAULT_SEED = 13


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    corpus: Optional[str] = None
    train: Optional[str] = None
    dev: Optional[str] = None
    test: Optional[str] = None
    connection_words: Optional[str] = None
    model: Optional[str] = None
    out: Optional[str] = None
    predictions: Optional[str] = None
    tag_classes: int = 11
    speaker_width: int = 1
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    policy: str = "latest"
    fallback: str = "copy"
    gold_inject: bool = False
    warmup: int = 10
    repetitions: int = 1
    bench_mode: str = "full"
    workers: int = 1
    seed: int = DEFAULT_SEED

    def decode_policy(self) -> DecodePolicy:
        return DecodePolicy(DuplicateResolution(self.policy), EmptyFallback(self.fallback))

    def words(self) -> List[str]:
        return load_connection_words(self.connection_words) if self.connection_words else []

    def label_config(self) -> LabelConfig:
        return LabelConfig(tuple(self.words()), self.speaker_width, self.tag_classes)

    def digest(self) -> str:
        data = asdict(self)
        data.pop("out", None)
        return hashlib.sha256(json.dumps(data, sort_keys=True, default=str).encode()).hexdigest()[:16]


_PATH_KEYS = ("corpus", "train", "dev", "test", "connection_words", "model", "out", "predictions")


def _read_config_file(path: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise UsageError(f"bad config file {path}: {exc}") from exc
    return cp


def build_run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    enc, tr = {}, {}
    if args.config:
        cp = _read_config_file(args.config)
        try:
            if cp.has_section("paths"):
                for key in _PATH_KEYS:
                    if cp.has_option("paths", key):
                        setattr(cfg, key, cp.get("paths", key))
            if cp.has_section("labeler"):
                cfg.tag_classes = cp.getint("labeler", "tag_classes", fallback=cfg.tag_classes)
                cfg.speaker_width = cp.getint("labeler", "speaker_width", fallback=cfg.speaker_width)
            if cp.has_section("encoder"):
                for key in EncoderConfig.__dataclass_fields__:
                    if cp.has_option("encoder", key):
                        enc[key] = cp.getint("encoder", key)
            if cp.has_section("train"):
                for key in ("learning_rate", "dropout_rate", "target_accuracy"):
                    if cp.has_option("train", key):
                        tr[key] = cp.getfloat("train", key)
                for key in ("epochs", "batch_size"):
                    if cp.has_option("train", key):
                        tr[key] = cp.getint("train", key)
                if cp.has_option("train", "class_weights"):
                    tr["class_weights"] = [float(x) for x in cp.get("train", "class_weights").split(",")]
            if cp.has_section("decode"):
                cfg.policy = cp.get("decode", "policy", fallback=cfg.policy)
                cfg.fallback = cp.get("decode", "fallback", fallback=cfg.fallback)
            if cp.has_section("bench"):
                cfg.warmup = cp.getint("bench", "warmup", fallback=cfg.warmup)
                cfg.repetitions = cp.getint("bench", "repetitions", fallback=cfg.repetitions)
                cfg.bench_mode = cp.get("bench", "mode", fallback=cfg.bench_mode)
            if cp.has_section("run"):
                cfg.seed = cp.getint("run", "seed", fallback=cfg.seed)
                cfg.workers = cp.getint("run", "workers", fallback=cfg.workers)
        except ValueError as exc:
            raise UsageError(f"bad value in {args.config}: {exc}") from exc

    for key in ("corpus", "model", "out", "connection_words", "predictions"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    if args.tag_classes is not None:
        cfg.tag_classes = args.tag_classes
    if args.policy is not None:
        cfg.policy = args.policy
    if args.workers is not None:
        cfg.workers = args.workers
    if args.seed is not None:
        cfg.seed = args.seed
    cfg.gold_inject = bool(args.gold_inject)
    for key in ("epochs", "batch_size"):
        if getattr(args, key, None) is not None:
            tr[key] = getattr(args, key)
    if getattr(args, "learning_rate", None) is not None:
        tr["learning_rate"] = args.learning_rate
    if getattr(args, "warmup", None) is not None:
        cfg.warmup = args.warmup
    if getattr(args, "repetitions", None) is not None:
        cfg.repetitions = args.repetitions
    if getattr(args, "mode", None) is not None:
        cfg.bench_mode = args.mode

    if cfg.tag_classes < 2:
        raise UsageError("--tag-classes must be >= 2")
    if cfg.policy not in ("latest", "score") or cfg.fallback not in ("copy", "empty"):
        raise UsageError("policy must be latest|score and fallback copy|empty")
    if cfg.workers < 1:
        raise UsageError("--workers must be >= 1")
    try:
        cfg.encoder = EncoderConfig(**enc)
        cfg.training = TrainConfig(seed=cfg.seed, **tr)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return cfg


def _require(cfg: RunConfig, *names: str, outputs: Sequence[str] = ()) -> None:
    """Check required settings; input paths must also exist."""
    for name in (*names, *outputs):
        if not getattr(cfg, name):
            raise UsageError(f"--{name.replace('_', '-')} (or [paths] {name}) is required")
    for name in names:
        if not Path(getattr(cfg, name)).exists():
            raise IoFailure(f"{name} path does not exist: {getattr(cfg, name)}")


def _read_dialogues(path: str) -> List[Dialogue]:
    stream = load_corpus(path)
    dialogues = list(stream)
    if stream.skipped:
        print(f"skipped {len(stream.skipped)} malformed line(s): "
              + ", ".join(str(n) for n, _ in stream.skipped), file=sys.stderr)
    return dialogues


def _open_out(path: Optional[str]):
    if path is None:
        return None
    try:
        parent = Path(path).parent
        parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# worker-pool helpers; module level so they pickle

_WORKER_STATE: dict = {}


def _label_one(args):
    d, config = args
    try:
        return build_labeled_example(d, config).to_record()
    except Uncoverable as exc:
        return {"uncoverable": str(exc)}


def _init_rewriter(model_path, policy):
    _WORKER_STATE["rewriter"] = Rewriter(load_params(model_path), policy)


def _rewrite_one(d):
    return _WORKER_STATE["rewriter"].rewrite(d)


def _map(fn, items, workers: int, initializer=None, initargs=()):
    if workers <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(x) for x in items]
    with ProcessPoolExecutor(workers, initializer=initializer, initargs=initargs) as pool:
        return list(pool.map(fn, items, chunksize=16))


def cmd_build_labels(cfg: RunConfig) -> int:
    _require(cfg, "corpus")
    dialogues = _read_dialogues(cfg.corpus)
    label_cfg = cfg.label_config()
    records = _map(_label_one, [(d, label_cfg) for d in dialogues], cfg.workers)
    report = CoverageReport()
    fh = _open_out(cfg.out)
    try:
        for i, rec in enumerate(records):
            if "uncoverable" in rec:
                log.warning("dialogue %d uncoverable: %s", i + 1, rec["uncoverable"])
                report.total += 1
                report.uncoverable_lines.append(i + 1)
                continue
            report.total += 1
            report.coverable += 1
            report.fragment_histogram[len(rec["spans"])] += 1
            if fh is not None:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    finally:
        if fh is not None:
            fh.close()
    print(report.format())
    return EXIT_OK


def _labeled(dialogues: Sequence[Dialogue], label_cfg: LabelConfig):
    report = CoverageReport()
    examples = []
    for i, ex in label_corpus(dialogues, label_cfg):
        report.add(ex, i + 1)
        if ex is not None:
            examples.append(ex)
    return examples, report


def cmd_train(cfg: RunConfig) -> int:
    if not cfg.corpus and cfg.train:
        cfg.corpus = cfg.train
    _require(cfg, "corpus", outputs=("model",))
    label_cfg = cfg.label_config()
    examples, report = _labeled(_read_dialogues(cfg.corpus), label_cfg)
    print(report.format(), file=sys.stderr)
    if not examples:
        raise UsageError("no coverable training examples")
    dev = None
    if cfg.dev:
        dev, _ = _labeled(_read_dialogues(cfg.dev), label_cfg)
    log_path = cfg.out or (str(cfg.model) + ".log.tsv")
    log_fh = _open_out(log_path)
    try:
        log_fh.write("epoch\tL_sgt\tL_gd\tL_ged\tL_final\ttoken_acc\n")
        result = train(examples, cfg.training, cfg.encoder, cfg.tag_classes, cfg.speaker_width,
                       label_cfg.connection_words, dev=dev,
                       on_epoch=lambda s: (log_fh.write(s.tsv() + "\n"), log_fh.flush()))
    except NonFiniteLoss as exc:
        if exc.params is not None:
            save_params(exc.params, cfg.model)
        raise
    finally:
        log_fh.close()
    save_params(result.best_params, cfg.model)
    print(f"saved {cfg.model} (epoch {result.best_epoch}, token accuracy {result.best_accuracy:.4f})")
    return EXIT_OK


def _gold_rewrite(d: Dialogue, label_cfg: LabelConfig, policy: DecodePolicy) -> str:
    try:
        ex = build_labeled_example(d, label_cfg)
    except Uncoverable:
        return d.current.raw_text if policy.empty_fallback is EmptyFallback.COPY_LAST_UTTERANCE else ""
    return decode(ex.y_sgt, ex.input, d, policy)


def cmd_rewrite(cfg: RunConfig) -> int:
    _require(cfg, "corpus")
    dialogues = _read_dialogues(cfg.corpus)
    policy = cfg.decode_policy()
    if cfg.gold_inject:
        label_cfg = cfg.label_config()
        outputs = [_gold_rewrite(d, label_cfg, policy) for d in dialogues]
    else:
        _require(cfg, "model")
        outputs = _map(_rewrite_one, dialogues, cfg.workers, _init_rewriter, (cfg.model, policy))
    fh = _open_out(cfg.out)
    try:
        for line in outputs:
            (fh or sys.stdout).write(line + "\n")
    finally:
        if fh is not None:
            fh.close()
    return EXIT_OK


def _read_lines(path: str) -> List[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return [line.rstrip("\r\n") for line in fh]
    except UnicodeDecodeError as exc:
        raise EncodingFailure(f"{path}: not valid UTF-8") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def cmd_evaluate(cfg: RunConfig) -> int:
    _require(cfg, "corpus", "predictions")
    dialogues = _read_dialogues(cfg.corpus)
    predictions = _read_lines(cfg.predictions)
    report = evaluate_corpus(predictions, dialogues)
    table = report.format_table()
    print(table)
    if cfg.out:
        record = report.as_dict()
        record["config_hash"] = cfg.digest()
        fh = _open_out(cfg.out)
        with fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
        text_path = Path(cfg.out).with_suffix(".txt")
        try:
            text_path.write_text(table + "\n", encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write {text_path}: {exc}") from exc
    return EXIT_OK


def cmd_roundtrip(cfg: RunConfig) -> int:
    _require(cfg, "corpus")
    dialogues = _read_dialogues(cfg.corpus)
    label_cfg = cfg.label_config()
    checked = mismatches = 0
    excluded = []
    for i, ex in label_corpus(dialogues, label_cfg):
        if ex is None:
            excluded.append(i + 1)
            continue
        checked += 1
        got = splice_spans(ex.input, ex.spans)
        want = normalize_text(dialogues[i].reference)
        if got != want:
            mismatches += 1
            print(f"line {i + 1}: mismatch\n  want: {want}\n  got:  {got}")
    if excluded:
        print(f"excluded (uncoverable): {len(excluded)} line(s): " + ", ".join(map(str, excluded)))
    status = "PASS" if mismatches == 0 else "FAIL"
    print(f"roundtrip {status}: {checked} checked, {mismatches} mismatches, {len(excluded)} excluded")
    return EXIT_OK if mismatches == 0 else EXIT_MISMATCH


def cmd_bench(cfg: RunConfig) -> int:
    _require(cfg, "corpus")
    if cfg.repetitions < 1:
        raise UsageError("repetitions must be >= 1")
    dialogues = _read_dialogues(cfg.corpus)
    if cfg.gold_inject or cfg.bench_mode == "decode":
        label_cfg = cfg.label_config()
        usable = [dialogues[i] for i, ex in label_corpus(dialogues, label_cfg) if ex is not None]
        report = bench_decode(usable, label_cfg, cfg.decode_policy(), cfg.warmup, cfg.repetitions)
    else:
        _require(cfg, "model")
        rewriter = Rewriter(load_params(cfg.model), cfg.decode_policy())
        report = bench_model(dialogues, rewriter, cfg.warmup, cfg.repetitions)
    print(report.format())
    if cfg.out:
        fh = _open_out(cfg.out)
        with fh:
            json.dump(report.as_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


COMMANDS = {
    "build-labels": cmd_build_labels,
    "train": cmd_train,
    "rewrite": cmd_rewrite,
    "evaluate": cmd_evaluate,
    "roundtrip": cmd_roundtrip,
    "bench": cmd_bench,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style config file; flags override it")
    common.add_argument("--seed", type=int, help=f"global seed (default {DEFAULT_SEED})")
    common.add_argument("--corpus", help="dataset file: tab-separated utterances, reference last")
    common.add_argument("--model", help="parameter file")
    common.add_argument("--out", help="output path")
    common.add_argument("--connection-words", dest="connection_words",
                        help="connection-word file, one entry per line")
    common.add_argument("--tag-classes", dest="tag_classes", type=int,
                        help="number of tag classes N (O plus N-1 fragment orders)")
    common.add_argument("--gold-inject", dest="gold_inject", action="store_true",
                        help="decode gold labels instead of model predictions")
    common.add_argument("--policy", choices=("latest", "score"), help="duplicate-run resolution")
    common.add_argument("--workers", type=int, help="worker processes")

    parser = _Parser(prog="sgt", description="Sequential greedy tagging for utterance rewriting.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("build-labels", parents=[common], help="build tag labels from a corpus")
    p = sub.add_parser("train", parents=[common], help="train the tagger")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    sub.add_parser("rewrite", parents=[common], help="rewrite the last utterance of each dialogue")
    p = sub.add_parser("evaluate", parents=[common], help="score predictions against references")
    p.add_argument("--predictions", help="predictions file, one line per dialogue")
    sub.add_parser("roundtrip", parents=[common], help="check gold labels splice back to references")
    p = sub.add_parser("bench", parents=[common], help="single-example latency")
    p.add_argument("--warmup", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--mode", choices=("full", "decode"))
    return parser


def _setup_logging() -> None:
    level = os.environ.get("SGT_LOG", "warn").lower()
    levels = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = build_run_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"sgt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IoFailure, EncodingFailure, CorruptFile, VersionMismatch) as exc:
        print(f"sgt: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NonFiniteLoss, NonFiniteGradient) as exc:
        print(f"sgt: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SGTError as exc:
        print(f"sgt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
