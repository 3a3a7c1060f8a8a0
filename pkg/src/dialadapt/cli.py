"""Command line interface: one binary, one subcommand per pipeline stage.

All diagnostics go to stderr prefixed `dialadapt: error: <code>:` so shell
pipelines can tell failure classes apart; results go to stdout.  The exit
code is 0 exactly when no error occurred.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

from .corpus import (
    CleaningMap,
    ParallelExample,
    clean_text,
    load_corpus,
    load_dialect_manifest,
    save_corpus,
    stratified_split,
)
from .errors import ConfigError, DialadaptError, MalformedRecordError
from .evaluation import adapt_sentence, evaluate_model, group_by_dialect, wer_matrix
from .model import PROFILES, ModelMeta, Seq2SeqModel, load_checkpoint
from .synth import SyntheticDialect, contrastive_dialects, generate_corpus, load_rules, rules_to_text
from .training import PRESETS, TrainingConfig, get_preset, train_model, transfer_train
from .vocab import Vocabulary

logger = logging.getLogger(__name__)

_CONFIG_FIELDS = {f.name: f for f in dataclasses.fields(TrainingConfig)}
_INT_FIELDS = {"steps", "batch_size", "seed", "checkpoint_every", "log_every"}
_FLOAT_FIELDS = {"learning_rate", "lr_decay", "dropout"}


def _parse_config_value(key: str, raw: str):
    raw = raw.strip()
    if key not in _CONFIG_FIELDS:
        raise ConfigError(f"unknown training option {key!r}; known: {sorted(_CONFIG_FIELDS)}")
    try:
        if key in _INT_FIELDS:
            return int(raw)
        if key in _FLOAT_FIELDS:
            return float(raw)
        if key == "grad_clip":
            return None if raw.lower() in ("none", "off") else float(raw)
        if key == "freeze":
            return frozenset(part.strip() for part in raw.split(",") if part.strip())
        if key == "optimizer":
            return raw
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for training option {key!r}") from None
    raise ConfigError(f"training option {key!r} cannot be set from the command line")


def _read_config_file(path: str) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def _training_config(args) -> TrainingConfig:
    config = get_preset(args.preset)
    overrides: dict = {}
    if getattr(args, "config", None):
        for key, value in _read_config_file(args.config).items():
            overrides[key] = _parse_config_value(key, value)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = _parse_config_value(key.strip(), value)
    return dataclasses.replace(config, **overrides) if overrides else config


def _declared_dialects(args) -> set[str] | None:
    if getattr(args, "dialects", None):
        return set(load_dialect_manifest(args.dialects))
    return None


def cmd_preprocess(args) -> int:
    cmap = CleaningMap.from_file(args.cleaning_map) if args.cleaning_map else CleaningMap()
    declared = _declared_dialects(args)
    examples: list[ParallelExample] = []
    text = Path(args.input).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise MalformedRecordError(f"expected 3 tab-separated fields, got {len(parts)}", line=lineno)
        dialect = parts[0].strip()
        source_words = clean_text(parts[1], cmap).split()
        target_words = clean_text(parts[2], cmap).split()
        try:
            example = ParallelExample(dialect, source_words, target_words)
        except MalformedRecordError as err:
            raise MalformedRecordError(str(err), line=lineno) from None
        if declared is not None and example.dialect_id not in declared:
            raise MalformedRecordError(f"undeclared dialect {example.dialect_id!r}", line=lineno)
        examples.append(example)
    save_corpus(examples, args.output)
    print(f"wrote {len(examples)} records to {args.output}")
    return 0


def cmd_split(args) -> int:
    try:
        ratios = tuple(float(part) for part in args.ratios.split(","))
    except ValueError:
        raise ConfigError(f"bad ratios {args.ratios!r}; expected three comma-separated numbers") from None
    if len(ratios) != 3:
        raise ConfigError(f"expected three ratios, got {len(ratios)}")
    examples = load_corpus(args.input, dialects=_declared_dialects(args))
    split = stratified_split(examples, ratios=ratios, seed=args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for part, rows in split.parts.items():
        save_corpus(rows, out_dir / f"{part}.tsv")
        print(f"{part}: {len(rows)} sentences -> {out_dir / f'{part}.tsv'}")
    return 0


def cmd_synth(args) -> int:
    dialects: list[SyntheticDialect] = []
    for item in args.dialect or []:
        name, _, rule_path = item.partition("=")
        if not name or not rule_path:
            raise ConfigError(f"--dialect expects NAME=RULEFILE, got {item!r}")
        dialects.append(SyntheticDialect(name, tuple(load_rules(rule_path))))
    if not dialects:
        dialects = contrastive_dialects()
    vocabulary = None
    if args.vocabulary:
        vocabulary = [w for w in Path(args.vocabulary).read_text(encoding="utf-8").split() if w]
    examples = generate_corpus(dialects, args.sentences, seed=args.seed, vocabulary=vocabulary)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_corpus(examples, out_dir / "corpus.tsv")
    manifest = out_dir / "dialects.txt"
    manifest.write_text("".join(d.dialect_id + "\n" for d in dialects), encoding="utf-8")
    for dialect in dialects:
        (out_dir / f"rules-{dialect.dialect_id}.txt").write_text(
            rules_to_text(list(dialect.rules)), encoding="utf-8"
        )
    print(f"wrote {len(examples)} sentences for {len(dialects)} dialects to {out_dir / 'corpus.tsv'}")
    return 0


def cmd_train(args) -> int:
    declared = _declared_dialects(args)
    train_examples = load_corpus(args.train, dialects=declared)
    valid_examples = load_corpus(args.valid, dialects=declared) if args.valid else []
    flags = sorted({ex.dialect_id for ex in train_examples})
    vocab = Vocabulary.from_corpus(train_examples + valid_examples, flags=flags)
    config = _training_config(args)
    logger.info("resolved training config: %s", config)
    profile = PROFILES[args.profile]
    meta = ModelMeta(mode=args.mode, dialect=args.dialect if args.mode == "plain" else None)
    model = Seq2SeqModel.create(profile, vocab, seed=config.seed, meta=meta)
    run = train_model(model, train_examples, valid_examples, config, out_dir=args.out_dir)
    print(f"trained {config.steps} steps; final loss {run.loss_log[-1][1]:.4f}")
    if run.best_valid is not None:
        print(f"best valid loss {run.best_valid:.4f} -> {run.best_path}")
    print(f"final checkpoint: {run.final_path}")
    return 0


def cmd_transfer(args) -> int:
    base = load_checkpoint(args.base)
    declared = _declared_dialects(args)
    train_examples = load_corpus(args.train, dialects=declared)
    valid_examples = load_corpus(args.valid, dialects=declared) if args.valid else []
    config = _training_config(args)
    logger.info("resolved training config: %s", config)
    run = transfer_train(base, args.dialect, train_examples, valid_examples, config, out_dir=args.out_dir)
    print(f"transferred to {args.dialect!r} in {config.steps} steps; final loss {run.loss_log[-1][1]:.4f}")
    if run.best_valid is not None:
        print(f"best valid loss {run.best_valid:.4f} -> {run.best_path}")
    print(f"final checkpoint: {run.final_path}")
    return 0


def cmd_adapt(args) -> int:
    model = load_checkpoint(args.checkpoint)
    lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    out_lines: list[str] = []
    for line in lines:
        words = line.split()
        if not words:
            out_lines.append("")
            continue
        out_lines.append(" ".join(adapt_sentence(model, words, dialect=args.dialect, beam_size=args.beam)))
    output = "".join(line + "\n" for line in out_lines)
    if args.output:
        Path(args.output).write_text(output, encoding="utf-8")
        print(f"adapted {sum(1 for l in lines if l.split())} sentences -> {args.output}")
    else:
        sys.stdout.write(output)
    return 0


def cmd_evaluate(args) -> int:
    model = load_checkpoint(args.checkpoint)
    examples = load_corpus(args.test)
    if args.dialect:
        examples = [ex for ex in examples if ex.dialect_id == args.dialect]
    report = evaluate_model(model, examples, beam_size=args.beam)
    print(report.summary())
    if args.per_dialect:
        for dialect, group in group_by_dialect(examples).items():
            sub = evaluate_model(model, group, beam_size=args.beam)
            print(f"{dialect}: macro WER {sub.macro_wer:.4f} over {sub.n_sentences} sentences")
    return 0


def cmd_matrix(args) -> int:
    models: dict[str, Seq2SeqModel] = {}
    for item in args.checkpoint:
        name, _, path = item.partition("=")
        if not name or not path:
            raise ConfigError(f"--checkpoint expects NAME=PATH, got {item!r}")
        if name in models:
            raise ConfigError(f"duplicate model name {name!r}")
        models[name] = load_checkpoint(path)
    examples = load_corpus(args.test)
    matrix = wer_matrix(models, examples, beam_size=args.beam)
    dialects = sorted(next(iter(matrix.values())))
    col_min = {d: min(matrix[name][d] for name in matrix) for d in dialects}
    name_width = max(len("model"), max(len(name) for name in matrix))
    header = "model".ljust(name_width) + "".join(f"  {d:>10}" for d in dialects)
    print(header)
    for name, row in matrix.items():
        row_min = min(row[d] for d in dialects)
        cells = []
        for d in dialects:
            marks = ("*" if row[d] == col_min[d] else "") + ("+" if row[d] == row_min else "")
            cells.append(f"  {100.0 * row[d]:.2f}{marks}".rjust(12))
        print(name.ljust(name_width) + "".join(cells))
    print("WER per 100 reference words; * column minimum, + row minimum")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["model"] + dialects)
            for name, row in matrix.items():
                writer.writerow([name] + [f"{row[d]:.6f}" for d in dialects])
        print(f"wrote {args.csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dialadapt",
        description="Adapt standard-language text to regional dialects with "
        "character-level sequence models.",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    # accepted after the subcommand as well; SUPPRESS keeps a bare subcommand
    # from clobbering a --verbose given before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS,
                        help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean and validate a raw parallel corpus",
                       parents=[common])
    p.add_argument("--input", required=True, help="raw TSV corpus (dialect<TAB>source<TAB>target)")
    p.add_argument("--output", required=True, help="where to write the cleaned corpus")
    p.add_argument("--cleaning-map", help="character cleaning map file")
    p.add_argument("--dialects", help="manifest restricting dialect ids, one per line")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("split", help="stratified train/valid/test split", parents=[common])
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratios", default="0.7,0.15,0.15")
    p.add_argument("--dialects", help="manifest restricting dialect ids")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="generate a synthetic rule-based dialect corpus",
                       parents=[common])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sentences", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dialect", action="append", metavar="NAME=RULEFILE",
                   help="add a dialect from a rewrite rule file (default: built-in trio)")
    p.add_argument("--vocabulary", help="file of standard-language words to sample from")
    p.set_defaults(func=cmd_synth)

    for name, help_text in (("train", "train a model from scratch"),
                            ("transfer", "specialize a base model to one dialect")):
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.add_argument("--train", required=True, help="training corpus TSV")
        p.add_argument("--valid", help="validation corpus TSV")
        p.add_argument("--out-dir", required=True)
        p.add_argument("--preset", default="desk", choices=sorted(PRESETS))
        p.add_argument("--config", help="key = value file overriding the preset")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one training option")
        p.add_argument("--dialects", help="manifest restricting dialect ids")
        if name == "train":
            p.add_argument("--mode", default="flagged", choices=("flagged", "plain"))
            p.add_argument("--dialect", help="restrict a plain model to one dialect")
            p.add_argument("--profile", default="desk", choices=sorted(PROFILES))
            p.set_defaults(func=cmd_train)
        else:
            p.add_argument("--base", required=True, help="base model checkpoint")
            p.add_argument("--dialect", required=True, help="dialect to specialize for")
            p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("adapt", help="adapt standard-language text with a trained model",
                       parents=[common])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="text file, one sentence per line")
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--dialect", help="target dialect (required for flagged models)")
    p.add_argument("--beam", type=int, default=1)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("evaluate", help="score a model on a parallel test set", parents=[common])
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--dialect", help="score only this dialect")
    p.add_argument("--beam", type=int, default=1)
    p.add_argument("--per-dialect", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("matrix", help="macro WER of several models across all dialects",
                       parents=[common])
    p.add_argument("--checkpoint", action="append", required=True, metavar="NAME=PATH")
    p.add_argument("--test", required=True)
    p.add_argument("--beam", type=int, default=1)
    p.add_argument("--csv", help="also write the matrix as CSV (WER fractions)")
    p.set_defaults(func=cmd_matrix)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DialadaptError as err:
        print(f"dialadapt: error: {err.code}: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"dialadapt: error: io: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
