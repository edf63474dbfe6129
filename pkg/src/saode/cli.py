"""Command-line entry point: ``saode <subcommand> ...`` (or ``python -m saode``)."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .classifiers import MODEL_KINDS, ModelConfig, load_model, save_model
from .counts import AttributeSchema, FormatError
from .ingest import (
    StreamHeader,
    Vocabulary,
    build_vocab,
    load_stopwords,
    preprocess,
    read_jsonl,
    read_stream,
    write_stream,
)
from .metrics import METRICS
from .prequential import RunConfig, compare_values, run_prequential
from .report import fmt, read_overall, read_season_mla, season_chart, write_report
from .seasons import KINDS, SeasonSpec
from .synth import generate, load_spec

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("saode")

# Built-in defaults for settings that may also come from --config.
DEFAULTS = {
    "model": "saode",
    "season_feature": False,
    "per_season": False,
    "m": 1,
    "alpha": 1.0,
    "season": "dow",
    "season_card": None,
    "window": 1000,
    "vocab_size": 2000,
    "seed": 0,
}


class CliError(Exception):
    """Bad input discovered after argument parsing (exit status 1)."""


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    # every default is None so that config-file values can be told apart
    if "model" in names:
        p.add_argument("--model", choices=MODEL_KINDS, default=None)
        wrap = p.add_mutually_exclusive_group()
        wrap.add_argument("--season-feature", action="store_true", default=None,
                          help="add the season as an ordinary attribute")
        wrap.add_argument("--per-season", action="store_true", default=None,
                          help="train one model per season value")
        p.add_argument("--m", type=int, default=None, help="parent frequency threshold (default 1)")
        p.add_argument("--alpha", type=float, default=None, help="smoothing pseudo-count (default 1.0)")
        p.add_argument("--window", type=int, default=None, help="instances per window row (default 1000)")
    if "season" in names:
        p.add_argument("--season", choices=KINDS, default=None, help="seasonal cycle (default dow)")
        p.add_argument("--season-card", type=int, default=None,
                       help="number of season values for --season column")
    if "vocab" in names:
        p.add_argument("--vocab-size", type=int, default=None, help="vocabulary size (default 2000)")
        p.add_argument("--stopwords", type=Path, default=None, help="stop-word file, one word per line")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", type=Path, default=None, help="TOML file of default settings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saode", description="Seasonal AODE experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vocab", help="build a vocabulary from JSON-lines documents")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p, "vocab")

    p = sub.add_parser("preprocess", help="encode JSON-lines documents as an instance stream")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--vocab", type=Path, default=None,
                   help="vocabulary file; built from the input when omitted")
    p.add_argument("--vocab-prefix", type=int, default=None,
                   help="build the vocabulary from only the first N documents")
    _add_common(p, "vocab", "season")

    p = sub.add_parser("generate", help="write a synthetic seasonal stream")
    p.add_argument("--spec", type=Path, required=True, help="generator TOML")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n-instances", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("run", help="prequential evaluation of one model")
    p.add_argument("--input", type=Path, required=True, help="encoded stream")
    p.add_argument("--out", type=Path, required=True, help="report directory")
    p.add_argument("--run-id", default=None)
    p.add_argument("--n-attributes", type=int, default=None,
                   help="attribute count when the stream has no header")
    p.add_argument("--svg", action="store_true", help="also draw MLA by season")
    p.add_argument("--save-model", type=Path, default=None)
    _add_common(p, "model", "season")

    p = sub.add_parser("compare", help="tabulate several report directories")
    p.add_argument("reports", type=Path, nargs="+")
    p.add_argument("--out", type=Path, default=None, help="comparison CSV")
    p.add_argument("--svg", type=Path, default=None, help="MLA-by-season chart of all reports")

    p = sub.add_parser("inspect-model", help="summarise a saved model")
    p.add_argument("model_file", type=Path)
    return parser


def effective(args: argparse.Namespace, keys: Sequence[str]) -> dict:
    """Flags override the config file, which overrides built-in defaults."""
    cfg = {}
    if getattr(args, "config", None) is not None:
        with open(args.config, "rb") as fh:
            cfg = tomllib.load(fh)
        unknown = set(cfg) - set(DEFAULTS)
        if unknown:
            raise CliError(f"{args.config}: unknown settings {sorted(unknown)}")
    out = {}
    for key in keys:
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else cfg.get(key, DEFAULTS[key])
    return out


def _season_spec(settings: dict) -> SeasonSpec:
    try:
        return SeasonSpec(settings["season"], settings["season_card"])
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _stopwords(args):
    return load_stopwords(args.stopwords) if args.stopwords is not None else None


def cmd_vocab(args) -> int:
    s = effective(args, ["vocab_size"])
    vocab = build_vocab((d.text for d in read_jsonl(args.input)), s["vocab_size"], _stopwords(args))
    _ensure_parent(args.out)
    vocab.save(args.out)
    log.info("wrote %d terms to %s", len(vocab), args.out)
    return 0


def cmd_preprocess(args) -> int:
    s = effective(args, ["vocab_size", "season", "season_card"])
    spec = _season_spec(s)
    docs = list(read_jsonl(args.input))
    stop = _stopwords(args)
    if args.vocab is not None:
        vocab = Vocabulary.load(args.vocab)
    else:
        pool = docs if args.vocab_prefix is None else docs[:args.vocab_prefix]
        vocab = build_vocab((d.text for d in pool), s["vocab_size"], stop)
    header, instances = preprocess(docs, vocab, spec, stop)
    _ensure_parent(args.out)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        write_stream(fh, instances, header)
    return 0


def cmd_generate(args) -> int:
    spec = load_spec(args.spec)
    # --seed (or a config seed) overrides the seed in the generator file
    seed = args.seed
    if seed is None and args.config is not None:
        seed = effective(args, ["seed"])["seed"] if _config_has(args.config, "seed") else None
    spec = dataclasses.replace(
        spec,
        seed=spec.seed if seed is None else seed,
        n_instances=spec.n_instances if args.n_instances is None else args.n_instances,
    )
    header = StreamHeader(spec.n, spec.n_seasons, spec.labels)
    _ensure_parent(args.out)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        write_stream(fh, generate(spec), header)
    return 0


def _config_has(path: Path, key: str) -> bool:
    with open(path, "rb") as fh:
        return key in tomllib.load(fh)


def cmd_run(args) -> int:
    s = effective(args, ["model", "season_feature", "per_season", "m", "alpha", "window",
                         "season", "season_card", "seed"])
    with open(args.input, encoding="utf-8") as fh:
        header, stream = read_stream(fh)
        n = header.n if header.n is not None else args.n_attributes
        if n is None:
            raise CliError("stream has no header; pass --n-attributes")
        if header.n_seasons is not None:
            n_seasons = header.n_seasons
            season_spec = None
        else:
            season_spec = _season_spec(s)
            n_seasons = season_spec.n_seasons
        try:
            model_config = ModelConfig(s["m"], s["alpha"], season_spec)
            config = RunConfig(s["model"], s["season_feature"], s["per_season"], model_config,
                               window=s["window"], label_breakdown=True, seed=s["seed"])
            model = config.build(AttributeSchema.binary(n, n_seasons))
        except ValueError as exc:
            raise CliError(str(exc)) from exc
        run_id = args.run_id or config.model_name
        report = run_prequential(stream, model.schema, config, labels=header.labels,
                                 run_id=run_id, model=model, keep_records=False)

    settings = {
        "version": __version__,
        "run_id": run_id,
        "input": str(args.input),
        "model_name": config.model_name,
        "n_attributes": n,
        "n_seasons": n_seasons,
        "labels": list(report.labels),
        "skipped": report.skipped,
        **{k: s[k] for k in sorted(s)},
    }
    write_report(report, args.out, settings, svg=args.svg)
    if args.save_model is not None:
        _ensure_parent(args.save_model)
        args.save_model.write_bytes(save_model(model))
    vals = report.overall.values()
    print(f"{run_id}: N={report.overall.n} " + " ".join(f"{k}={vals[k]:.4f}" for k in METRICS))
    return 0


def cmd_compare(args) -> int:
    names, values, universes = [], [], []
    for d in args.reports:
        name, vals, labels = read_overall(d)
        names.append(name)
        values.append(vals)
        universes.append(labels)
    if any(u != universes[0] for u in universes[1:]):
        raise CliError("reports cover different label universes")
    table = compare_values(names, values)
    print(table.render())
    if args.out is not None:
        _ensure_parent(args.out)
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["report", "model", *METRICS, "best"])
            for i, (d, name, vals) in enumerate(zip(args.reports, names, values)):
                best = ";".join(m for m in METRICS if i in table.best[m])
                w.writerow([str(d), name, *(fmt(vals[m]) for m in METRICS), best])
    if args.svg is not None:
        _ensure_parent(args.svg)
        series = {}
        for d, name in zip(args.reports, names):
            series[name if name not in series else f"{name} ({d})"] = read_season_mla(d)
        args.svg.write_text(season_chart(series), encoding="utf-8")
    return 0


def cmd_inspect(args) -> int:
    model = load_model(args.model_file.read_bytes())
    info = {
        **model.describe(),
        "n_attributes": model.schema.n,
        "n_seasons": model.schema.n_seasons,
        "m": model.config.m,
        "alpha": model.config.alpha,
        "classes": [sorted(c) for c in model.catalog.classes],
        "stores": [
            {
                "backend": store.backend,
                "count": store.count,
                "class_counts": store.class_counts(len(model.catalog)).tolist(),
                "season_counts": [store.season_count(t) for t in range(store.schema.n_seasons)],
            }
            for store in model.stores()
        ],
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


COMMANDS = {
    "vocab": cmd_vocab,
    "preprocess": cmd_preprocess,
    "generate": cmd_generate,
    "run": cmd_run,
    "compare": cmd_compare,
    "inspect-model": cmd_inspect,
}


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("SODE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (CliError, ValueError, FormatError, tomllib.TOMLDecodeError) as exc:
        print(f"saode {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"saode {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
