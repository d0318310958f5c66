"""Command-line entry point.

Verbs: ingest, rationales, evaluate, ensemble, report. Exit codes:
0 success, 1 usage error, 2 data error, 3 provider error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import client as client_mod
from . import harness
from .corpus import CorpusError, load_corpus
from .harness import DataError, RunConfig
from .prompting import PromptConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors must exit 1, not argparse's 2
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="rationale-aes",
                     description="Rationale-augmented essay scoring pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--corpus", required=True, type=Path)
        p.add_argument("--prompt", type=int, default=6)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", required=True, type=Path)
        p.add_argument("--manifest", type=Path, default=None,
                       help="split manifest path (default: <out>/split_manifest.csv)")
        p.add_argument("--config", type=Path, default=None,
                       help="JSON overrides for ensemble parameters")

    p = sub.add_parser("ingest", help="load corpus, write split manifest and summary")
    common(p)
    p.add_argument("--ratios", type=float, nargs=3, default=(0.70, 0.10, 0.20),
                   metavar=("TRAIN", "VAL", "TEST"))

    p = sub.add_parser("rationales", help="generate scoring rationales in batch")
    common(p)
    p.add_argument("--generator", required=True, help="model id, e.g. gpt-4.1")
    p.add_argument("--endpoint", required=True, help="chat-completion URL")
    p.add_argument("--api-key-env", default="OPENAI_API_KEY")
    p.add_argument("--template", required=True, type=Path,
                   help="JSON file with passage, writing_prompt, rubric_text, "
                        "optional scoring_notes / succinctness_addendum / temperature")
    p.add_argument("--journal", type=Path, default=None)
    p.add_argument("--workers", type=int, default=4)

    p = sub.add_parser("evaluate", help="score member prediction files on the test split")
    common(p)
    p.add_argument("--members", required=True, type=Path,
                   help="manifest CSV: model_id,source_tag,path")

    p = sub.add_parser("ensemble", help="run all ensemble strategies over member filters")
    common(p)
    p.add_argument("--members", required=True, type=Path)

    p = sub.add_parser("report", help="assemble the markdown report from emitted tables")
    common(p)
    return parser


def _run_config(args) -> RunConfig:
    overrides = None
    correlation_stat = "spearman"
    if getattr(args, "config", None):
        if not args.config.exists():
            raise DataError(f"config file not found: {args.config}")
        with open(args.config) as fh:
            overrides = json.load(fh)
        correlation_stat = overrides.pop("correlation_stat", "spearman")
    return RunConfig(
        corpus_path=args.corpus,
        out_dir=args.out,
        prompt_id=args.prompt,
        seed=args.seed,
        ratios=tuple(getattr(args, "ratios", (0.70, 0.10, 0.20))),
        manifest_path=args.manifest,
        members_path=getattr(args, "members", None),
        ensemble_overrides=overrides,
        correlation_stat=correlation_stat,
    )


def _cmd_rationales(args) -> int:
    with open(args.template) as fh:
        template = json.load(fh)
    config = PromptConfig(
        generator_id=args.generator,
        passage=template["passage"],
        writing_prompt=template["writing_prompt"],
        rubric_text=template["rubric_text"],
        temperature=template.get("temperature"),
        scoring_notes=template.get("scoring_notes"),
        succinctness_addendum=bool(template.get("succinctness_addendum", False)),
    )
    essays = load_corpus(args.corpus, args.prompt)
    args.out.mkdir(parents=True, exist_ok=True)
    journal_path = args.journal or args.out / f"journal_{args.generator}.ndjson"
    provider = client_mod.HttpChatProvider(
        url=args.endpoint, model=args.generator, api_key_env=args.api_key_env
    )
    records = client_mod.run_batch(
        essays, config, provider, journal_path, max_workers=args.workers
    )
    client_mod.write_rationale_csv(
        records, args.out / f"rationales_{args.generator}.csv"
    )
    if records:
        stats = client_mod.rationale_stats(records)
        print(f"rationales: {len(records)}/{len(essays)} done; words "
              f"{stats.min_words}-{stats.max_words}, mean {stats.mean_words:.1f}; "
              f"{stats.over_limit_count} over the {client_mod.TOKEN_LIMIT}-token limit")
    n_failed = len(essays) - len(records)
    if n_failed:
        print(f"rationales: {n_failed} essays failed after retries "
              f"(journal: {journal_path})", file=sys.stderr)
        return EXIT_PROVIDER
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    try:
        if args.command == "rationales":
            return _cmd_rationales(args)
        config = _run_config(args)
        if args.command == "ingest":
            summary = harness.cmd_ingest(config)
            print(f"ingested {summary['n_essays']} essays (prompt {summary['prompt_id']})")
            print(f"score counts: {summary['score_counts']}")
            print(f"score percents: {summary['score_percents']}")
            print(f"length words: min {summary['length_min']}, "
                  f"max {summary['length_max']}, mean {summary['length_mean']}")
            print(f"split sizes: {summary['split_sizes']}")
        elif args.command == "evaluate":
            tables = harness.cmd_evaluate(config)
            for tag, rows in tables.items():
                if rows:
                    print(f"wrote table_{tag}.csv ({len(rows)} rows)")
        elif args.command == "ensemble":
            tables = harness.cmd_ensemble(config)
            for tag in tables:
                print(f"wrote table_{tag}.csv")
        elif args.command == "report":
            path = harness.cmd_report(config)
            print(f"wrote {path}")
        return EXIT_OK
    except (CorpusError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except client_mod.JournalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except client_mod.ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER


if __name__ == "__main__":
    sys.exit(main())
