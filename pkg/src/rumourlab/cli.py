"""Command-line entry point.

Subcommands: ingest, stats, build-trees, train, evaluate, predict,
analyze, selftest. Progress and summaries go to stderr; `predict` writes
its tab-separated label stream to stdout; everything else lands in
files. Exit codes: 0 success, 1 validation/usage error, 2 internal
error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analyze as analysis
from .config import RunConfig, load_config, parse_config_text
from .errors import ParseError, ValidationError
from .evalrun import RunPredictor, compute_report, report_to_text, run_experiment
from .featurize import fit_tfidf, save_vocabulary
from .ingest import assemble_threads, load_split, load_tweets, save_split, split_dataset
from .models.data import tweet_docs
from .proptree import build_tree, write_tree_corpus


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _build_parser() -> _Parser:
    parser = _Parser(prog="rumourlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="validate a dataset and report thread assembly")
    ingest.add_argument("--data", required=True)
    ingest.add_argument("--split-out", help="write a split manifest to this directory")
    ingest.add_argument("--ratios", default="0.7,0.15,0.15")
    ingest.add_argument("--seed", type=int, default=13)

    stats = sub.add_parser("stats", help="corpus summary")
    stats.add_argument("--data", required=True)

    trees = sub.add_parser("build-trees", help="write the tree corpus file")
    trees.add_argument("--data", required=True)
    trees.add_argument("--out", required=True)
    trees.add_argument("--config")

    train = sub.add_parser("train", help="run a training experiment")
    train.add_argument("--config")
    train.add_argument("--data")
    train.add_argument("--model")
    train.add_argument("--out-dir")
    train.add_argument("--set", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config value")

    evaluate = sub.add_parser("evaluate", help="report on the test split of a run")
    evaluate.add_argument("--run", required=True)
    evaluate.add_argument("--data", help="defaults to the run's dataset")

    predict = sub.add_parser("predict", help="emit thread_id<TAB>label<TAB>score lines")
    predict.add_argument("--run", required=True)
    predict.add_argument("--data", required=True)

    analyze = sub.add_parser("analyze", help="write analysis tables")
    analyze.add_argument("--kind", required=True,
                         choices=("attributes", "topics", "emotion", "sentiment"))
    analyze.add_argument("--data", required=True)
    analyze.add_argument("--out", required=True)
    analyze.add_argument("--run", help="run directory used to predict missing labels")
    analyze.add_argument("--top-n", type=int, default=20)
    analyze.add_argument("--exclude", default="covid,corona virus")

    sub.add_parser("selftest", help="gradient checks and oracle suites")
    return parser


def _train_config_from_args(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = []
    if args.data:
        overrides.append(f"dataset = {args.data}")
    if args.model:
        overrides.append(f"model = {args.model}")
    if args.out_dir:
        overrides.append(f"out_dir = {args.out_dir}")
    overrides.extend(args.set)
    if overrides:
        config = parse_config_text("\n".join(overrides), config)
    if not config.dataset:
        raise ValidationError("no dataset configured; pass --data or set dataset =")
    return config


def _cmd_ingest(args) -> int:
    records = load_tweets(args.data)
    threads, diagnostics = assemble_threads(records)
    labeled = [t for t in threads if t.label is not None]
    print(f"records: {len(records)}")
    print(f"threads: {len(threads)} ({len(labeled)} labeled)")
    print(f"orphan replies dropped: {diagnostics.orphan_replies}")
    print(f"unlabeled sources: {diagnostics.unlabeled_sources}")
    if args.split_out:
        ratios = tuple(float(x) for x in args.ratios.split(","))
        split = split_dataset(labeled, ratios, args.seed)
        save_split(split, args.split_out)
        print(f"split manifest written to {args.split_out}")
    return 0


def _cmd_stats(args) -> int:
    records = load_tweets(args.data)
    threads, _ = assemble_threads(records)
    labels = {}
    reply_total = 0
    for thread in threads:
        labels[thread.label] = labels.get(thread.label, 0) + 1
        reply_total += len(thread.replies)
    stamps = [r.created_at for r in records]
    print(f"records: {len(records)}")
    print(f"threads: {len(threads)}, replies: {reply_total}")
    for label in sorted(labels, key=str):
        print(f"label {label}: {labels[label]}")
    if stamps:
        print(f"first tweet: {min(stamps).isoformat()}")
        print(f"last tweet: {max(stamps).isoformat()}")
    return 0


def _cmd_build_trees(args) -> int:
    config = load_config(args.config) if args.config else RunConfig()
    records = load_tweets(args.data)
    threads, _ = assemble_threads(records)
    labeled = [t for t in threads if t.label is not None]
    split = split_dataset(labeled, config.ratios, config.split_seed)
    tfidf = fit_tfidf(tweet_docs(split.train), config.tfidf_top_k)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    trees = [
        build_tree(t, tfidf, keep_reply_links=config.keep_reply_links,
                   raw_counts=config.tree_raw_counts)
        for t in threads
    ]
    write_tree_corpus(trees, out)
    save_vocabulary(tfidf, out.with_suffix(".vocab.txt"), out.with_suffix(".idf.txt"))
    _progress(f"wrote {len(threads)} trees to {out}")
    return 0


def _cmd_train(args) -> int:
    config = _train_config_from_args(args)
    result = run_experiment(config, progress=_progress)
    _progress(f"report written to {result.run_dir / 'report.txt'}")
    _progress(report_to_text(result.report).rstrip())
    return 0


def _cmd_evaluate(args) -> int:
    predictor = RunPredictor(args.run)
    data_path = args.data or predictor.config.dataset
    records = load_tweets(data_path)
    threads, _ = assemble_threads(records)
    labeled = [t for t in threads if t.label is not None]
    split = load_split(Path(args.run) / "split", labeled)
    labels, _ = predictor.predict(split.test)
    report = compute_report(labels, [t.label for t in split.test],
                            model=predictor.config.model,
                            config_digest=predictor.config.digest(),
                            seeds=predictor.config.seeds)
    out = Path(args.run) / "eval_report.txt"
    out.write_text(report_to_text(report), encoding="utf-8")
    _progress(f"evaluation written to {out}")
    _progress(report_to_text(report).rstrip())
    return 0


def _cmd_predict(args) -> int:
    predictor = RunPredictor(args.run)
    records = load_tweets(args.data)
    threads, _ = assemble_threads(records)
    labels, scores = predictor.predict(threads)
    for thread, label, score in zip(threads, labels, scores):
        sys.stdout.write(f"{thread.id}\t{label}\t{score:.6g}\n")
    return 0


def _labeled_sources(threads, run_dir):
    if all(t.label is not None for t in threads):
        return [(t.source, t.label) for t in threads]
    if run_dir is None:
        raise ValidationError(
            "dataset has unlabeled threads; pass --run to predict labels"
        )
    predictor = RunPredictor(run_dir)
    labels, _ = predictor.predict(threads)
    return [(t.source, label) for t, label in zip(threads, labels)]


def _cmd_analyze(args) -> int:
    records = load_tweets(args.data)
    threads, _ = assemble_threads(records)
    labeled = _labeled_sources(threads, args.run)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "attributes":
        table = analysis.histograms_to_csv(analysis.attribute_histograms(labeled))
        path = out_dir / "attributes.csv"
    elif args.kind == "topics":
        exclude = tuple(k.strip() for k in args.exclude.split(",") if k.strip())
        tables = analysis.monthly_top_terms(labeled, exclude, args.top_n)
        table = analysis.terms_to_csv(tables)
        path = out_dir / "topics.csv"
    else:
        scored = [
            (record, label,
             analysis.score_emotions(record.text),
             analysis.score_sentiment(record.text))
            for record, label in labeled
        ]
        rows = analysis.monthly_average_scores(scored)
        wanted = analysis.EMOTIONS if args.kind == "emotion" else ("compound",)
        rows = [r for r in rows if r.dimension in wanted]
        table = analysis.timeseries_to_csv(rows)
        path = out_dir / f"{args.kind}.csv"
    path.write_text(table, encoding="utf-8")
    _progress(f"wrote {path}")
    return 0


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    failures = run_selftest(print)
    return 0 if failures == 0 else 1


_COMMANDS = {
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "build-trees": _cmd_build_trees,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "predict": _cmd_predict,
    "analyze": _cmd_analyze,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (ValidationError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # internal failure
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
