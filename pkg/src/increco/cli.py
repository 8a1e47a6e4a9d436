"""Command-line entry points.

Subcommands: convert, run, score, analyze, compress-stats. Exit status is 0
on success, 1 on usage errors, 2 on data errors. Outputs are deterministic
for identical invocations. Set INCRECO_LOG to adjust verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import analysis, corpus, metrics
from .annotation import AnnotationError, render
from .corpus import CorpusError, Document
from .decode import DecodeError, RunResult
from .metrics import MetricsError
from .resolver import IncrementalCoreferenceResolver
from .state import Mode, StateError

log = logging.getLogger("increco")

DATA_ERRORS = (
    CorpusError,
    AnnotationError,
    StateError,
    DecodeError,
    MetricsError,
    analysis.AnalysisError,
    OSError,
    ValueError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 instead of argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="increco", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    convert = commands.add_parser("convert", help="convert CoNLL <-> docjson")
    convert.add_argument("--input", required=True)
    convert.add_argument("--output", required=True)
    convert.add_argument("--to", choices=["conll", "docjson"], required=True)

    run = commands.add_parser("run", help="run the incremental resolver")
    run.add_argument("--input", required=True)
    run.add_argument(
        "--mode",
        choices=[m.value for m in Mode],
        default=Mode.ENTITY_CENTRIC.value,
    )
    run.add_argument("--chunk-budget", type=int, default=100)
    run.add_argument("--context", type=int, default=None,
                     help="context budget in annotated items (default 100)")
    run.add_argument("--ordering", choices=["recency", "document"],
                     default="recency")
    run.add_argument("--predictor", default="oracle",
                     help='"oracle" or an endpoint like tcp:HOST:PORT / '
                          '"stdio:CMD ARGS..."')
    run.add_argument("--max-nesting", type=int, default=4)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--predictions", required=True,
                     help="docjson output with predicted clusters")
    run.add_argument("--rendered", default=None,
                     help="annotated-text output for inspection "
                          "(default: <predictions>.txt)")
    run.add_argument("--runlog", default=None,
                     help="per-chunk input/output length log (JSON)")

    score = commands.add_parser("score", help="print the metric block")
    score.add_argument("--gold", required=True)
    score.add_argument("--pred", required=True)

    analyze = commands.add_parser("analyze", help="error and oracle analyses")
    tasks = analyze.add_subparsers(dest="task", required=True)

    breakdown = tasks.add_parser(
        "breakdown", help="missed-mention taxonomy of pred-b vs pred-a"
    )
    breakdown.add_argument("--gold", required=True)
    breakdown.add_argument("--pred-a", required=True)
    breakdown.add_argument("--pred-b", required=True)
    breakdown.add_argument("--output", required=True)

    restore = tasks.add_parser(
        "restore", help="add gold links for filtered mention classes"
    )
    restore.add_argument("--gold", required=True)
    restore.add_argument("--pred", required=True)
    restore.add_argument(
        "--filters", default="em-ne,pm-ne,em-def,pm-def",
        help="comma list of em-ne, pm-ne, em-def, pm-def",
    )
    restore.add_argument("--output", required=True)

    ner = tasks.add_parser(
        "ner-augment", help="append exact-string-matching NER spans"
    )
    ner.add_argument("--gold", required=True,
                     help="corpus carrying the NER layer")
    ner.add_argument("--pred", required=True)
    ner.add_argument("--categories", default=",".join(analysis.MATCH_CATEGORIES))
    ner.add_argument("--output", required=True)

    pseudo = tasks.add_parser(
        "pseudosingletons", help="augment a corpus with singleton spans"
    )
    pseudo.add_argument("--corpus", required=True)
    pseudo.add_argument("--spans", required=True,
                        help='JSONL of {"doc_id": .., "spans": [[s, e], ..]}')
    pseudo.add_argument("--output", required=True)

    compress = commands.add_parser(
        "compress-stats", help="compression-ratio report from two run logs"
    )
    compress.add_argument("--full-prefix", required=True)
    compress.add_argument("--entity-centric", required=True)
    compress.add_argument("--output", default=None,
                          help="CSV path (default: stdout)")
    return parser


def _read_corpus(path: str) -> list[Document]:
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                head = line
                break
        else:
            return []
    if head.startswith("#begin document"):
        return corpus.read_conll(path)
    return corpus.read_docjson(path)


def _clusterings(docs: list[Document], path: str) -> dict[str, metrics.Clustering]:
    out = {}
    for doc in docs:
        if doc.gold_clusters is None:
            raise CorpusError(f"{path}: {doc.doc_id} carries no clusters")
        out[doc.doc_id] = metrics.clustering_of(doc.gold_clusters)
    return out


def _with_clusters(doc: Document, clusters) -> Document:
    return Document(
        doc_id=doc.doc_id,
        tokens=doc.tokens,
        sentence_bounds=doc.sentence_bounds,
        pos=doc.pos,
        ner_spans=doc.ner_spans,
        gold_clusters=clusters,
    )


def _cmd_convert(args) -> int:
    docs = _read_corpus(args.input)
    if args.to == "conll":
        corpus.write_conll(docs, args.output)
    else:
        corpus.write_docjson(docs, args.output)
    log.info("wrote %d documents to %s", len(docs), args.output)
    return 0


def _cmd_run(args) -> int:
    context = args.context
    if args.mode == Mode.FULL_PREFIX.value and context is not None:
        print(
            "warning: --context is ignored in full-prefix mode",
            file=sys.stderr,
        )
    resolver = IncrementalCoreferenceResolver(
        mode=args.mode,
        chunk_budget=args.chunk_budget,
        context_budget=100 if context is None else context,
        ordering=args.ordering,
        predictor=args.predictor,
        max_nesting=args.max_nesting,
        jobs=args.jobs,
    )
    docs = _read_corpus(args.input)
    results = resolver.run(docs)
    predicted = [
        _with_clusters(doc, result.clusters)
        for doc, result in zip(docs, results)
    ]
    corpus.write_docjson(predicted, args.predictions)
    # predictions always ship in both forms: clusters and annotated text
    _write_rendered(results, args.rendered or args.predictions + ".txt")
    if args.runlog:
        run_log = analysis.RunLog(
            mode=args.mode,
            docs={
                r.doc_id: tuple(
                    analysis.ChunkRecord(c.index, c.input_len, c.output_len)
                    for c in r.chunk_logs
                )
                for r in results
            },
        )
        with open(args.runlog, "w", encoding="utf-8") as handle:
            handle.write(run_log.to_json() + "\n")
    log.info("decoded %d documents", len(results))
    return 0


def _write_rendered(results: list[RunResult], path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for result in results:
            handle.write(f"#begin {result.doc_id}\n")
            for seq in result.decoded:
                handle.write(render(seq) + "\n")
            handle.write(f"#end {result.doc_id}\n")


def _cmd_score(args) -> int:
    gold = _clusterings(_read_corpus(args.gold), args.gold)
    pred = _clusterings(_read_corpus(args.pred), args.pred)
    print(metrics.format_scores(metrics.score_documents(gold, pred)))
    return 0


def _cmd_breakdown(args) -> int:
    gold_docs = {d.doc_id: d for d in _read_corpus(args.gold)}
    pred_a = _clusterings(_read_corpus(args.pred_a), args.pred_a)
    pred_b = _clusterings(_read_corpus(args.pred_b), args.pred_b)
    tables = []
    for doc_id, doc in sorted(gold_docs.items()):
        a_keys = [key for c in pred_a.get(doc_id, ()) for key in c]
        b_keys = [key for c in pred_b.get(doc_id, ()) for key in c]
        tables.append(analysis.missed_mention_breakdown(doc, a_keys, b_keys))
    table = analysis.merge_breakdowns(tables)
    with open(args.output, "w", encoding="utf-8") as handle:
        handle.write(analysis.breakdown_csv(table))
    print(f"missed mentions profiled: {sum(table.values())}")
    return 0


def _cmd_restore(args) -> int:
    filters = analysis.parse_filters(args.filters)
    gold_docs = _read_corpus(args.gold)
    pred = {d.doc_id: d for d in _read_corpus(args.pred)}
    restored_docs = []
    for doc in gold_docs:
        pred_doc = pred.get(doc.doc_id)
        if pred_doc is None:
            raise CorpusError(f"{args.pred}: missing document {doc.doc_id}")
        groups = [c.spans for c in (pred_doc.gold_clusters or ())]
        restored = analysis.restore_gold_links(groups, doc, filters)
        restored_docs.append(
            _with_clusters(pred_doc, corpus.clusters_from_spans(restored))
        )
    corpus.write_docjson(restored_docs, args.output)
    return 0


def _cmd_ner_augment(args) -> int:
    categories = tuple(
        c.strip() for c in args.categories.split(",") if c.strip()
    )
    gold_docs = _read_corpus(args.gold)
    pred = {d.doc_id: d for d in _read_corpus(args.pred)}
    augmented_docs = []
    for doc in gold_docs:
        pred_doc = pred.get(doc.doc_id)
        if pred_doc is None:
            raise CorpusError(f"{args.pred}: missing document {doc.doc_id}")
        groups = [c.spans for c in (pred_doc.gold_clusters or ())]
        augmented = analysis.ner_exact_match_augment(groups, doc, categories)
        augmented_docs.append(
            _with_clusters(pred_doc, corpus.clusters_from_spans(augmented))
        )
    corpus.write_docjson(augmented_docs, args.output)
    return 0


def _cmd_pseudosingletons(args) -> int:
    docs = _read_corpus(args.corpus)
    spans = analysis.read_singleton_spans(args.spans)
    augmented, report = analysis.add_pseudosingletons(docs, spans)
    corpus.write_docjson(augmented, args.output)
    print(f"accepted {report.accepted} rejected {report.rejected}")
    return 0


def _cmd_compress_stats(args) -> int:
    with open(args.full_prefix, encoding="utf-8") as handle:
        fp_log = analysis.RunLog.from_json(handle.read())
    with open(args.entity_centric, encoding="utf-8") as handle:
        ec_log = analysis.RunLog.from_json(handle.read())
    ratios, mean = analysis.compression_ratio(fp_log, ec_log)
    text = analysis.compression_csv(ratios, mean)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        print(text, end="")
    return 0


_COMMANDS = {
    "convert": _cmd_convert,
    "run": _cmd_run,
    "score": _cmd_score,
    "compress-stats": _cmd_compress_stats,
}

_ANALYZE_TASKS = {
    "breakdown": _cmd_breakdown,
    "restore": _cmd_restore,
    "ner-augment": _cmd_ner_augment,
    "pseudosingletons": _cmd_pseudosingletons,
}


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("INCRECO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analyze":
            return _ANALYZE_TASKS[args.task](args)
        return _COMMANDS[args.command](args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except DATA_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
