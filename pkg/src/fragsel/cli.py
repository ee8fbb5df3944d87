"""Command-line interface.

Errors are reported on stderr as one line, ``<CODE>: <detail>``. Exit codes
are 0 on success, 2 for usage errors, 3 for backend failures and 4 for
data or format errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .backends import load_backend, load_backends
from .config import Config, load_config
from .errors import DataError, FragselError
from .features import FragmentFeatureExtractor
from .fig import FigSample, build_fig_dataset, dump_fig_records, load_fig_records
from .io import dumps_line, iter_jsonl, read_documents, read_queries, read_results, read_single
from .pipeline import null_clock, run
from .report import (
    RunManifest,
    aggregate,
    bucket_fig,
    format_fig_histogram,
    format_tables,
)
from .selector import SelectorModel, TrainConfig, train
from .text_segmentation import recur_split, split_sentences
from .types import Document, Query
from .visual_segmentation import DetectionCandidate, VisualFilterThresholds, failed_constraints

log = logging.getLogger("fragsel")


def _config(args) -> Config:
    config = load_config(args.config) if getattr(args, "config", None) else Config()
    if getattr(args, "seed", None) is not None:
        config = config.replace(seed=args.seed)
    return config


def _manifest(args, config: Config, backends: dict) -> dict:
    return RunManifest(args.command_name, config.to_dict(), backends, config.seed).to_dict()


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# ------------------------------------------------------------------ commands


def cmd_segment_text(args) -> int:
    query = Query.from_dict(read_single(args.query))
    doc = Document.from_dict(read_single(args.doc))
    scorer = load_backend(args.scores, "segment_scorer")
    sentences = split_sentences(doc.body) if not doc.is_image else []
    fragment, trace = recur_split(query, doc, scorer, sentences=sentences or None)
    _emit({"fragment": fragment.to_dict(), "trace": trace.to_dict(), "sentences": sentences})
    return 0


def cmd_segment_image(args) -> int:
    config = _config(args)
    query = Query.from_dict(read_single(args.query))
    image_ref = args.image_id
    if args.corpus:
        docs = {d.id: d for d in read_documents(args.corpus)}
        if args.image_id not in docs:
            raise DataError(f"image {args.image_id!r} not found in {args.corpus}")
        image_ref = docs[args.image_id].image_ref
    detector = load_backend(args.detections, "detector")
    thresholds = VisualFilterThresholds.from_config(config)
    candidates: list[DetectionCandidate] = detector.detect(query, image_ref)
    kept, rejected = [], []
    for c in candidates:
        failed = failed_constraints(c, thresholds)
        if failed:
            rejected.append({"candidate": c.to_dict(), "failed": failed})
        else:
            kept.append(c.to_dict())
    _emit(
        {
            "image_id": args.image_id,
            "thresholds": {"tau_obj": thresholds.tau_obj, "tau_sem": thresholds.tau_sem, "tau_size": thresholds.tau_size},
            "kept": kept,
            "rejected": rejected,
        }
    )
    return 0


def cmd_fig_build(args) -> int:
    config = _config(args)
    samples = [FigSample.from_dict(d) for d in iter_jsonl(args.inp)]
    likelihood = load_backend(args.likelihood, "likelihood")
    teacher = load_backend(args.teacher, "teacher") if args.teacher else None
    records = build_fig_dataset(samples, likelihood, teacher, config)
    descriptors = {"likelihood": likelihood.descriptor, "teacher": teacher.descriptor if teacher else None}
    header = {"tau_fig": config.tau_fig, **descriptors, "manifest": _manifest(args, config, descriptors)}
    Path(args.out).write_text(dump_fig_records(records, header), encoding="utf-8")
    log.info("wrote %d FIG records to %s", len(records), args.out)
    return 0


def cmd_selector_train(args) -> int:
    config = _config(args)
    overrides = {
        "alpha": args.alpha,
        "temperature": args.temperature,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "learning_rate": args.lr,
    }
    config = config.replace(**{k: v for k, v in overrides.items() if v is not None})
    with open(args.data, encoding="utf-8") as fh:
        _, records = load_fig_records(fh)
    model = train(records, FragmentFeatureExtractor(), TrainConfig.from_config(config))
    payload = model.to_dict()
    payload["manifest"] = _manifest(args, config, {})
    Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    log.info("final loss %.6f after %d epochs", model.final_loss, config.epochs)
    return 0


def cmd_run(args) -> int:
    from .baselines import run_baseline

    config = _config(args)
    if args.parallelism is not None:
        config = config.replace(parallelism=args.parallelism)
    corpus = read_documents(args.corpus)
    queries = read_queries(args.queries)
    backends = load_backends(args.backends, corpus)
    clock = null_clock if args.no_timing else None
    model = None
    if args.baseline is None:
        if not args.model:
            raise DataError("--model is required unless --baseline is given")
        model = SelectorModel.load(args.model)
    elif args.baseline == "truncate" and args.budget is None:
        raise DataError("--baseline truncate needs --budget")

    rows = [{"manifest": _manifest(args, config, backends.descriptors())}]
    for query in queries:
        kwargs = {"clock": clock} if clock else {}
        if args.baseline is None:
            answer, report = run(query, config, backends, model, **kwargs)
        else:
            answer, report = run_baseline(query, config, backends, args.baseline, args.budget, **kwargs)
        rows.append({"query_id": query.id, "answer": answer, "report": report.to_dict()})
    text = "".join(dumps_line(r) + "\n" for r in rows)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def cmd_report(args) -> int:
    out = {}
    if args.results:
        _, rows = read_results(args.results)
        out["runs"] = aggregate(rows)
    if args.fig:
        edges = [float(e) for e in args.edges.split(",")] if args.edges else [0.0, 0.2]
        with open(args.fig, encoding="utf-8") as fh:
            _, records = load_fig_records(fh)
        out["fig_buckets"] = {"edges": edges, "counts": bucket_fig(records, edges), "convention": "left-open, right-closed"}
    if not out:
        raise DataError("report needs --results and/or --fig")
    if args.json:
        _emit(out)
        return 0
    blocks = []
    if "runs" in out:
        blocks.append(format_tables(out["runs"]))
    if "fig_buckets" in out:
        blocks.append(format_fig_histogram(out["fig_buckets"]["counts"], out["fig_buckets"]["edges"]))
    print("\n\n".join(blocks))
    return 0


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="fragsel", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"fragsel {__version__}")
    parser.add_argument("--config", default=None, help="flat key = value config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--verbose", "-v", action="store_true", default=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment-text", parents=[common], help="bisect one text document")
    p.add_argument("--query", required=True)
    p.add_argument("--doc", required=True)
    p.add_argument("--scores", required=True, help="scorer fixture, fixture dir, endpoints file or URL")
    p.set_defaults(func=cmd_segment_text, command_name="segment-text")

    p = sub.add_parser("segment-image", parents=[common], help="filter detector output for one image")
    p.add_argument("--query", required=True)
    p.add_argument("--image-id", required=True)
    p.add_argument("--detections", required=True)
    p.add_argument("--corpus", help="resolve the image reference from this corpus")
    p.set_defaults(func=cmd_segment_image, command_name="segment-image")

    fig = sub.add_parser("fig", help="FIG supervision").add_subparsers(dest="fig_command", required=True)
    p = fig.add_parser("build", parents=[common], help="score fragments and write FIG records")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--likelihood", required=True)
    p.add_argument("--teacher")
    p.set_defaults(func=cmd_fig_build, command_name="fig build")

    sel = sub.add_parser("selector", help="selector training").add_subparsers(dest="selector_command", required=True)
    p = sel.add_parser("train", parents=[common], help="train the linear selector on FIG records")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--temperature", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_selector_train, command_name="selector train")

    p = sub.add_parser("run", parents=[common], help="answer queries with the full pipeline or a baseline")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--model")
    p.add_argument("--backends", required=True, help="fixture dir, endpoints file or URL")
    p.add_argument("--out", required=True, help="output JSONL, or - for stdout")
    p.add_argument("--baseline", choices=("truncate", "coarse"))
    p.add_argument("--budget", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--no-timing", action="store_true", help="record zero latencies for reproducible output")
    p.set_defaults(func=cmd_run, command_name="run")

    p = sub.add_parser("report", parents=[common], help="aggregate token and latency tables")
    p.add_argument("--results")
    p.add_argument("--fig", help="FIG records to bucket by interval")
    p.add_argument("--edges", help="comma-separated bucket edges (default 0.0,0.2)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report, command_name="report")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FragselError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"E_IO: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError) as exc:
        print(f"E_DATA: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
