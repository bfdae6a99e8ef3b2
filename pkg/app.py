"""Multimodal ICT retrieval toolkit

Command-line entry point: corpus building, training, embedding, retrieval,
fusion, evaluation and report generation over a content-hashed artifact tree.
"""

import argparse
import json
import logging
import sys
from typing import Dict, List, Optional, Sequence

from config import CONFIG_ENV_VAR, PROJECT_NAME, PROJECT_SUBTITLE, PROJECT_VERSION, load_config
from fusion.models import KINDS
from services import Pipeline, QUESTION_SETS, SEARCH_KINDS, SPLITS

logger = logging.getLogger(PROJECT_NAME)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class UsageError(Exception):
    pass


class JsonErrorParser(argparse.ArgumentParser):
    """Reports usage errors as one JSON line."""

    def error(self, message):
        raise UsageError(message)


# ===== Argument parsing =====

def _labelled(values: Optional[Sequence[str]], flag: str) -> Dict[str, str]:
    pairs = {}
    for value in values or []:
        label, sep, path = value.partition("=")
        if not sep or not label or not path:
            raise UsageError(f"{flag} expects LABEL=PATH, got {value!r}")
        if label in pairs:
            raise UsageError(f"{flag} label {label!r} given twice")
        pairs[label] = path
    return pairs


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"YAML config (default: ${CONFIG_ENV_VAR})")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--out", help="artifact root, overrides paths.root")
    common.add_argument("--force", action="store_true", help="recompute even when outputs are fresh")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--quiet", action="store_true", help="no progress bars")

    parser = JsonErrorParser(prog="app.py", description=f"{PROJECT_NAME} {PROJECT_VERSION}: {PROJECT_SUBTITLE}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=JsonErrorParser)

    sub.add_parser("synth", parents=[common], help="generate a synthetic knowledge base and questions")
    sub.add_parser("build-corpus", parents=[common], help="filter documents and chunk passages")
    sub.add_parser("split", parents=[common], help="article-disjoint splits, question splits and qrels")
    sub.add_parser("ict-pairs", parents=[common], help="multimodal ICT pairs per split")

    p = sub.add_parser("train", parents=[common], help="run one training stage")
    p.add_argument("--stage", type=int, required=True, choices=[1, 2, 3])
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--init", help="checkpoint to initialise from")
    p.add_argument("--name", help="model name (default: stage<N>-<kind>)")
    p.add_argument("--max-steps", type=int, help="override the plan's max_steps")

    p = sub.add_parser("embed", parents=[common], help="embed every passage")
    p.add_argument("--model", help="checkpoint whose passage tower encodes passages")
    p.add_argument("--modality", default="passage", choices=["passage", "image"])
    p.add_argument("--name")

    p = sub.add_parser("index", parents=[common], help="build a dense or BM25 index")
    p.add_argument("--kind", required=True, choices=["dense", "bm25"])
    p.add_argument("--embeddings", help="embedding file for a dense index")
    p.add_argument("--name")

    p = sub.add_parser("search", parents=[common], help="retrieve passages for a question split")
    p.add_argument("--kind", required=True, choices=SEARCH_KINDS)
    p.add_argument("--questions", default="visual", choices=QUESTION_SETS)
    p.add_argument("--split", default="test", choices=SPLITS)
    p.add_argument("--model")
    p.add_argument("--index")
    p.add_argument("--name")

    p = sub.add_parser("fuse", parents=[common], help="late fusion of a text and an image run")
    p.add_argument("--text-run", required=True)
    p.add_argument("--image-run", required=True)
    p.add_argument("--name", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--val-text")
    p.add_argument("--val-image")
    p.add_argument("--val-qrels")

    p = sub.add_parser("mine-negatives", parents=[common], help="hard negatives lacking the answer")
    p.add_argument("--questions", default="visual", choices=QUESTION_SETS)
    p.add_argument("--split", default="train", choices=SPLITS)
    p.add_argument("--run", help="mine from this run instead of BM25")

    p = sub.add_parser("evaluate", parents=[common], help="metric report for one run")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--predictions", help="JSONL of {question_id, prediction} for EM/F1")
    p.add_argument("--name")

    p = sub.add_parser("significance", parents=[common], help="randomization test between two runs")
    p.add_argument("--run-a", required=True)
    p.add_argument("--run-b", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metric")
    p.add_argument("--name")

    p = sub.add_parser("report", parents=[common], help="comparison tables and charts")
    p.add_argument("--run", action="append", required=True, metavar="LABEL=PATH")
    p.add_argument("--qrels", required=True)
    p.add_argument("--predictions", action="append", metavar="LABEL=PATH")
    p.add_argument("--log", action="append", metavar="LABEL=PATH", help="training log for the curves")
    p.add_argument("--name", default="report")
    return parser


# ===== Dispatch =====

def dispatch(pipeline: Pipeline, args: argparse.Namespace) -> Dict:
    command = args.command
    if command == "synth":
        return pipeline.synth()
    if command == "build-corpus":
        return pipeline.build_corpus()
    if command == "split":
        return pipeline.split()
    if command == "ict-pairs":
        return pipeline.ict_pairs()
    if command == "train":
        return pipeline.train(args.stage, args.kind, init=args.init, name=args.name, max_steps=args.max_steps)
    if command == "embed":
        return pipeline.embed(model=args.model, name=args.name, modality=args.modality)
    if command == "index":
        return pipeline.index(args.kind, embeddings=args.embeddings, name=args.name)
    if command == "search":
        return pipeline.search(args.kind, args.questions, args.split, model=args.model, index=args.index, name=args.name)
    if command == "fuse":
        validation = None
        if args.alpha is None:
            if not (args.val_text and args.val_image and args.val_qrels):
                raise UsageError("fuse needs --alpha or all of --val-text, --val-image and --val-qrels")
            validation = (args.val_text, args.val_image, args.val_qrels)
        return pipeline.fuse(args.text_run, args.image_run, args.name, alpha=args.alpha, validation=validation)
    if command == "mine-negatives":
        return pipeline.mine_negatives(args.questions, args.split, run=args.run)
    if command == "evaluate":
        return pipeline.evaluate(args.run, args.qrels, name=args.name, predictions=args.predictions)
    if command == "significance":
        return pipeline.significance(args.run_a, args.run_b, args.qrels, metric=args.metric, name=args.name)
    if command == "report":
        return pipeline.report(
            _labelled(args.run, "--run"), args.qrels, name=args.name,
            predictions=_labelled(args.predictions, "--predictions"), logs=_labelled(args.log, "--log"),
        )
    raise UsageError(f"unknown command {command!r}")


def _fail(error: BaseException, code: int) -> int:
    print(json.dumps({"error": type(error).__name__, "message": str(error)}, sort_keys=True), file=sys.stderr)
    return code


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        return _fail(e, 2)

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr, force=True)
    try:
        config = load_config(args.config, seed=args.seed)
        if args.out:
            config.paths.root = args.out
        pipeline = Pipeline(config, threads=args.threads, force=args.force, progress=not args.quiet)
        result = dispatch(pipeline, args)
    except UsageError as e:
        return _fail(e, 2)
    except (ValueError, RuntimeError, KeyError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        return _fail(e, 1)

    print(json.dumps(result, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
