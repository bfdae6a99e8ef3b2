"""Evaluation module."""

from .answers import (
    AnswerKey,
    normalize_answer,
    get_tokens,
    contains_answer,
    passage_relevance,
    exact_match,
    f1_bow,
    load_answer_keys,
    save_answer_keys,
)
from .runs import ScoredList, read_run, write_run
from .metrics import (
    Qrels,
    MetricValue,
    MetricReport,
    UnknownQuestionError,
    build_qrels,
    read_qrels,
    write_qrels,
    mrr_at_k,
    p_at_k,
    hits_at_k,
    metric_names,
    evaluate_run,
)
from .significance import fisher_randomization, is_significant, describe

__all__ = [
    "AnswerKey",
    "normalize_answer",
    "get_tokens",
    "contains_answer",
    "passage_relevance",
    "exact_match",
    "f1_bow",
    "load_answer_keys",
    "save_answer_keys",
    "ScoredList",
    "read_run",
    "write_run",
    "Qrels",
    "MetricValue",
    "MetricReport",
    "UnknownQuestionError",
    "build_qrels",
    "read_qrels",
    "write_qrels",
    "mrr_at_k",
    "p_at_k",
    "hits_at_k",
    "metric_names",
    "evaluate_run",
    "fisher_randomization",
    "is_significant",
    "describe",
]
