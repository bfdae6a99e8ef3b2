"""Corpus module."""

from .documents import (
    ImageRef,
    Paragraph,
    MultimodalDocument,
    Passage,
    IctPair,
    VisualQuestion,
    format_from_uri,
    read_jsonl,
    write_jsonl,
    load_documents,
    save_documents,
    load_passages,
    save_passages,
    load_pairs,
    save_pairs,
    load_questions,
    save_questions,
)
from .sentences import split_sentences
from .chunking import split_passages, corpus_statistics, title_prefix, strip_title, word_count
from .ict import IctConfig, make_ict_pairs, make_corpus_ict_pairs, stable_hash, document_rng
from .splits import FilterReport, CorpusTooSmallError, filter_corpus, split_by_article

__all__ = [
    "ImageRef",
    "Paragraph",
    "MultimodalDocument",
    "Passage",
    "IctPair",
    "VisualQuestion",
    "format_from_uri",
    "read_jsonl",
    "write_jsonl",
    "load_documents",
    "save_documents",
    "load_passages",
    "save_passages",
    "load_pairs",
    "save_pairs",
    "load_questions",
    "save_questions",
    "split_sentences",
    "split_passages",
    "corpus_statistics",
    "title_prefix",
    "strip_title",
    "word_count",
    "IctConfig",
    "make_ict_pairs",
    "make_corpus_ict_pairs",
    "stable_hash",
    "document_rng",
    "FilterReport",
    "CorpusTooSmallError",
    "filter_corpus",
    "split_by_article",
]
