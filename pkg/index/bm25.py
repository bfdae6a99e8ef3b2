"""Okapi BM25 over an in-memory inverted index."""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from config.settings import BM25_B, BM25_K1
from corpus.documents import Passage, read_jsonl, write_jsonl
from evaluation.answers import normalize_answer
from evaluation.runs import ScoredList

logger = logging.getLogger(__name__)


def bm25_tokenize(text: str) -> List[str]:
    """Same normaliser as answer matching, then whitespace split."""
    return normalize_answer(text).split()


@dataclass
class Bm25Index:
    """Postings ``term -> [(doc_position, tf), ...]`` with per-document lengths."""
    doc_ids: List[str]
    doc_lengths: np.ndarray
    postings: Dict[str, List[Tuple[int, int]]] = field(default_factory=dict)
    k1: float = BM25_K1
    b: float = BM25_B

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    @property
    def avg_doc_length(self) -> float:
        return float(self.doc_lengths.mean()) if self.doc_count else 0.0

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log((self.doc_count - df + 0.5) / (df + 0.5) + 1.0)


def build_bm25(
    documents: Iterable[Tuple[str, Sequence[str]]],
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> Bm25Index:
    """Index ``(doc_id, tokens)`` pairs; tokens are used as given."""
    doc_ids, lengths = [], []
    postings: Dict[str, List[Tuple[int, int]]] = {}
    for position, (doc_id, tokens) in enumerate(documents):
        doc_ids.append(str(doc_id))
        lengths.append(len(tokens))
        for term, tf in sorted(Counter(tokens).items()):
            postings.setdefault(term, []).append((position, tf))
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("document ids must be unique")
    index = Bm25Index(doc_ids=doc_ids, doc_lengths=np.array(lengths, dtype=np.float64), postings=postings, k1=k1, b=b)
    logger.info("Built BM25 index: %d documents, %d terms", index.doc_count, len(postings))
    return index


def build_bm25_from_passages(passages: Sequence[Passage], k1: float = BM25_K1, b: float = BM25_B) -> Bm25Index:
    return build_bm25(((p.passage_id, bm25_tokenize(p.text)) for p in passages), k1=k1, b=b)


def bm25_scores(index: Bm25Index, query_terms: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
    """Scores for every document plus a mask of documents matching at least one term.

    Repeated query terms count once.
    """
    scores = np.zeros(index.doc_count)
    matched = np.zeros(index.doc_count, dtype=bool)
    if not index.doc_count:
        return scores, matched
    avg = index.avg_doc_length or 1.0
    norm = index.k1 * (1.0 - index.b + index.b * index.doc_lengths / avg)
    for term in dict.fromkeys(query_terms):
        entries = index.postings.get(term)
        if not entries:
            continue
        docs = np.fromiter((d for d, _ in entries), dtype=np.int64, count=len(entries))
        tf = np.fromiter((t for _, t in entries), dtype=np.float64, count=len(entries))
        scores[docs] += index.idf(term) * tf * (index.k1 + 1.0) / (tf + norm[docs])
        matched[docs] = True
    return scores, matched


def bm25_search(index: Bm25Index, query_terms: Sequence[str], k: int, question_id: str = "") -> ScoredList:
    """Top-K documents containing at least one query term; ties by id."""
    if k < 1:
        raise ValueError("K must be positive")
    scores, matched = bm25_scores(index, query_terms)
    hits = np.flatnonzero(matched)
    return ScoredList.from_scores(question_id, [index.doc_ids[i] for i in hits], scores[hits].tolist(), k=k)


def save_bm25(path: Union[str, Path], index: Bm25Index) -> int:
    """Header record followed by one postings record per term."""
    header = {
        "k1": index.k1,
        "b": index.b,
        "doc_ids": index.doc_ids,
        "doc_lengths": [int(x) for x in index.doc_lengths],
    }
    records = [header] + [
        {"term": term, "postings": [[d, tf] for d, tf in entries]}
        for term, entries in sorted(index.postings.items())
    ]
    return write_jsonl(path, records)


def load_bm25(path: Union[str, Path]) -> Bm25Index:
    records = iter(read_jsonl(path))
    try:
        header = next(records)
    except StopIteration:
        raise ValueError(f"{path}: BM25 index file is empty") from None
    postings = {r["term"]: [(int(d), int(tf)) for d, tf in r["postings"]] for r in records}
    lengths = np.array(header["doc_lengths"], dtype=np.float64)
    for term, entries in postings.items():
        for d, _ in entries:
            if not 0 <= d < len(lengths):
                raise ValueError(f"{path}: postings for {term!r} reference unknown document {d}")
    return Bm25Index(
        doc_ids=list(header["doc_ids"]), doc_lengths=lengths, postings=postings,
        k1=float(header["k1"]), b=float(header["b"]),
    )
