"""Index module."""

from .dense import DenseIndex, build_dense, search_dense, search_dense_batch, save_dense, load_dense
from .bm25 import (
    Bm25Index,
    bm25_tokenize,
    build_bm25,
    build_bm25_from_passages,
    bm25_scores,
    bm25_search,
    save_bm25,
    load_bm25,
)
from .normalize import znorm

__all__ = [
    "DenseIndex",
    "build_dense",
    "search_dense",
    "search_dense_batch",
    "save_dense",
    "load_dense",
    "Bm25Index",
    "bm25_tokenize",
    "build_bm25",
    "build_bm25_from_passages",
    "bm25_scores",
    "bm25_search",
    "save_bm25",
    "load_bm25",
    "znorm",
]
