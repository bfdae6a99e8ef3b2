"""Exhaustive maximum inner product search over passage embeddings."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from autodiff.checkpoint import write_npz
from backend.precomputed import DimensionMismatchError, EmbeddingTable
from evaluation.runs import ScoredList

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DenseIndex:
    """Immutable id list and row-aligned embedding matrix."""
    dim: int
    ids: Tuple[str, ...]
    matrix: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)


def build_dense(table: EmbeddingTable) -> DenseIndex:
    """Index every row of the table; rows must be finite."""
    matrix = np.array(table.matrix, dtype=np.float64, copy=True)
    if len(table) == 0:
        matrix = np.zeros((0, table.dim))
    bad = np.flatnonzero(~np.isfinite(matrix).all(axis=1))
    if bad.size:
        raise ValueError(f"embedding for id {table.ids[bad[0]]!r} has non-finite entries")
    matrix.setflags(write=False)
    index = DenseIndex(dim=table.dim, ids=tuple(table.ids), matrix=matrix)
    logger.info("Built dense index: %d passages, dim %d", len(index), index.dim)
    return index


def _top_k(index: DenseIndex, scores: np.ndarray, k: int) -> List[int]:
    n = scores.shape[0]
    if k < n:
        # keep every row tied with the k-th score so the id tie-break is exact
        kth = np.partition(-scores, k - 1)[k - 1]
        candidates = np.flatnonzero(-scores <= kth)
    else:
        candidates = np.arange(n)
    ordered = sorted(candidates.tolist(), key=lambda i: (-scores[i], index.ids[i]))
    return ordered[:k]


def _check_k(k: int):
    if k < 1:
        raise ValueError("K must be positive")


def _check_query(index: DenseIndex, query: np.ndarray):
    if query.shape[-1] != index.dim:
        raise DimensionMismatchError(f"query has dimension {query.shape[-1]}, index has {index.dim}")


def search_dense(index: DenseIndex, query: np.ndarray, k: int, question_id: str = "") -> ScoredList:
    """Exact top-K rows by dot product, ties by passage id ascending."""
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    _check_k(k)
    # an empty index may have lost its width (empty embedding file)
    if len(index) == 0:
        return ScoredList(question_id)
    _check_query(index, query)
    scores = index.matrix @ query
    ranked = ScoredList(question_id)
    ranked.entries = [(index.ids[i], float(scores[i])) for i in _top_k(index, scores, k)]
    return ranked


def search_dense_batch(
    index: DenseIndex,
    queries: np.ndarray,
    k: int,
    question_ids: Optional[Sequence[str]] = None,
    threads: int = 1,
) -> List[ScoredList]:
    """``search_dense`` for every row of ``queries``, one score matrix product per batch."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    _check_k(k)
    question_ids = list(question_ids) if question_ids is not None else [str(i) for i in range(len(queries))]
    if len(question_ids) != len(queries):
        raise ValueError(f"{len(question_ids)} question ids for {len(queries)} queries")
    if len(index) == 0:
        return [ScoredList(qid) for qid in question_ids]
    _check_query(index, queries)
    scores = queries @ index.matrix.T

    def one(row: int) -> ScoredList:
        ranked = ScoredList(question_ids[row])
        ranked.entries = [(index.ids[i], float(scores[row, i])) for i in _top_k(index, scores[row], k)]
        return ranked

    if threads > 1 and len(queries) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(queries))))
    return [one(row) for row in range(len(queries))]


def save_dense(path: Union[str, Path], index: DenseIndex) -> Path:
    return write_npz(path, {"ids": np.array(index.ids, dtype=str), "matrix": index.matrix, "dim": np.array(index.dim)})


def load_dense(path: Union[str, Path]) -> DenseIndex:
    with np.load(Path(path), allow_pickle=False) as archive:
        ids = [str(i) for i in archive["ids"]]
        matrix = np.array(archive["matrix"], dtype=np.float64)
        dim = int(archive["dim"])
    matrix = matrix.reshape(len(ids), dim)
    matrix.setflags(write=False)
    return DenseIndex(dim=dim, ids=tuple(ids), matrix=matrix)
