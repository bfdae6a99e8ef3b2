"""Offline embedding tables: line-delimited ``{id, vector}`` records."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Tuple, Union

import numpy as np

from corpus.documents import read_jsonl, write_jsonl

logger = logging.getLogger(__name__)


class DimensionMismatchError(ValueError):
    """Raised when a vector's width differs from the rest of its table."""


@dataclass
class EmbeddingTable:
    """Ordered ids with one row per id."""
    ids: List[str] = field(default_factory=list)
    matrix: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.ids):
            raise DimensionMismatchError(
                f"table has {len(self.ids)} ids but matrix of shape {self.matrix.shape}"
            )
        self._positions: Dict[str, int] = {}
        for i, key in enumerate(self.ids):
            if key in self._positions:
                raise ValueError(f"duplicate id {key!r} in embedding table")
            self._positions[key] = i

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, key: str) -> bool:
        return key in self._positions

    def __getitem__(self, key: str) -> np.ndarray:
        return self.matrix[self._positions[key]]

    def items(self) -> Iterable[Tuple[str, np.ndarray]]:
        return zip(self.ids, self.matrix)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, Iterable[float]]]) -> "EmbeddingTable":
        """Build from ``(id, vector)`` pairs; the first vector fixes the width."""
        ids, rows, dim = [], [], None
        for key, vector in pairs:
            row = np.asarray(vector, dtype=np.float64).reshape(-1)
            if dim is None:
                dim = row.size
            elif row.size != dim:
                raise DimensionMismatchError(f"vector for id {key!r} has dimension {row.size}, expected {dim}")
            if not np.all(np.isfinite(row)):
                raise ValueError(f"vector for id {key!r} has non-finite entries")
            ids.append(str(key))
            rows.append(row)
        if not rows:
            return cls()
        return cls(ids=ids, matrix=np.vstack(rows))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Iterable[float]]) -> "EmbeddingTable":
        return cls.from_pairs(mapping.items())


def load_precomputed(path: Union[str, Path]) -> EmbeddingTable:
    """Read an embedding table; an empty file gives an empty table."""
    table = EmbeddingTable.from_pairs((r["id"], r["vector"]) for r in read_jsonl(path))
    logger.info("Loaded %d embeddings of dimension %d from %s", len(table), table.dim, path)
    return table


def save_precomputed(path: Union[str, Path], table: EmbeddingTable) -> int:
    """Write one record per row; floats use their shortest exact repr."""
    return write_jsonl(path, ({"id": key, "vector": row.tolist()} for key, row in table.items()))


def cosine_scores(query: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Cosine similarity of one vector against every row; zero rows score 0."""
    query = np.asarray(query, dtype=np.float64)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.size == 0:
        return np.zeros(matrix.shape[0])
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(query)
    dots = matrix @ query
    return np.divide(dots, norms, out=np.zeros_like(dots), where=norms > 0)
