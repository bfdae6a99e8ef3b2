"""Ranked result lists and their TREC-run line format."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

RUN_COLUMNS = ["question_id", "passage_id", "rank", "score", "tag"]


@dataclass
class ScoredList:
    """Passages for one question, descending by score, ties by passage id."""
    question_id: str
    entries: List[Tuple[str, float]] = field(default_factory=list)
    flags: FrozenSet[str] = frozenset()

    def __post_init__(self):
        self.entries = sorted(((str(p), float(s)) for p, s in self.entries), key=lambda e: (-e[1], e[0]))

    @classmethod
    def from_scores(
        cls,
        question_id: str,
        passage_ids: Sequence[str],
        scores: Sequence[float],
        k: Optional[int] = None,
        flags: Iterable[str] = (),
    ) -> "ScoredList":
        ranked = cls(question_id, list(zip(passage_ids, scores)), frozenset(flags))
        if k is not None:
            ranked.entries = ranked.entries[:k]
        return ranked

    @property
    def passage_ids(self) -> List[str]:
        return [p for p, _ in self.entries]

    @property
    def scores(self) -> np.ndarray:
        return np.array([s for _, s in self.entries], dtype=np.float64)

    def top(self, k: int) -> "ScoredList":
        return ScoredList(self.question_id, self.entries[:k], self.flags)

    def as_dict(self) -> Dict[str, float]:
        return dict(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def to_lines(self, tag: str) -> List[str]:
        return [
            f"{self.question_id} {pid} {rank} {score:.10g} {tag}"
            for rank, (pid, score) in enumerate(self.entries, 1)
        ]


def write_run(path: Union[str, Path], run: Iterable[ScoredList], tag: str) -> int:
    """Write lists in the given order; returns the number of lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for ranked in run:
            for line in ranked.to_lines(tag):
                handle.write(line + "\n")
                count += 1
    logger.info("Wrote %d run lines to %s", count, path)
    return count


def read_run(path: Union[str, Path]) -> Dict[str, ScoredList]:
    """Parse run lines into one ``ScoredList`` per question; entries keep the file's rank order."""
    if Path(path).stat().st_size == 0:
        return {}
    df = pd.read_csv(
        path, sep=r"\s+", header=None, names=RUN_COLUMNS,
        dtype={"question_id": str, "passage_id": str, "rank": np.int64, "score": np.float64, "tag": str},
        engine="python",
    )
    if df[["question_id", "passage_id", "rank", "score"]].isna().any().any():
        raise ValueError(f"{path}: malformed run line (expected '{' '.join(RUN_COLUMNS)}')")
    run: Dict[str, ScoredList] = {}
    for qid, group in df.groupby("question_id", sort=False):
        group = group.sort_values("rank", kind="stable")
        ranked = ScoredList(qid)
        ranked.entries = list(zip(group["passage_id"], group["score"].astype(float)))
        run[qid] = ranked
    return run
