"""Rank metrics (MRR@K, P@K, Hits@K), distantly supervised qrels and metric reports."""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd

from config.settings import METRIC_KS
from corpus.documents import Passage
from .answers import AnswerKey, exact_match, f1_bow, normalize_answer
from .runs import ScoredList

logger = logging.getLogger(__name__)


class UnknownQuestionError(ValueError):
    """Raised when a run mentions a question absent from the qrels."""


@dataclass
class Qrels:
    """Relevant passage ids per question; questions with none keep an empty set."""
    relevant: Dict[str, FrozenSet[str]] = field(default_factory=dict)

    def __getitem__(self, question_id: str) -> FrozenSet[str]:
        return self.relevant[question_id]

    def __contains__(self, question_id: str) -> bool:
        return question_id in self.relevant

    def __len__(self) -> int:
        return len(self.relevant)

    @property
    def question_ids(self) -> List[str]:
        return sorted(self.relevant)

    @property
    def judged_pairs(self) -> int:
        return sum(len(v) for v in self.relevant.values())


def build_qrels(
    passages: Sequence[Passage],
    answer_keys: Iterable[AnswerKey],
    use_aliases: bool = True,
) -> Qrels:
    """A passage is relevant when its normalised text contains a normalised answer on token boundaries."""
    # pad with spaces so substring search on normalised text respects token boundaries
    haystacks = [f" {normalize_answer(p.text)} " for p in passages]
    relevant = {}
    for key in answer_keys:
        needles = [f" {n} " for n in (normalize_answer(a) for a in key.answers(use_aliases)) if n]
        relevant[key.question_id] = frozenset(
            p.passage_id for p, hay in zip(passages, haystacks) if any(n in hay for n in needles)
        )
    qrels = Qrels(relevant)
    logger.info("Built qrels: %d questions, %d relevant pairs", len(qrels), qrels.judged_pairs)
    return qrels


def write_qrels(path: Union[str, Path], qrels: Qrels) -> int:
    """``question_id passage_id 1`` per relevant pair; ``question_id - 0`` marks a question with none."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for qid in qrels.question_ids:
        ids = sorted(qrels[qid])
        lines.extend(f"{qid} {pid} 1" for pid in ids)
        if not ids:
            lines.append(f"{qid} - 0")
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return len(lines)


def read_qrels(path: Union[str, Path]) -> Qrels:
    if Path(path).stat().st_size == 0:
        return Qrels()
    df = pd.read_csv(
        path, sep=r"\s+", header=None, names=["question_id", "passage_id", "relevance"],
        dtype={"question_id": str, "passage_id": str, "relevance": np.int64}, engine="python",
    )
    relevant: Dict[str, set] = {}
    for row in df.itertuples(index=False):
        ids = relevant.setdefault(row.question_id, set())
        if row.relevance > 0 and row.passage_id != "-":
            ids.add(row.passage_id)
    return Qrels({qid: frozenset(ids) for qid, ids in relevant.items()})


class MetricValue(NamedTuple):
    per_question: Dict[str, float]
    mean: float


def _check_questions(run: Mapping[str, ScoredList], qrels: Qrels):
    for qid in run:
        if qid not in qrels:
            raise UnknownQuestionError(f"run references unknown question {qid!r}")


def _per_question(run: Mapping[str, ScoredList], qrels: Qrels, k: int, score_fn) -> MetricValue:
    if k < 1:
        raise ValueError(f"K must be positive, got {k}")
    _check_questions(run, qrels)
    values = {}
    for qid in qrels.question_ids:
        ranked = run.get(qid)
        ids = ranked.passage_ids[:k] if ranked is not None else []
        values[qid] = score_fn([pid in qrels[qid] for pid in ids], k)
    mean = float(np.mean(list(values.values()))) if values else 0.0
    return MetricValue(values, mean)


def _reciprocal_rank(hits: List[bool], k: int) -> float:
    for rank, hit in enumerate(hits, 1):
        if hit:
            return 1.0 / rank
    return 0.0


def mrr_at_k(run: Mapping[str, ScoredList], qrels: Qrels, k: int = 100) -> MetricValue:
    return _per_question(run, qrels, k, _reciprocal_rank)


def p_at_k(run: Mapping[str, ScoredList], qrels: Qrels, k: int = 20) -> MetricValue:
    return _per_question(run, qrels, k, lambda hits, kk: sum(hits) / kk)


def hits_at_k(run: Mapping[str, ScoredList], qrels: Qrels, k: int = 20) -> MetricValue:
    return _per_question(run, qrels, k, lambda hits, kk: float(any(hits)))


@dataclass
class MetricReport:
    """Mean metrics, the per-question breakdown and an echo of the producing config."""
    values: Dict[str, float]
    per_question: pd.DataFrame
    config: Dict[str, Any] = field(default_factory=dict)
    name: str = ""

    def to_dict(self) -> Dict[str, Any]:
        per_question = {
            qid: {metric: float(v) for metric, v in row.items()}
            for qid, row in self.per_question.to_dict(orient="index").items()
        }
        return {
            "name": self.name,
            "metrics": {k: float(v) for k, v in self.values.items()},
            "per_question": per_question,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MetricReport":
        frame = pd.DataFrame.from_dict(data.get("per_question", {}), orient="index")
        frame.index.name = "question_id"
        return cls(
            values=dict(data["metrics"]),
            per_question=frame.sort_index(),
            config=data.get("config", {}),
            name=data.get("name", ""),
        )

    def scores(self, metric: str) -> pd.Series:
        """Per-question vector of one metric, ordered by question id."""
        return self.per_question[metric].sort_index()

    def to_table(self) -> str:
        """Aligned two-row table with values x100 and one decimal."""
        columns = list(self.values)
        cells = [f"{100.0 * self.values[c]:.1f}" for c in columns]
        widths = [max(len(c), len(v)) for c, v in zip(columns, cells)]
        label = self.name or "model"
        head = "  ".join(c.rjust(w) for c, w in zip(columns, widths))
        body = "  ".join(v.rjust(w) for v, w in zip(cells, widths))
        pad = max(len(label), len("model"))
        return f"{'model'.ljust(pad)}  {head}\n{label.ljust(pad)}  {body}\n"


def metric_names(ks: Mapping[str, Any] = METRIC_KS) -> List[str]:
    names = [f"MRR@{ks['mrr']}"]
    names += [f"P@{k}" for k in ks["precision"]]
    names += [f"Hits@{k}" for k in ks["hits"]]
    return names


def evaluate_run(
    run: Mapping[str, ScoredList],
    qrels: Qrels,
    ks: Mapping[str, Any] = METRIC_KS,
    predictions: Optional[Mapping[str, str]] = None,
    answer_keys: Optional[Mapping[str, AnswerKey]] = None,
    config: Optional[Dict[str, Any]] = None,
    name: str = "",
) -> MetricReport:
    """IR metrics over every qrels question, plus EM/F1 when predictions and answer keys are given."""
    columns: Dict[str, MetricValue] = {f"MRR@{ks['mrr']}": mrr_at_k(run, qrels, ks["mrr"])}
    for k in ks["precision"]:
        columns[f"P@{k}"] = p_at_k(run, qrels, k)
    for k in ks["hits"]:
        columns[f"Hits@{k}"] = hits_at_k(run, qrels, k)

    frame = pd.DataFrame({metric: value.per_question for metric, value in columns.items()})
    values = {metric: value.mean for metric, value in columns.items()}

    if predictions is not None and answer_keys is not None:
        em, f1 = {}, {}
        for qid in qrels.question_ids:
            key = answer_keys.get(qid)
            prediction = predictions.get(qid, "")
            em[qid] = float(exact_match(prediction, key)) if key else 0.0
            f1[qid] = f1_bow(prediction, key) if key else 0.0
        frame["EM"] = pd.Series(em)
        frame["F1"] = pd.Series(f1)
        values["EM"] = float(np.mean(list(em.values()))) if em else 0.0
        values["F1"] = float(np.mean(list(f1.values()))) if f1 else 0.0

    frame.index.name = "question_id"
    return MetricReport(values=values, per_question=frame.sort_index(), config=dict(config or {}), name=name)
