"""Answer normalisation, string-match relevance and reading-comprehension scores."""

import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Union

from corpus.documents import read_jsonl, write_jsonl

ARTICLES = frozenset({"a", "an", "the"})


def normalize_answer(s: str) -> str:
    """Lowercase, turn punctuation and symbols into spaces, drop articles and collapse whitespace."""

    def lower(text):
        return text.lower()

    def remove_punc(text):
        return "".join(" " if unicodedata.category(ch)[0] in "PS" else ch for ch in text)

    def remove_articles(text):
        return " ".join(token for token in text.split() if token not in ARTICLES)

    return remove_articles(remove_punc(lower(s)))


def get_tokens(s: str) -> List[str]:
    if not s:
        return []
    return normalize_answer(s).split()


@dataclass(frozen=True)
class AnswerKey:
    """Ground truth answer of one question plus its accepted aliases."""
    question_id: str
    gold: str
    aliases: FrozenSet[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "aliases", frozenset(self.aliases))

    def answers(self, use_aliases: bool = True) -> List[str]:
        """Gold first, then aliases in sorted order."""
        extra = sorted(a for a in self.aliases if a != self.gold) if use_aliases else []
        return [self.gold] + extra

    @classmethod
    def from_record(cls, record: Dict) -> "AnswerKey":
        return cls(
            question_id=str(record["question_id"]),
            gold=record["gold"],
            aliases=frozenset(record.get("aliases") or ()),
        )

    def to_record(self) -> Dict:
        return {"question_id": self.question_id, "gold": self.gold, "aliases": sorted(self.aliases)}


def contains_answer(passage_text: str, answer: str) -> bool:
    """Token-boundary containment after normalising both sides."""
    needle = normalize_answer(answer)
    if not needle:
        return False
    return f" {needle} " in f" {normalize_answer(passage_text)} "


def passage_relevance(passage_text: str, answer_key: AnswerKey, use_aliases: bool = True) -> bool:
    return any(contains_answer(passage_text, answer) for answer in answer_key.answers(use_aliases))


def exact_match(prediction: str, answer_key: AnswerKey) -> bool:
    pred = normalize_answer(prediction)
    return any(pred == normalize_answer(answer) for answer in answer_key.answers())


def _f1(prediction_tokens: List[str], reference_tokens: List[str]) -> float:
    if not prediction_tokens or not reference_tokens:
        return float(prediction_tokens == reference_tokens)
    common = Counter(prediction_tokens) & Counter(reference_tokens)
    num_same = sum(common.values())
    if num_same == 0:
        return 0.0
    precision = num_same / len(prediction_tokens)
    recall = num_same / len(reference_tokens)
    return (2 * precision * recall) / (precision + recall)


def f1_bow(prediction: str, answer_key: AnswerKey) -> float:
    """Best token-multiset F1 over the gold answer and its aliases."""
    prediction_tokens = get_tokens(prediction)
    return max(_f1(prediction_tokens, get_tokens(answer)) for answer in answer_key.answers())


def load_answer_keys(path: Union[str, Path]) -> Dict[str, AnswerKey]:
    keys = {}
    for record in read_jsonl(path):
        key = AnswerKey.from_record(record)
        if key.question_id in keys:
            raise ValueError(f"duplicate answer key for question {key.question_id!r} in {path}")
        keys[key.question_id] = key
    return keys


def save_answer_keys(path: Union[str, Path], keys: Iterable[AnswerKey]) -> int:
    return write_jsonl(path, (k.to_record() for k in keys))
