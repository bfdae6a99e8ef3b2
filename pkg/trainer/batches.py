"""Encoded training examples and batches."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

from backend.encoders import Backend
from backend.synthetic import ImageEncoding, TextEncoding
from corpus.documents import IctPair, Passage, VisualQuestion
from evaluation.metrics import Qrels

logger = logging.getLogger(__name__)


@dataclass
class EncodedInput:
    """Backend encodings of one (text, image) input."""
    text: TextEncoding
    image: ImageEncoding


@dataclass
class TrainExample:
    """A question with its single positive passage and optional hard negatives."""
    question: EncodedInput
    positive: EncodedInput
    hard_negatives: List[EncodedInput] = field(default_factory=list)
    question_id: str = ""
    positive_id: str = ""


@dataclass
class TrainBatch:
    questions: List[EncodedInput]
    positives: List[EncodedInput]
    hard_negatives: List[List[EncodedInput]]

    @classmethod
    def from_examples(cls, examples: Sequence[TrainExample]) -> "TrainBatch":
        return cls(
            questions=[e.question for e in examples],
            positives=[e.positive for e in examples],
            hard_negatives=[list(e.hard_negatives) for e in examples],
        )

    @property
    def size(self) -> int:
        return len(self.questions)

    @property
    def flat_negatives(self) -> List[EncodedInput]:
        """Every hard negative of the batch; each is shared by all questions."""
        return [n for negatives in self.hard_negatives for n in negatives]


def _encode(backend: Backend, text: str, image) -> EncodedInput:
    return EncodedInput(backend.encode_text(text), backend.encode_image(image))


def build_ict_examples(pairs: Sequence[IctPair], backend: Backend) -> List[TrainExample]:
    """One example per multimodal ICT pair; no hard negatives."""
    examples = []
    for i, pair in enumerate(pairs):
        examples.append(TrainExample(
            question=_encode(backend, pair.question_text, pair.question_image),
            positive=_encode(backend, pair.passage_text, pair.passage_image),
            question_id=f"{pair.source_doc}:{i}",
            positive_id=pair.source_doc,
        ))
    return examples


def build_qa_examples(
    questions: Sequence[VisualQuestion],
    qrels: Qrels,
    passages: Mapping[str, Passage],
    backend: Backend,
    negatives: Optional[Mapping[str, Sequence[str]]] = None,
    max_negatives: int = 1,
) -> List[TrainExample]:
    """Pair each question with its first relevant passage (by id) and up to ``max_negatives`` mined negatives.

    Questions without a relevant passage in ``passages`` are skipped.
    """
    examples, skipped = [], 0
    for question in questions:
        relevant = sorted(pid for pid in (qrels[question.question_id] if question.question_id in qrels else ()) if pid in passages)
        if not relevant:
            skipped += 1
            continue
        positive = passages[relevant[0]]
        mined = [] if negatives is None else list(negatives.get(question.question_id, ()))[:max_negatives]
        examples.append(TrainExample(
            question=_encode(backend, question.text, question.image),
            positive=_encode(backend, positive.text, positive.image),
            hard_negatives=[_encode(backend, passages[pid].text, passages[pid].image) for pid in mined],
            question_id=question.question_id,
            positive_id=positive.passage_id,
        ))
    if skipped:
        logger.info("Skipped %d questions without a relevant passage", skipped)
    return examples


def index_passages(passages: Sequence[Passage]) -> Dict[str, Passage]:
    return {p.passage_id: p for p in passages}
