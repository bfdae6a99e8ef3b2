"""Hard negative mining: top retrieved passages that do not contain the answer."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Mapping, Sequence, Union

from corpus.documents import Passage, VisualQuestion
from evaluation.answers import AnswerKey, contains_answer
from evaluation.runs import ScoredList
from index.bm25 import Bm25Index, bm25_search, bm25_tokenize

logger = logging.getLogger(__name__)

Retriever = Callable[[VisualQuestion], ScoredList]


def bm25_retriever(index: Bm25Index, depth: int = 100) -> Retriever:
    def retrieve(question: VisualQuestion) -> ScoredList:
        return bm25_search(index, bm25_tokenize(question.text), depth, question.question_id)
    return retrieve


def mine_hard_negatives(
    question: VisualQuestion,
    answers: Union[AnswerKey, Sequence[str]],
    retriever: Union[Retriever, ScoredList],
    k: int,
    passages: Mapping[str, Passage],
) -> List[str]:
    """Up to ``k`` passage ids, in retrieval order, whose text contains none of the answers."""
    if k < 1:
        raise ValueError("K must be positive")
    answer_strings = answers.answers() if isinstance(answers, AnswerKey) else list(answers)
    ranked = retriever if isinstance(retriever, ScoredList) else retriever(question)
    negatives = []
    for pid in ranked.passage_ids:
        passage = passages.get(pid)
        if passage is None:
            continue
        if any(contains_answer(passage.text, a) for a in answer_strings):
            continue
        negatives.append(pid)
        if len(negatives) == k:
            break
    return negatives


def mine_all(
    questions: Sequence[VisualQuestion],
    answer_keys: Mapping[str, AnswerKey],
    retriever: Retriever,
    k: int,
    passages: Mapping[str, Passage],
    threads: int = 1,
) -> Dict[str, List[str]]:
    """Negatives for every question that has an answer key."""
    keyed = [q for q in questions if q.question_id in answer_keys]

    def one(question: VisualQuestion) -> List[str]:
        return mine_hard_negatives(question, answer_keys[question.question_id], retriever, k, passages)

    if threads > 1 and len(keyed) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            mined = list(pool.map(one, keyed))
    else:
        mined = [one(q) for q in keyed]
    result = {q.question_id: m for q, m in zip(keyed, mined)}
    logger.info(
        "Mined %d negatives for %d questions (%d with none)",
        sum(len(m) for m in mined), len(keyed), sum(1 for m in mined if not m),
    )
    return result
