"""Multimodal Inverse Cloze Task pair generation."""

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from config.settings import ICT_CONTEXT_SENTENCES, ICT_LEAVE_IN_PROB, ICT_MIN_SENTENCES
from .chunking import title_prefix
from .documents import IctPair, MultimodalDocument

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IctConfig:
    """Pair generation knobs; defaults follow the pre-training recipe."""
    leave_in_prob: float = ICT_LEAVE_IN_PROB
    context_sentences: int = ICT_CONTEXT_SENTENCES
    min_sentences: int = ICT_MIN_SENTENCES

    def __post_init__(self):
        if not 0.0 <= self.leave_in_prob <= 1.0:
            raise ValueError(f"leave_in_prob must be in [0, 1], got {self.leave_in_prob}")
        if self.context_sentences < 1:
            raise ValueError("context_sentences must be positive")


def stable_hash(text: str) -> int:
    """64-bit hash that does not depend on PYTHONHASHSEED."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


def document_rng(rng_seed: int, doc_id: str) -> np.random.Generator:
    """Per-document generator so serial and parallel runs draw the same numbers."""
    return np.random.default_rng([rng_seed & 0xFFFFFFFF, stable_hash(doc_id)])


def context_window(question_index: int, sentences: List[str], size: int) -> List[int]:
    """Indices of the ``size`` sentences closest to the question, following ones first on ties.

    Sentences containing the question text are never chosen.
    """
    question = sentences[question_index]
    candidates = [
        j for j in range(len(sentences))
        if j != question_index and question not in sentences[j]
    ]
    candidates.sort(key=lambda j: (abs(j - question_index), 0 if j > question_index else 1))
    return sorted(candidates[:size])


def make_ict_pairs(
    doc: MultimodalDocument,
    cfg: IctConfig = IctConfig(),
    rng_seed: int = 0,
    report: Optional[Counter] = None,
) -> List[IctPair]:
    """One pair per sentence of every eligible paragraph.

    A paragraph is eligible when it has at least ``cfg.min_sentences`` sentences
    and a contextual image, and the document has an infobox image. Skips are
    counted into ``report`` when given.
    """
    report = report if report is not None else Counter()
    if doc.infobox_image is None:
        report["no_infobox_image"] += 1
        return []

    rng = document_rng(rng_seed, doc.doc_id)
    pairs = []
    for paragraph in doc.paragraphs:
        sentences = paragraph.sentences
        if len(sentences) < cfg.min_sentences:
            report["short_paragraph"] += 1
            continue
        if paragraph.contextual_image is None:
            report["no_contextual_image"] += 1
            continue
        for index, question in enumerate(sentences):
            # drawn for every sentence so the stream does not depend on later filtering
            leave_in = bool(rng.random() < cfg.leave_in_prob)
            window = context_window(index, sentences, cfg.context_sentences)
            extended = False
            if leave_in:
                window = sorted(window + [index])
                extended = len(window) > cfg.context_sentences
            passage_text = title_prefix(doc.title, " ".join(sentences[j] for j in window))
            if not leave_in and question in passage_text:
                report["question_in_context"] += 1
                continue
            pairs.append(IctPair(
                question_text=question,
                question_image=paragraph.contextual_image,
                passage_text=passage_text,
                passage_image=doc.infobox_image,
                leave_in=leave_in,
                source_doc=doc.doc_id,
                extended=extended,
            ))
            report["pairs"] += 1
            if leave_in:
                report["leave_in"] += 1
    return pairs


def make_corpus_ict_pairs(
    documents: Iterable[MultimodalDocument],
    cfg: IctConfig = IctConfig(),
    rng_seed: int = 0,
) -> tuple:
    """Pairs for a whole corpus plus the aggregated skip/count report."""
    report: Counter = Counter()
    pairs: List[IctPair] = []
    for doc in documents:
        pairs.extend(make_ict_pairs(doc, cfg, rng_seed, report))
    logger.info("Generated %d ICT pairs (%d left in)", report["pairs"], report["leave_in"])
    return pairs, report
