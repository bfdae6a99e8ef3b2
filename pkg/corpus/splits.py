"""Corpus filtering and article-disjoint train/validation/test splits."""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np

from config.settings import ICT_MIN_SENTENCES, IMAGE_FORMAT_ALLOWLIST, SPLIT_RATIOS
from .documents import ImageRef, MultimodalDocument

logger = logging.getLogger(__name__)


class CorpusTooSmallError(ValueError):
    """Raised when a corpus cannot be partitioned into three splits."""


@dataclass
class FilterReport:
    """Counts of dropped items keyed by reason."""
    dropped: Counter = field(default_factory=Counter)

    def to_dict(self) -> Dict[str, int]:
        return {reason: count for reason, count in sorted(self.dropped.items()) if count}

    @property
    def empty(self) -> bool:
        return not self.to_dict()


def image_problem(image: ImageRef) -> str:
    """Reason an image is unusable, or an empty string."""
    if not image.uri:
        return "corrupt"
    if image.format_tag not in IMAGE_FORMAT_ALLOWLIST:
        return "format"
    return ""


def filter_corpus(
    corpus: Sequence[MultimodalDocument],
    min_sentences: int = ICT_MIN_SENTENCES,
) -> Tuple[List[MultimodalDocument], FilterReport]:
    """Drop documents with a bad infobox image and paragraphs with a bad image or too few sentences."""
    report = FilterReport()
    kept = []
    for doc in corpus:
        if doc.infobox_image is not None:
            reason = image_problem(doc.infobox_image)
            if reason:
                report.dropped[reason] += 1
                continue
        paragraphs = []
        for paragraph in doc.paragraphs:
            reason = image_problem(paragraph.contextual_image) if paragraph.contextual_image else ""
            if not reason and len(paragraph.sentences) < min_sentences:
                reason = "short_paragraph"
            if reason:
                report.dropped[reason] += 1
                continue
            paragraphs.append(paragraph)
        if not paragraphs and doc.paragraphs:
            report.dropped["empty_document"] += 1
            continue
        kept.append(replace(doc, paragraphs=paragraphs) if len(paragraphs) != len(doc.paragraphs) else doc)
    if not report.empty:
        logger.info("Filtered corpus: %s", report.to_dict())
    return kept, report


def split_by_article(
    corpus: Sequence[MultimodalDocument],
    ratios: Sequence[float] = SPLIT_RATIOS,
    rng_seed: int = 0,
) -> Tuple[List[MultimodalDocument], List[MultimodalDocument], List[MultimodalDocument]]:
    """Partition documents into train/validation/test so no article spans two splits."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {tuple(ratios)}")
    n = len(corpus)
    if n < 3:
        raise CorpusTooSmallError("corpus too small to split")

    # shuffle a sorted view so input order does not change the result
    ordered = sorted(corpus, key=lambda d: d.doc_id)
    order = np.random.default_rng(rng_seed).permutation(n)
    n_train = int(round(n * ratios[0]))
    n_val = int(round(n * ratios[1]))
    n_val = min(n_val, n - n_train)

    shuffled = [ordered[i] for i in order]
    train = shuffled[:n_train]
    val = shuffled[n_train:n_train + n_val]
    test = shuffled[n_train + n_val:]
    logger.info("Split %d articles into %d/%d/%d", n, len(train), len(val), len(test))
    return train, val, test
