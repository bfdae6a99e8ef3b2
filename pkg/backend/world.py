"""Synthetic knowledge base of entity articles with visual questions about them.

Each entity of a ``SyntheticWorld`` gets an article titled with its name, an
infobox image, paragraphs with contextual images and one sentence per
relation stating a unique answer. Visual questions ask for a relation of the
pictured entity; a share of them never names the entity, so only the image
identifies it.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from corpus.chunking import split_passages
from corpus.documents import ImageRef, MultimodalDocument, Paragraph, Passage, VisualQuestion
from evaluation.answers import AnswerKey
from .synthetic import SyntheticWorld

logger = logging.getLogger(__name__)

RELATIONS = (
    "capital", "founder", "language", "mascot", "anthem", "currency",
    "summit", "festival", "harbor", "patron", "emblem", "dialect",
)
FILLER_WORDS = (
    "old", "famous", "northern", "region", "people", "known", "long", "history",
    "small", "large", "valley", "great", "many", "early", "modern", "local",
    "several", "traditional", "annual", "coastal", "ancient", "market", "bridge",
    "quiet", "green", "stone", "trade", "winter", "summer", "museum",
)
VALUE_SYLLABLES = (
    "ba", "co", "du", "fi", "go", "hu", "je", "ki", "lu", "mi",
    "no", "pu", "ra", "si", "tu", "vo", "wa", "xe", "yo", "zu",
)
ALIAS_SUFFIX = "ia"
UNNAMED_SUBJECT = "this place"


@dataclass(frozen=True)
class WorldConfig:
    """Shape of the generated knowledge base and question set."""
    relations: int = 6
    paragraphs: int = 3
    sentences_per_paragraph: int = 4
    filler_words: Tuple[int, int] = (3, 6)
    image_only_share: float = 0.5
    alias_share: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.relations <= len(RELATIONS):
            raise ValueError(f"relations must be in [1, {len(RELATIONS)}], got {self.relations}")
        if self.relations > self.paragraphs * self.sentences_per_paragraph:
            raise ValueError("relations must fit into paragraphs * sentences_per_paragraph sentence slots")
        if self.sentences_per_paragraph < 2:
            raise ValueError("sentences_per_paragraph must be at least 2")
        low, high = self.filler_words
        if not 0 <= low <= high:
            raise ValueError(f"filler_words must be an ordered (low, high) pair, got {self.filler_words}")
        for name in ("image_only_share", "alias_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


@dataclass
class SyntheticKvqae:
    """Generated articles, visual questions, text-only questions and their answer keys."""
    documents: List[MultimodalDocument]
    questions: List[VisualQuestion]
    answer_keys: Dict[str, AnswerKey]
    text_questions: List[VisualQuestion] = field(default_factory=list)
    image_only: Dict[str, bool] = field(default_factory=dict)

    def passages(self, max_words: int = 100) -> List[Passage]:
        return [p for doc in self.documents for p in split_passages(doc, max_words)]


def _fillers(rng: np.random.Generator, bounds: Tuple[int, int]) -> str:
    count = int(rng.integers(bounds[0], bounds[1] + 1))
    return " ".join(FILLER_WORDS[i] for i in rng.integers(0, len(FILLER_WORDS), size=count))


def _answer_values(rng: np.random.Generator, count: int, taken: set) -> List[str]:
    values = []
    while len(values) < count:
        value = "".join(VALUE_SYLLABLES[i] for i in rng.integers(0, len(VALUE_SYLLABLES), size=3))
        if value not in taken:
            taken.add(value)
            values.append(value)
    return values


def _sentence(subject: str, body: str) -> str:
    text = f"{subject} {body}".strip()
    return text[0].upper() + text[1:] + "."


def generate_kvqae(world: SyntheticWorld, cfg: WorldConfig = WorldConfig()) -> SyntheticKvqae:
    """Deterministic function of the world and ``cfg``."""
    rng = np.random.default_rng([cfg.seed, world.seed, 7])
    taken = set(world.entity_names)
    documents, facts = [], []

    for entity, name in enumerate(world.entity_names):
        doc_id = f"E{entity:04d}"
        title = name.capitalize()
        relations = [RELATIONS[i] for i in sorted(rng.choice(len(RELATIONS), size=cfg.relations, replace=False))]
        values = _answer_values(rng, len(relations), taken)
        slots = cfg.paragraphs * cfg.sentences_per_paragraph
        placement = dict(zip(rng.choice(slots, size=len(relations), replace=False).tolist(), range(len(relations))))

        paragraphs = []
        for p in range(cfg.paragraphs):
            sentences = []
            for s in range(cfg.sentences_per_paragraph):
                subject = title if rng.random() < 0.5 else UNNAMED_SUBJECT
                slot = p * cfg.sentences_per_paragraph + s
                if slot in placement:
                    r = placement[slot]
                    use_alias = bool(rng.random() < cfg.alias_share)
                    written = values[r] + ALIAS_SUFFIX if use_alias else values[r]
                    sentences.append(_sentence(f"the {relations[r]} of {subject} is", f"{written} {_fillers(rng, cfg.filler_words)}"))
                    facts.append((entity, doc_id, title, relations[r], values[r], written if use_alias else None))
                else:
                    sentences.append(_sentence(subject, f"is {_fillers(rng, cfg.filler_words)}"))
            image = ImageRef(f"synthetic://{doc_id}/paragraph{p}.jpg", "jpeg", entity)
            paragraphs.append(Paragraph(sentences, image))
        documents.append(MultimodalDocument(
            doc_id=doc_id,
            title=title,
            paragraphs=paragraphs,
            infobox_image=ImageRef(f"synthetic://{doc_id}/infobox.jpg", "jpeg", entity),
        ))

    unnamed_count = int(round(cfg.image_only_share * len(facts)))
    unnamed = set(rng.permutation(len(facts))[:unnamed_count].tolist())
    questions, text_questions, keys, image_only = [], [], {}, {}
    for i, (entity, doc_id, title, relation, value, alias) in enumerate(facts):
        qid = f"{doc_id}-{relation}"
        hidden = i in unnamed
        subject = UNNAMED_SUBJECT if hidden else title
        questions.append(VisualQuestion(
            question_id=qid,
            text=f"What is the {relation} of {subject}?",
            image=ImageRef(f"synthetic://questions/{qid}.jpg", "jpeg", entity),
        ))
        image_only[qid] = hidden
        keys[qid] = AnswerKey(qid, value, frozenset({alias}) if alias else frozenset())
        text_qid = f"T{qid}"
        text_questions.append(VisualQuestion(text_qid, f"Which {relation} belongs to {title}?", None))
        keys[text_qid] = AnswerKey(text_qid, value, frozenset({alias}) if alias else frozenset())

    logger.info(
        "Generated %d articles, %d visual questions (%d image-only)",
        len(documents), len(questions), sum(image_only.values()),
    )
    return SyntheticKvqae(documents, questions, keys, text_questions, image_only)


def split_questions(
    questions: Sequence[VisualQuestion],
    ratios: Sequence[float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> Tuple[List[VisualQuestion], List[VisualQuestion], List[VisualQuestion]]:
    """Seeded train/validation/test partition of a question set."""
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative numbers summing to 1, got {tuple(ratios)}")
    ordered = sorted(questions, key=lambda q: q.question_id)
    order = np.random.default_rng(seed).permutation(len(ordered))
    shuffled = [ordered[i] for i in order]
    n_train = int(round(len(shuffled) * ratios[0]))
    n_val = min(int(round(len(shuffled) * ratios[1])), len(shuffled) - n_train)
    return shuffled[:n_train], shuffled[n_train:n_train + n_val], shuffled[n_train + n_val:]
