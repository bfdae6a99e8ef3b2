"""Shared fixtures: hand-built documents, the two-question passage fixture and a tiny pipeline config."""

from typing import List, Optional, Sequence

import numpy as np
import pytest

from config.loader import config_from_dict
from corpus.documents import ImageRef, MultimodalDocument, Paragraph, Passage
from evaluation.answers import AnswerKey
from evaluation.runs import ScoredList


def image(uri: str, entity: Optional[int] = None) -> ImageRef:
    return ImageRef.from_record({"uri": uri, "entity": entity})


def make_doc(
    doc_id: str,
    paragraphs: Sequence[Sequence[str]],
    title: str = "Article",
    infobox: Optional[str] = "infobox.jpg",
    contextual: Optional[str] = "context.png",
) -> MultimodalDocument:
    return MultimodalDocument(
        doc_id=doc_id,
        title=title,
        paragraphs=[
            Paragraph(list(sentences), image(f"{doc_id}/{i}/{contextual}") if contextual else None)
            for i, sentences in enumerate(paragraphs)
        ],
        infobox_image=image(f"{doc_id}/{infobox}") if infobox else None,
    )


def words(count: int, stem: str = "w") -> str:
    """A sentence of exactly ``count`` words."""
    return " ".join(f"{stem}{i}" for i in range(count)) + "."


def ranked(question_id: str, passage_ids: Sequence[str], scores: Optional[Sequence[float]] = None) -> ScoredList:
    """Ranked list in the given order; default scores strictly decrease."""
    if scores is None:
        scores = [float(len(passage_ids) - i) for i in range(len(passage_ids))]
    return ScoredList.from_scores(question_id, list(passage_ids), list(scores))


@pytest.fixture
def doc_factory():
    return make_doc


@pytest.fixture
def figure_passages() -> List[Passage]:
    """Two answer-bearing passages and two distractors."""
    texts = {
        "p_bromley": "John Smith [SEP] He won the 1962 by-election in Bromley. He held the seat for years.",
        "p_qe2": "Cunard [SEP] The liner served from 1969 to 2008 on the Atlantic route.",
        "p_other": "Weather [SEP] It rained partly during the afternoon in the valley.",
        "p_misc": "Gardening [SEP] Roses need sun and regular water.",
    }
    return [Passage(pid, pid.split("_")[1], text, len(text.split()), None) for pid, text in texts.items()]


@pytest.fixture
def figure_keys() -> List[AnswerKey]:
    return [
        AnswerKey("q_bromley", "Bromley"),
        AnswerKey("q_qe2", "1969", frozenset({"nineteen sixty-nine"})),
    ]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


TINY_CONFIG = {
    "seed": 3,
    "backend": {"kind": "synthetic", "entity_count": 12, "latent_dim": 4, "image_dim": 8, "noise_sigma": 0.05},
    "world": {"relations": 2, "paragraphs": 2, "sentences_per_paragraph": 2, "filler_words": [1, 2]},
    "corpus": {"split_ratios": [0.5, 0.25, 0.25], "question_split_ratios": [0.5, 0.25, 0.25]},
    "model": {"layers": 1, "model_dim": 8, "heads": 2, "ffn_dim": 16, "dropout_prob": 0.0, "max_seq": 64},
    "stages": {
        "stage1": {"text": {"batch_size": 4, "lr": 1.0e-3, "warmup_steps": 1, "max_steps": 2, "validation_every": 1}},
        "stage2": {"ilf": {"batch_size": 4, "lr": 1.0e-3, "max_steps": 2, "validation_every": 1}},
        "stage3": {"ilf": {"batch_size": 4, "lr": 1.0e-3, "warmup_steps": 1, "max_steps": 2, "validation_every": 1}},
    },
    "eval": {"search_k": 10, "mrr_k": 10, "precision_ks": [1, 5], "hits_ks": [5], "fisher_iterations": 200},
}


@pytest.fixture
def tiny_config(tmp_path):
    data = {**TINY_CONFIG, "paths": {"root": str(tmp_path / "artifacts")}}
    return config_from_dict(data)
