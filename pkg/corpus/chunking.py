"""Stage-1 passage chunking: disjoint, sentence-aligned, title-prefixed passages."""

from typing import Dict, Iterable, List

from config.settings import PASSAGE_MAX_WORDS, TITLE_SEPARATOR
from .documents import MultimodalDocument, Passage


def word_count(text: str) -> int:
    return len(text.split())


def title_prefix(title: str, body: str) -> str:
    return f"{title}{TITLE_SEPARATOR}{body}"


def strip_title(text: str) -> str:
    """Passage body without its title prefix."""
    return text.split(TITLE_SEPARATOR, 1)[-1]


def split_passages(doc: MultimodalDocument, max_words: int = PASSAGE_MAX_WORDS) -> List[Passage]:
    """Greedily pack the document's sentences into passages of at most ``max_words`` body words.

    A sentence longer than ``max_words`` becomes its own oversized passage.
    Every passage inherits the infobox image.
    """
    if max_words < 1:
        raise ValueError(f"max_words must be positive, got {max_words}")
    chunks: List[List[str]] = []
    current: List[str] = []
    current_words = 0
    for sentence in doc.sentences:
        n = word_count(sentence)
        if current and current_words + n > max_words:
            chunks.append(current)
            current, current_words = [], 0
        current.append(sentence)
        current_words += n
    if current:
        chunks.append(current)

    passages = []
    for i, chunk in enumerate(chunks):
        body = " ".join(chunk)
        passages.append(Passage(
            passage_id=f"{doc.doc_id}_{i}",
            doc_id=doc.doc_id,
            text=title_prefix(doc.title, body),
            word_count=word_count(body),
            image=doc.infobox_image,
        ))
    return passages


def corpus_statistics(documents: Iterable[MultimodalDocument], max_words: int = PASSAGE_MAX_WORDS) -> Dict[str, float]:
    """Passages per article, sentences per paragraph and mean sentence length."""
    docs = paragraphs = sentences = words = passages = 0
    for doc in documents:
        docs += 1
        paragraphs += len(doc.paragraphs)
        for sentence in doc.sentences:
            sentences += 1
            words += word_count(sentence)
        passages += len(split_passages(doc, max_words))
    return {
        "documents": docs,
        "paragraphs": paragraphs,
        "sentences": sentences,
        "passages": passages,
        "passages_per_article": passages / docs if docs else 0.0,
        "sentences_per_paragraph": sentences / paragraphs if paragraphs else 0.0,
        "words_per_sentence": words / sentences if sentences else 0.0,
    }
