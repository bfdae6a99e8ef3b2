"""Corpus data model and its line-delimited JSON codecs."""

import json
import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Union

from config.settings import IMAGE_FORMAT_ALIASES
from .sentences import split_sentences

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImageRef:
    """Reference to an image; ``entity`` labels synthetic fixture images."""
    uri: str
    format_tag: str
    entity: Optional[int] = None

    @classmethod
    def from_record(cls, record: Union[None, str, Dict[str, Any]]) -> Optional["ImageRef"]:
        if record is None:
            return None
        if isinstance(record, str):
            return cls(uri=record, format_tag=format_from_uri(record))
        uri = record.get("uri", "")
        tag = record.get("format_tag") or format_from_uri(uri)
        entity = record.get("entity")
        return cls(uri=uri, format_tag=tag.lower(), entity=None if entity is None else int(entity))

    def to_record(self) -> Dict[str, Any]:
        record = {"uri": self.uri, "format_tag": self.format_tag}
        if self.entity is not None:
            record["entity"] = self.entity
        return record


def format_from_uri(uri: str) -> str:
    """Format tag from a file extension, e.g. ``Foo.JPG`` -> ``jpeg``."""
    name = uri.rsplit("/", 1)[-1]
    if "." not in name:
        return ""
    ext = name.rsplit(".", 1)[-1].lower()
    return IMAGE_FORMAT_ALIASES.get(ext, ext)


@dataclass
class Paragraph:
    """Ordered sentences with an optional contextual image."""
    sentences: List[str]
    contextual_image: Optional[ImageRef] = None

    def __post_init__(self):
        self.sentences = [s.strip() for s in self.sentences]
        for i, sentence in enumerate(self.sentences):
            if not sentence:
                raise ValueError(f"paragraph sentence {i} is empty after trimming")


@dataclass
class MultimodalDocument:
    """Article with a title, optional infobox image and paragraphs in input order."""
    doc_id: str
    title: str
    paragraphs: List[Paragraph] = field(default_factory=list)
    infobox_image: Optional[ImageRef] = None

    def __post_init__(self):
        if not self.title.strip():
            raise ValueError(f"document {self.doc_id!r} has an empty title")

    @property
    def sentences(self) -> List[str]:
        return [s for paragraph in self.paragraphs for s in paragraph.sentences]

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "MultimodalDocument":
        paragraphs = []
        for raw in record.get("paragraphs", []):
            sentences = raw.get("sentences")
            if sentences is None:
                sentences = split_sentences(raw.get("text", ""))
            sentences = [s for s in (x.strip() for x in sentences) if s]
            paragraphs.append(Paragraph(sentences, ImageRef.from_record(raw.get("contextual_image"))))
        return cls(
            doc_id=str(record["doc_id"]),
            title=record["title"],
            paragraphs=paragraphs,
            infobox_image=ImageRef.from_record(record.get("infobox_image")),
        )

    def to_record(self) -> Dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "title": self.title,
            "infobox_image": self.infobox_image.to_record() if self.infobox_image else None,
            "paragraphs": [
                {
                    "sentences": list(p.sentences),
                    "contextual_image": p.contextual_image.to_record() if p.contextual_image else None,
                }
                for p in self.paragraphs
            ],
        }


@dataclass
class Passage:
    """Retrieval unit: title-prefixed text chunk of one document."""
    passage_id: str
    doc_id: str
    text: str
    word_count: int
    image: Optional[ImageRef] = None

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "Passage":
        return cls(
            passage_id=str(record["passage_id"]),
            doc_id=str(record["doc_id"]),
            text=record["text"],
            word_count=int(record["word_count"]),
            image=ImageRef.from_record(record.get("image")),
        )

    def to_record(self) -> Dict[str, Any]:
        record = asdict(self)
        record["image"] = self.image.to_record() if self.image else None
        return record


@dataclass
class IctPair:
    """Pseudo visual question (t_q, i_q) with its pseudo-relevant visual passage (t_p, i_p)."""
    question_text: str
    question_image: ImageRef
    passage_text: str
    passage_image: ImageRef
    leave_in: bool
    source_doc: str
    extended: bool = False

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "IctPair":
        return cls(
            question_text=record["question_text"],
            question_image=ImageRef.from_record(record["question_image"]),
            passage_text=record["passage_text"],
            passage_image=ImageRef.from_record(record["passage_image"]),
            leave_in=bool(record["leave_in"]),
            source_doc=str(record["source_doc"]),
            extended=bool(record.get("extended", False)),
        )

    def to_record(self) -> Dict[str, Any]:
        record = asdict(self)
        record["question_image"] = self.question_image.to_record()
        record["passage_image"] = self.passage_image.to_record()
        return record


@dataclass
class VisualQuestion:
    """Question text with the image it is asked about (None for text-only questions)."""
    question_id: str
    text: str
    image: Optional[ImageRef] = None

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "VisualQuestion":
        return cls(
            question_id=str(record["question_id"]),
            text=record["text"],
            image=ImageRef.from_record(record.get("image")),
        )

    def to_record(self) -> Dict[str, Any]:
        return {
            "question_id": self.question_id,
            "text": self.text,
            "image": self.image.to_record() if self.image else None,
        }


# ===== JSONL codecs =====

def read_jsonl(path: Union[str, Path]) -> Iterator[Dict[str, Any]]:
    """Yield one dict per non-blank line."""
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{line_no}: invalid JSON record ({e.msg})") from None


def write_jsonl(path: Union[str, Path], records: Iterable[Dict[str, Any]]) -> int:
    """Write records with sorted keys so identical inputs give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False))
            handle.write("\n")
            count += 1
    logger.debug("Wrote %d records to %s", count, path)
    return count


def load_documents(path: Union[str, Path]) -> List[MultimodalDocument]:
    documents = [MultimodalDocument.from_record(r) for r in read_jsonl(path)]
    seen = set()
    for doc in documents:
        if doc.doc_id in seen:
            raise ValueError(f"duplicate doc_id {doc.doc_id!r} in {path}")
        seen.add(doc.doc_id)
    return documents


def save_documents(path: Union[str, Path], documents: Iterable[MultimodalDocument]) -> int:
    return write_jsonl(path, (d.to_record() for d in documents))


def load_passages(path: Union[str, Path]) -> List[Passage]:
    return [Passage.from_record(r) for r in read_jsonl(path)]


def save_passages(path: Union[str, Path], passages: Iterable[Passage]) -> int:
    return write_jsonl(path, (p.to_record() for p in passages))


def load_pairs(path: Union[str, Path]) -> List[IctPair]:
    return [IctPair.from_record(r) for r in read_jsonl(path)]


def save_pairs(path: Union[str, Path], pairs: Iterable[IctPair]) -> int:
    return write_jsonl(path, (p.to_record() for p in pairs))


def load_questions(path: Union[str, Path]) -> List[VisualQuestion]:
    return [VisualQuestion.from_record(r) for r in read_jsonl(path)]


def save_questions(path: Union[str, Path], questions: Iterable[VisualQuestion]) -> int:
    return write_jsonl(path, (q.to_record() for q in questions))
