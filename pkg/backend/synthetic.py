"""Synthetic text and image encoders standing in for pretrained backbones.

A ``SyntheticWorld`` owns one latent vector per entity and two fixed linear
maps from latent space into the text (d) and image (c) spaces. Ordinary words
embed as seeded Gaussian vectors; entity names and entity-labelled images embed
through the maps, so image identity stays linearly recoverable.
"""

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional

import numpy as np

from config.settings import SYNTHETIC_DEFAULTS, WORD_CACHE_SIZE
from corpus.documents import ImageRef
from corpus.ict import stable_hash

SUMMARY_TOKEN_ID = 0
_TOKEN_RE = re.compile(r"\w+")
_SYLLABLES = (
    "ka", "ro", "vin", "tel", "mar", "os", "li", "den", "qua", "zor", "bel", "fen",
    "ti", "gar", "nu", "sel", "dra", "mo", "pex", "ul", "vek", "ha", "lor", "wyn",
)


class UnlabeledImageError(ValueError):
    """Raised when an image carries no usable entity label."""


def tokenize(text: str) -> List[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class TextEncoding:
    """Token ids and their d-dim vectors; position 0 is the summary slot."""
    tokens: List[int]
    embeddings: np.ndarray
    layer_outputs: Optional[List[np.ndarray]] = None

    def __post_init__(self):
        if len(self.tokens) == 0 or len(self.tokens) != len(self.embeddings):
            raise ValueError("text encoding needs a summary slot and one vector per token")

    @property
    def summary(self) -> np.ndarray:
        return self.embeddings[0]


@dataclass
class ImageEncoding:
    """Fixed-width image vector and the reference it came from."""
    vector: np.ndarray
    source: Optional[ImageRef] = None


@dataclass
class SyntheticWorld:
    """Seeded entity world with full-rank latent-to-modality maps."""
    entity_count: int = SYNTHETIC_DEFAULTS["entity_count"]
    latent_dim: int = SYNTHETIC_DEFAULTS["latent_dim"]
    text_dim: int = SYNTHETIC_DEFAULTS["text_dim"]
    image_dim: int = SYNTHETIC_DEFAULTS["image_dim"]
    noise_sigma: float = SYNTHETIC_DEFAULTS["noise_sigma"]
    seed: int = 0
    latents: np.ndarray = field(init=False, repr=False)
    text_map: np.ndarray = field(init=False, repr=False)
    image_map: np.ndarray = field(init=False, repr=False)
    entity_names: List[str] = field(init=False, repr=False)

    def __post_init__(self):
        if self.latent_dim > min(self.text_dim, self.image_dim):
            raise ValueError("latent_dim must not exceed text_dim or image_dim for full-rank maps")
        rng = np.random.default_rng([self.seed, 1])
        self.latents = rng.normal(size=(self.entity_count, self.latent_dim))
        self.text_map = rng.normal(scale=1.0 / np.sqrt(self.latent_dim), size=(self.latent_dim, self.text_dim))
        self.image_map = rng.normal(scale=1.0 / np.sqrt(self.latent_dim), size=(self.latent_dim, self.image_dim))
        for name, matrix in (("text_map", self.text_map), ("image_map", self.image_map)):
            if np.linalg.matrix_rank(matrix) < self.latent_dim:
                raise ValueError(f"{name} is rank deficient for seed {self.seed}")
        self.entity_names = self._make_names(rng)
        self._entity_by_name: Dict[str, int] = {n: k for k, n in enumerate(self.entity_names)}
        self._word_cache = lru_cache(maxsize=WORD_CACHE_SIZE)(self._draw_word_vector)

    def _make_names(self, rng: np.random.Generator) -> List[str]:
        names, seen = [], set()
        while len(names) < self.entity_count:
            parts = rng.choice(len(_SYLLABLES), size=3)
            name = "".join(_SYLLABLES[i] for i in parts)
            if name not in seen:
                seen.add(name)
                names.append(name)
        return names

    def entity_of(self, token: str) -> Optional[int]:
        return self._entity_by_name.get(token)

    def word_vector(self, token: str) -> np.ndarray:
        return self._word_cache(token)

    def _draw_word_vector(self, token: str) -> np.ndarray:
        return np.random.default_rng([self.seed, 2, stable_hash(token)]).normal(size=self.text_dim)

    def to_dict(self) -> Dict:
        return {
            "entity_count": self.entity_count,
            "latent_dim": self.latent_dim,
            "text_dim": self.text_dim,
            "image_dim": self.image_dim,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
        }


def token_id(token: str) -> int:
    """Positive 63-bit id; 0 is reserved for the summary slot."""
    return (stable_hash(token) >> 1) or 1


def encode_text_synthetic(text: str, world: SyntheticWorld) -> TextEncoding:
    """Summary slot (mean of token vectors) followed by one vector per token."""
    tokens = tokenize(text)
    vectors = []
    for position, token in enumerate(tokens):
        entity = world.entity_of(token)
        if entity is None:
            vectors.append(world.word_vector(token))
            continue
        noise_rng = np.random.default_rng([world.seed, 3, stable_hash(token), position])
        noise = noise_rng.normal(scale=world.noise_sigma, size=world.text_dim) if world.noise_sigma else 0.0
        vectors.append(world.latents[entity] @ world.text_map + noise)
    if vectors:
        body = np.stack(vectors)
        summary = body.mean(axis=0)
        embeddings = np.vstack([summary[None, :], body])
    else:
        embeddings = np.zeros((1, world.text_dim))
    return TextEncoding(tokens=[SUMMARY_TOKEN_ID] + [token_id(t) for t in tokens], embeddings=embeddings)


def encode_image_synthetic(image: ImageRef, world: SyntheticWorld) -> ImageEncoding:
    """Entity latent through the image map plus Gaussian noise seeded by (world seed, uri)."""
    entity = image.entity
    if entity is None or not 0 <= entity < world.entity_count:
        raise UnlabeledImageError(f"unlabeled fixture image: {image.uri}")
    vector = world.latents[entity] @ world.image_map
    if world.noise_sigma:
        rng = np.random.default_rng([world.seed, 4, stable_hash(image.uri)])
        vector = vector + rng.normal(scale=world.noise_sigma, size=world.image_dim)
    return ImageEncoding(vector=vector, source=image)
