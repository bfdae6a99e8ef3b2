"""Frozen encoder front-end used by training, embedding and search."""

import logging
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np

from config.settings import ENCODER_CACHE_SIZE
from corpus.documents import ImageRef
from .precomputed import DimensionMismatchError, EmbeddingTable
from .synthetic import (
    ImageEncoding,
    SyntheticWorld,
    TextEncoding,
    encode_image_synthetic,
    encode_text_synthetic,
)

logger = logging.getLogger(__name__)


class Backend:
    """Text and image encoders with bounded per-input memoisation.

    Images whose uri appears in ``image_table`` use the precomputed vector;
    all others go through the synthetic world. A missing image encodes as zeros.
    """

    def __init__(
        self,
        world: SyntheticWorld,
        image_table: Optional[EmbeddingTable] = None,
        cache_size: int = ENCODER_CACHE_SIZE,
    ):
        if image_table is not None and len(image_table) and image_table.dim != world.image_dim:
            raise DimensionMismatchError(
                f"precomputed image table has dimension {image_table.dim}, world expects {world.image_dim}"
            )
        self.world = world
        self.image_table = image_table
        self._texts = lru_cache(maxsize=cache_size)(self._encode_text)
        self._images = lru_cache(maxsize=cache_size)(self._encode_image)

    @property
    def text_dim(self) -> int:
        return self.world.text_dim

    @property
    def image_dim(self) -> int:
        return self.world.image_dim

    def encode_text(self, text: str) -> TextEncoding:
        return self._texts(text)

    def encode_image(self, image: Optional[ImageRef]) -> ImageEncoding:
        if image is None:
            return ImageEncoding(vector=np.zeros(self.image_dim), source=None)
        return self._images(image)

    def clear_cache(self):
        self._texts.cache_clear()
        self._images.cache_clear()

    def _encode_text(self, text: str) -> TextEncoding:
        return encode_text_synthetic(text, self.world)

    def _encode_image(self, image: ImageRef) -> ImageEncoding:
        if self.image_table is not None and image.uri in self.image_table:
            return ImageEncoding(vector=self.image_table[image.uri], source=image)
        return encode_image_synthetic(image, self.world)

    def encode_text_batch(self, texts: Sequence[str], threads: int = 1) -> List[TextEncoding]:
        if threads > 1 and len(texts) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(self.encode_text, texts))
        return [self.encode_text(t) for t in texts]

    def encode_image_batch(self, images: Sequence[Optional[ImageRef]], threads: int = 1) -> List[ImageEncoding]:
        if threads > 1 and len(images) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(self.encode_image, images))
        return [self.encode_image(i) for i in images]
