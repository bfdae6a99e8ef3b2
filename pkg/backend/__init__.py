"""Backend module."""

from .synthetic import (
    SUMMARY_TOKEN_ID,
    TextEncoding,
    ImageEncoding,
    SyntheticWorld,
    UnlabeledImageError,
    tokenize,
    token_id,
    encode_text_synthetic,
    encode_image_synthetic,
)
from .precomputed import DimensionMismatchError, EmbeddingTable, load_precomputed, save_precomputed, cosine_scores
from .encoders import Backend
from .world import WorldConfig, SyntheticKvqae, generate_kvqae, split_questions

__all__ = [
    "SUMMARY_TOKEN_ID",
    "TextEncoding",
    "ImageEncoding",
    "SyntheticWorld",
    "UnlabeledImageError",
    "tokenize",
    "token_id",
    "encode_text_synthetic",
    "encode_image_synthetic",
    "DimensionMismatchError",
    "EmbeddingTable",
    "load_precomputed",
    "save_precomputed",
    "cosine_scores",
    "Backend",
    "WorldConfig",
    "SyntheticKvqae",
    "generate_kvqae",
    "split_questions",
]
