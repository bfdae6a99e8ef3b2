"""Services module."""

from .artifacts import ArtifactMeta, cached_step, file_hash, hash_inputs, is_fresh, meta_path, write_meta
from .pipeline import Pipeline, QUESTION_SETS, SEARCH_KINDS, SPLITS

__all__ = [
    "ArtifactMeta",
    "cached_step",
    "file_hash",
    "hash_inputs",
    "is_fresh",
    "meta_path",
    "write_meta",
    "Pipeline",
    "QUESTION_SETS",
    "SEARCH_KINDS",
    "SPLITS",
]
