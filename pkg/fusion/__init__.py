"""Fusion module."""

from evaluation.runs import ScoredList, read_run, write_run
from .models import (
    KINDS,
    FusionConfig,
    FusionModel,
    BiEncoder,
    SequenceTooLongError,
    eca_encode,
    ilf_encode,
    text_summary,
    encode,
)
from .late import late_fusion_scores, grid_search_alpha, alpha_grid

__all__ = [
    "ScoredList",
    "read_run",
    "write_run",
    "KINDS",
    "FusionConfig",
    "FusionModel",
    "BiEncoder",
    "SequenceTooLongError",
    "eca_encode",
    "ilf_encode",
    "text_summary",
    "encode",
    "late_fusion_scores",
    "grid_search_alpha",
    "alpha_grid",
]
