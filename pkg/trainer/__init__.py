"""Trainer module."""

from .loss import NoNegativesError, contrastive_loss, inbatch_mrr, inbatch_reciprocal_ranks
from .batches import EncodedInput, TrainExample, TrainBatch, build_ict_examples, build_qa_examples, index_passages
from .negatives import Retriever, bm25_retriever, mine_hard_negatives, mine_all
from .stages import (
    StagePlan,
    LogRecord,
    TrainLog,
    StageResult,
    NonFiniteLossError,
    validate,
    run_stage,
)

__all__ = [
    "NoNegativesError",
    "contrastive_loss",
    "inbatch_mrr",
    "inbatch_reciprocal_ranks",
    "EncodedInput",
    "TrainExample",
    "TrainBatch",
    "build_ict_examples",
    "build_qa_examples",
    "index_passages",
    "Retriever",
    "bm25_retriever",
    "mine_hard_negatives",
    "mine_all",
    "StagePlan",
    "LogRecord",
    "TrainLog",
    "StageResult",
    "NonFiniteLossError",
    "validate",
    "run_stage",
]
