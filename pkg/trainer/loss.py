"""Contrastive loss with in-batch negatives and in-batch MRR."""

from typing import Optional, Union

import numpy as np

from autodiff import Tensor, concat, cross_entropy, matmul, transpose
from autodiff.tensor import as_tensor

ArrayOrTensor = Union[np.ndarray, Tensor]


class NoNegativesError(ValueError):
    """Raised when a batch offers no passage other than the positive."""


def contrastive_loss(
    q_vectors: ArrayOrTensor,
    p_pos_vectors: ArrayOrTensor,
    p_neg_vectors: Optional[ArrayOrTensor] = None,
) -> Tensor:
    """Mean over questions of -log softmax(q . p+) against all batch passages.

    Row k scores every positive of the batch and every hard negative, so the
    other questions' positives and all hard negatives are negatives for k.
    """
    q, p_pos = as_tensor(q_vectors), as_tensor(p_pos_vectors)
    if q.shape != p_pos.shape or q.data.ndim != 2:
        raise ValueError(f"questions {q.shape} and positives {p_pos.shape} must both be (B, d)")
    batch = q.shape[0]
    passages = p_pos
    negatives = 0
    if p_neg_vectors is not None:
        p_neg = as_tensor(p_neg_vectors)
        if p_neg.data.ndim == 2 and p_neg.shape[0] > 0:
            negatives = p_neg.shape[0]
            passages = concat([p_pos, p_neg], axis=0)
    if batch < 2 and negatives == 0:
        raise NoNegativesError("no negatives available")
    logits = matmul(q, transpose(passages))
    return cross_entropy(logits, np.arange(batch))


def inbatch_reciprocal_ranks(q_vectors: np.ndarray, p_vectors: np.ndarray) -> np.ndarray:
    """1 / rank of p_k for q_k among the batch passages; ties rank the true passage last."""
    q = np.asarray(q_vectors, dtype=np.float64)
    p = np.asarray(p_vectors, dtype=np.float64)
    if q.shape != p.shape or q.ndim != 2:
        raise ValueError(f"questions {q.shape} and passages {p.shape} must both be (B, d)")
    if q.shape[0] < 2:
        raise ValueError("in-batch MRR needs at least 2 questions")
    scores = q @ p.T
    true = np.diag(scores)[:, None]
    # >= counts the diagonal itself, which supplies the +1
    ranks = np.sum(scores >= true, axis=1)
    return 1.0 / ranks


def inbatch_mrr(q_vectors: np.ndarray, p_vectors: np.ndarray) -> float:
    return float(inbatch_reciprocal_ranks(q_vectors, p_vectors).mean())
