"""Late fusion of per-modality scores and validation grid search over the mixing weight."""

import logging
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from config.settings import ALPHA_GRID_STEP
from evaluation.metrics import Qrels, mrr_at_k
from evaluation.runs import ScoredList
from index.normalize import znorm

logger = logging.getLogger(__name__)


def _pool(text: ScoredList, image: ScoredList) -> Tuple[list, np.ndarray, np.ndarray]:
    """Union candidate pool; a candidate one modality did not score takes that modality's minimum."""
    text_scores, image_scores = text.as_dict(), image.as_dict()
    ids = sorted(set(text_scores) | set(image_scores))
    text_floor = min(text_scores.values()) if text_scores else 0.0
    image_floor = min(image_scores.values()) if image_scores else 0.0
    t = np.array([text_scores.get(i, text_floor) for i in ids])
    v = np.array([image_scores.get(i, image_floor) for i in ids])
    return ids, t, v


def _normalised(text: ScoredList, image: ScoredList):
    ids, t, v = _pool(text, image)
    if len(ids) < 2:
        raise ValueError(f"question {text.question_id!r}: late fusion needs at least 2 candidates")
    zt, text_constant = znorm(t)
    zv, image_constant = znorm(v)
    flags = set()
    if text_constant:
        flags.add("constant_text")
    if image_constant:
        flags.add("constant_image")
    return ids, zt, zv, frozenset(flags)


def late_fusion_scores(text: ScoredList, image: ScoredList, alpha: float, k: Optional[int] = None) -> ScoredList:
    """alpha * z(text) + (1 - alpha) * z(image) over the candidate pool.

    Text scores are dot products and image scores cosines; both are
    standardised per question before mixing. A zero-variance modality
    contributes zeros and is named in ``flags``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    ids, zt, zv, flags = _normalised(text, image)
    fused = alpha * zt + (1.0 - alpha) * zv
    return ScoredList.from_scores(text.question_id or image.question_id, ids, fused.tolist(), k=k, flags=flags)


def alpha_grid(grid_step: float = ALPHA_GRID_STEP) -> np.ndarray:
    """{0, step, 2 step, ..., 1}."""
    if not 0.0 < grid_step <= 0.5:
        raise ValueError(f"grid_step must be in (0, 0.5], got {grid_step}")
    count = int(np.floor(1.0 / grid_step + 1e-9))
    grid = np.round(np.arange(count + 1) * grid_step, 10)
    if grid[-1] < 1.0 - 1e-9:
        grid = np.append(grid, 1.0)
    return grid


def grid_search_alpha(
    validation_runs: Mapping[str, Tuple[ScoredList, ScoredList]],
    qrels: Qrels,
    grid_step: float = ALPHA_GRID_STEP,
    grid: Optional[Sequence[float]] = None,
    k: int = 100,
) -> float:
    """Mixing weight maximising validation MRR@k; ties go to the smaller alpha."""
    if not validation_runs:
        raise ValueError("validation set is empty")
    candidates = sorted(float(a) for a in grid) if grid is not None else alpha_grid(grid_step).tolist()
    if not candidates:
        raise ValueError("alpha grid is empty")
    normalised = {qid: _normalised(text, image) for qid, (text, image) in validation_runs.items()}
    judged = Qrels({qid: qrels[qid] if qid in qrels else frozenset() for qid in validation_runs})

    best_alpha, best_mrr = None, -1.0
    for alpha in candidates:
        run: Dict[str, ScoredList] = {}
        for qid, (ids, zt, zv, flags) in normalised.items():
            run[qid] = ScoredList.from_scores(qid, ids, (alpha * zt + (1.0 - alpha) * zv).tolist(), k=k)
        value = mrr_at_k(run, judged, k).mean
        logger.debug("alpha %.3f -> MRR@%d %.4f", alpha, k, value)
        if value > best_mrr:
            best_alpha, best_mrr = alpha, value
    logger.info("Selected alpha %.2f (validation MRR@%d %.4f)", best_alpha, k, best_mrr)
    return best_alpha
