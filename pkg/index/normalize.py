"""Zero-mean, unit-variance score normalisation."""

import logging
from typing import Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


def znorm(scores: Sequence[float]) -> Tuple[np.ndarray, bool]:
    """Standardise with the population std; constant input gives zeros and ``True``."""
    values = np.asarray(scores, dtype=np.float64)
    if values.ndim != 1 or values.size < 2:
        raise ValueError(f"znorm needs at least 2 scores, got {values.size}")
    centered = values - values.mean()
    std = float(np.sqrt(np.mean(centered ** 2)))
    if std <= 1e-12 * max(1.0, float(np.abs(values).max())):
        logger.warning("Zero-variance scores over %d candidates; normalised to zeros", values.size)
        return np.zeros_like(values), True
    return centered / std, False
