"""Central finite-difference verification of backward gradients."""

import logging
from typing import Callable, Dict, Iterable, Optional

import numpy as np

from .tensor import Parameter, Tensor

logger = logging.getLogger(__name__)


def analytic_gradients(loss_fn: Callable[[], Tensor], params: Iterable[Parameter]) -> Dict[str, np.ndarray]:
    """Run one backward pass; frozen parameters report an all-zero gradient."""
    params = list(params)
    for param in params:
        param.zero_grad()
    loss_fn().backward()
    grads = {}
    for param in params:
        grads[param.name] = np.zeros_like(param.data) if param.grad is None else param.grad.copy()
    return grads


def finite_difference_check(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Parameter],
    eps: float = 1e-5,
    sample: Optional[int] = None,
    seed: int = 0,
    floor: float = 1e-6,
) -> float:
    """Largest relative error between backward and central-difference gradients.

    ``loss_fn`` must be deterministic (dropout disabled or seeded). With
    ``sample`` set, only that many randomly chosen entries per parameter are
    probed. Frozen parameters are skipped.
    """
    params = [p for p in params if not p.frozen]
    analytic = analytic_gradients(loss_fn, params)
    rng = np.random.default_rng(seed)
    worst = 0.0

    for param in params:
        flat = param.data.reshape(-1)
        indices = np.arange(flat.size)
        if sample is not None and flat.size > sample:
            indices = rng.choice(flat.size, size=sample, replace=False)
        expected = analytic[param.name].reshape(-1)
        for index in indices:
            original = flat[index]
            flat[index] = original + eps
            upper = float(loss_fn().data)
            flat[index] = original - eps
            lower = float(loss_fn().data)
            flat[index] = original
            numeric = (upper - lower) / (2.0 * eps)
            denom = max(abs(numeric), abs(expected[index]), floor)
            error = abs(numeric - expected[index]) / denom
            if error > worst:
                worst = error
                logger.debug("grad check %s[%d]: analytic %.3e numeric %.3e", param.name, index, expected[index], numeric)
    return worst
