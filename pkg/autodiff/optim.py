"""Adam, global-norm clipping and learning-rate schedules."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from config.settings import ADAM_BETAS, ADAM_EPS, GRAD_CLIP_NORM
from .tensor import Parameter

logger = logging.getLogger(__name__)

SCHEDULES = ("linear_warmup", "constant")


class GradientOverflowError(FloatingPointError):
    """Raised when a parameter gradient holds NaN or infinity."""


@dataclass
class AdamState:
    """First/second moment estimates keyed by parameter name."""
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Iterable[Parameter],
    state: AdamState,
    lr: float,
    betas: Tuple[float, float] = ADAM_BETAS,
    eps: float = ADAM_EPS,
    t: Optional[int] = None,
) -> AdamState:
    """Apply one bias-corrected Adam update in place to every unfrozen parameter.

    Parameters without a gradient buffer are treated as having zero gradient.
    """
    t = state.step + 1 if t is None else t
    if t < 1:
        raise ValueError(f"Adam step index must be >= 1, got {t}")
    trainable = [p for p in params if not p.frozen]
    for param in trainable:
        if param.grad is not None and not np.all(np.isfinite(param.grad)):
            raise GradientOverflowError(f"gradient overflow in parameter {param.name}")

    b1, b2 = betas
    for param in trainable:
        grad = param.grad if param.grad is not None else np.zeros_like(param.data)
        m = state.m.get(param.name, np.zeros_like(param.data))
        v = state.v.get(param.name, np.zeros_like(param.data))
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        state.m[param.name], state.v[param.name] = m, v
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        param.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    state.step = t
    return state


class Adam:
    """Stateful wrapper around ``adam_step`` for a fixed parameter list."""

    def __init__(self, params: Iterable[Parameter], betas: Tuple[float, float] = ADAM_BETAS, eps: float = ADAM_EPS):
        self.params: List[Parameter] = list(params)
        self.betas = betas
        self.eps = eps
        self.state = AdamState()

    def step(self, lr: float):
        adam_step(self.params, self.state, lr, self.betas, self.eps)

    def zero_grad(self):
        for param in self.params:
            param.zero_grad()


def clip_grad_norm(params: Iterable[Parameter], max_norm: float = GRAD_CLIP_NORM) -> float:
    """Scale all gradients so their global L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    grads = [p.grad for p in params if not p.frozen and p.grad is not None]
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads))) if grads else 0.0
    if total > max_norm:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


def lr_schedule(kind: str, base_lr: float, warmup_steps: int, step: int, total_steps: Optional[int] = None) -> float:
    """Learning rate at ``step``.

    ``linear_warmup`` rises linearly to ``base_lr`` over ``warmup_steps`` and then
    decays linearly to zero at ``total_steps``; ``constant`` always returns ``base_lr``.
    """
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    if kind == "constant":
        return base_lr
    if kind != "linear_warmup":
        raise ValueError(f"unknown schedule {kind!r}; expected one of {SCHEDULES}")
    total_steps = warmup_steps if total_steps is None else total_steps
    if warmup_steps > total_steps:
        raise ValueError(f"warmup_steps {warmup_steps} exceeds total_steps {total_steps}")
    if step < warmup_steps:
        return base_lr * step / warmup_steps
    if total_steps == warmup_steps:
        return base_lr if step == warmup_steps else 0.0
    return base_lr * max(0.0, (total_steps - step) / (total_steps - warmup_steps))
