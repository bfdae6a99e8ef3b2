"""Stage runner: contrastive training with clipping, scheduled Adam and in-batch MRR checkpoint selection."""

import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from autodiff import Adam, clip_grad_norm, lr_schedule
from autodiff.optim import SCHEDULES
from config.settings import GRAD_CLIP_NORM, STAGE_DEFAULTS, VALIDATION_EVERY
from corpus.documents import read_jsonl, write_jsonl
from fusion.models import KINDS, BiEncoder
from .batches import TrainBatch, TrainExample
from .loss import contrastive_loss, inbatch_reciprocal_ranks

logger = logging.getLogger(__name__)


class NonFiniteLossError(RuntimeError):
    """Raised when the training loss becomes NaN or infinite."""

    def __init__(self, step: int, value: float):
        super().__init__(f"non-finite loss {value} at step {step}")
        self.step = step
        self.value = value


@dataclass
class StagePlan:
    """Hyperparameters of one training stage."""
    stage: int
    kind: str
    batch_size: int
    lr: float
    schedule: str = "linear_warmup"
    warmup_steps: int = 0
    frozen_last_l: int = 0
    max_steps: int = 0
    seed: int = 0
    validation_every: int = VALIDATION_EVERY
    clip_norm: float = GRAD_CLIP_NORM
    progress: bool = False

    def __post_init__(self):
        if self.stage not in (1, 2, 3):
            raise ValueError(f"stage must be 1, 2 or 3, got {self.stage}")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        for name in ("batch_size", "validation_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("warmup_steps", "frozen_last_l", "max_steps", "seed"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.lr <= 0 or self.clip_norm <= 0:
            raise ValueError("lr and clip_norm must be positive")

    @classmethod
    def defaults(cls, stage: int, kind: str, **overrides) -> "StagePlan":
        """Recipe defaults for ``(stage, kind)``, updated by ``overrides``."""
        try:
            values = dict(STAGE_DEFAULTS[(stage, kind)])
        except KeyError:
            raise ValueError(f"no default plan for stage {stage} with kind {kind!r}") from None
        values.update(overrides)
        return cls(stage=stage, kind=kind, **values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class LogRecord:
    """One training-log line; step 0 has no loss."""
    step: int
    loss: Optional[float]
    lr: float
    grad_norm: float
    val_mrr: Optional[float] = None

    def to_record(self) -> Dict[str, Any]:
        record = asdict(self)
        if self.val_mrr is None:
            del record["val_mrr"]
        return record


@dataclass
class TrainLog:
    """Per-step records; step 0 holds the pre-training validation."""
    records: List[LogRecord] = field(default_factory=list)

    def append(self, record: LogRecord):
        self.records.append(record)

    @property
    def validations(self) -> List[tuple]:
        return [(r.step, r.val_mrr) for r in self.records if r.val_mrr is not None]

    def write(self, path: Union[str, Path]) -> int:
        return write_jsonl(path, (r.to_record() for r in self.records))

    @classmethod
    def read(cls, path: Union[str, Path]) -> "TrainLog":
        return cls([LogRecord(**r) for r in read_jsonl(path)])


@dataclass
class StageResult:
    model: BiEncoder
    best_mrr: float
    best_step: int
    log: TrainLog
    optimizer: Optional[Adam] = None


def _encode_side(model: BiEncoder, inputs, side: str, train: bool, seed):
    texts = [x.text for x in inputs]
    images = [x.image for x in inputs]
    if side == "question":
        return model.encode_questions(texts, images, train=train, seed=seed)
    return model.encode_passages(texts, images, train=train, seed=seed)


def validate(model: BiEncoder, examples: Sequence[TrainExample], batch_size: int) -> float:
    """Mean in-batch reciprocal rank over ``examples`` cut into chunks of ``batch_size``."""
    if len(examples) < 2:
        raise ValueError("validation needs at least 2 examples")
    size = max(batch_size, 2)
    bounds = list(range(0, len(examples), size)) + [len(examples)]
    if bounds[-1] - bounds[-2] < 2:
        # a trailing singleton joins the previous chunk
        bounds.pop(-2)
    reciprocal = []
    for start, stop in zip(bounds[:-1], bounds[1:]):
        chunk = examples[start:stop]
        q = _encode_side(model, [e.question for e in chunk], "question", False, None).data
        p = _encode_side(model, [e.positive for e in chunk], "passage", False, None).data
        reciprocal.append(inbatch_reciprocal_ranks(q, p))
    return float(np.concatenate(reciprocal).mean())


def _apply_freezing(plan: StagePlan, model: BiEncoder):
    if plan.stage == 2:
        model.freeze(plan.frozen_last_l)
    else:
        model.freeze(0)
    trainable = sum(p.data.size for p in model.parameters() if not p.frozen)
    logger.info("Stage %d %s: %d trainable values", plan.stage, plan.kind, trainable)


def run_stage(
    plan: StagePlan,
    data: Sequence[TrainExample],
    model: BiEncoder,
    eval_set: Sequence[TrainExample],
    log: Optional[TrainLog] = None,
) -> StageResult:
    """Train ``model`` in place and return it holding the best validated weights."""
    if model.kind != plan.kind:
        raise ValueError(f"plan is for {plan.kind!r} but model is {model.kind!r}")
    if plan.max_steps and not data:
        raise ValueError("training data is empty")
    log = log if log is not None else TrainLog()
    _apply_freezing(plan, model)
    params = model.parameters()
    optimizer = Adam(params)
    rng = np.random.default_rng([plan.seed, plan.stage])
    batch_size = min(plan.batch_size, len(data)) if data else plan.batch_size
    total_steps = max(plan.max_steps, plan.warmup_steps)

    best_mrr = validate(model, eval_set, plan.batch_size)
    best_state, best_step = model.state_dict(), 0
    log.append(LogRecord(step=0, loss=None, lr=0.0, grad_norm=0.0, val_mrr=best_mrr))
    logger.info("Stage %d %s: initial validation in-batch MRR %.4f", plan.stage, plan.kind, best_mrr)

    order = np.array([], dtype=np.int64)
    cursor = 0
    steps = tqdm(range(1, plan.max_steps + 1), desc=f"stage {plan.stage} {plan.kind}", disable=not plan.progress)
    for step in steps:
        if cursor + batch_size > len(order):
            order, cursor = rng.permutation(len(data)), 0
        batch = TrainBatch.from_examples([data[i] for i in order[cursor:cursor + batch_size]])
        cursor += batch_size

        seed = [plan.seed, step]
        optimizer.zero_grad()
        q = _encode_side(model, batch.questions, "question", True, seed)
        p_pos = _encode_side(model, batch.positives, "passage", True, seed)
        negatives = batch.flat_negatives
        p_neg = _encode_side(model, negatives, "passage", True, seed + [2]) if negatives else None
        loss = contrastive_loss(q, p_pos, p_neg)
        value = float(loss.data)
        if not math.isfinite(value):
            raise NonFiniteLossError(step, value)
        loss.backward()
        grad_norm = clip_grad_norm(params, plan.clip_norm)
        lr = lr_schedule(plan.schedule, plan.lr, plan.warmup_steps, step, total_steps)
        optimizer.step(lr)

        record = LogRecord(step=step, loss=value, lr=lr, grad_norm=grad_norm)
        if step % plan.validation_every == 0 or step == plan.max_steps:
            record.val_mrr = validate(model, eval_set, plan.batch_size)
            logger.debug("step %d: validation in-batch MRR %.4f", step, record.val_mrr)
            if record.val_mrr > best_mrr:
                best_mrr, best_state, best_step = record.val_mrr, model.state_dict(), step
        log.append(record)
        steps.set_postfix(loss=f"{value:.4f}")

    model.load_state_dict(best_state)
    logger.info(
        "Stage %d %s: best validation in-batch MRR %.4f at step %d",
        plan.stage, plan.kind, best_mrr, best_step,
    )
    return StageResult(model=model, best_mrr=best_mrr, best_step=best_step, log=log, optimizer=optimizer)
