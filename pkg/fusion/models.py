"""Text-only, early cross-attention (ECA) and intermediate linear fusion (ILF) encoders.

Every encoder owns a transformer text tower over frozen backend token
embeddings. ECA projects the image vector into a visual token placed after the
last text token; ILF adds the projected image vector to the projected summary
slot and layer-normalises the sum. Both question and passage sides are held by
a ``BiEncoder``.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from autodiff import (
    Parameter,
    Tensor,
    TransformerConfig,
    TransformerEncoder,
    add,
    concat_seq,
    dropout,
    layer_norm,
    load_checkpoint,
    matmul,
    save_checkpoint,
    take_position,
)
from autodiff.optim import AdamState
from backend.precomputed import DimensionMismatchError
from backend.synthetic import ImageEncoding, TextEncoding
from config.settings import SYNTHETIC_DEFAULTS

logger = logging.getLogger(__name__)

KINDS = ("text", "eca", "ilf")
VISUAL_TYPE_ID = 1


class SequenceTooLongError(ValueError):
    """Raised when an encoded input exceeds the tower's maximum sequence length."""


@dataclass
class FusionConfig:
    """Encoder kind, tower shape and backend widths."""
    kind: str = "eca"
    transformer: TransformerConfig = field(default_factory=TransformerConfig)
    text_dim: int = SYNTHETIC_DEFAULTS["text_dim"]
    image_dim: int = SYNTHETIC_DEFAULTS["image_dim"]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.text_dim != self.transformer.model_dim:
            raise ValueError(
                f"text_dim {self.text_dim} must equal transformer model_dim {self.transformer.model_dim}"
            )
        if self.image_dim < 1:
            raise ValueError("image_dim must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "transformer": self.transformer.to_dict(),
            "text_dim": self.text_dim,
            "image_dim": self.image_dim,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FusionConfig":
        return cls(
            kind=data["kind"],
            transformer=TransformerConfig(**data["transformer"]),
            text_dim=int(data["text_dim"]),
            image_dim=int(data["image_dim"]),
        )


class FusionModel:
    """One encoder tower of kind ``text``, ``eca`` or ``ilf``."""

    def __init__(self, config: FusionConfig, rng: np.random.Generator, prefix: str = ""):
        self.config = config
        self.prefix = prefix
        self.tower = TransformerEncoder(config.transformer, rng, prefix=f"{prefix}tower.")
        self.params: Dict[str, Parameter] = dict(self.tower.params)
        d, c = config.text_dim, config.image_dim
        if config.kind in ("eca", "ilf"):
            self._add(Parameter(rng.normal(0.0, 1.0 / np.sqrt(c), size=(c, d)), f"{prefix}visual.projection"))
        if config.kind == "ilf":
            self._add(Parameter(rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, d)), f"{prefix}fusion.text_projection"))
            self._add(Parameter(np.ones(d), f"{prefix}fusion.norm.gamma"))
            self._add(Parameter(np.zeros(d), f"{prefix}fusion.norm.beta"))
        self.frozen_last_l = 0

    def _add(self, param: Parameter):
        self.params[param.name] = param

    @property
    def kind(self) -> str:
        return self.config.kind

    @property
    def w_c(self) -> Parameter:
        return self.params[f"{self.prefix}visual.projection"]

    @property
    def w_t(self) -> Parameter:
        return self.params[f"{self.prefix}fusion.text_projection"]

    def parameters(self) -> List[Parameter]:
        return list(self.params.values())

    def freeze(self, frozen_last_l: int):
        """Freeze the last ``frozen_last_l`` tower layers (clamped to the depth); projections stay trainable."""
        layers = self.config.transformer.layers
        count = min(max(frozen_last_l, 0), layers)
        if count != frozen_last_l:
            logger.warning("frozen_last_l=%d clamped to tower depth %d", frozen_last_l, layers)
        self.tower.freeze_last(count)
        self.frozen_last_l = count

    # ===== Encoding =====

    def _pack(self, texts: Sequence[TextEncoding]):
        extra = 1 if self.kind == "eca" else 0
        lengths = np.array([len(t.tokens) for t in texts], dtype=np.int64)
        limit = self.config.transformer.max_seq
        for i, n in enumerate(lengths):
            if n + extra > limit:
                raise SequenceTooLongError(f"input {i} needs {n + extra} positions, max_seq is {limit}")
        width = self.config.text_dim
        inputs = np.zeros((len(texts), int(lengths.max()), width))
        for i, text in enumerate(texts):
            if text.embeddings.shape[1] != width:
                raise DimensionMismatchError(
                    f"input {i} has token width {text.embeddings.shape[1]}, model expects {width}"
                )
            inputs[i, :lengths[i]] = text.embeddings
        return inputs, lengths

    def _images(self, images: Sequence[Optional[ImageEncoding]], count: int) -> np.ndarray:
        c = self.config.image_dim
        matrix = np.zeros((count, c))
        for i, image in enumerate(images):
            if image is None:
                continue
            vector = np.asarray(image.vector, dtype=np.float64)
            if vector.shape != (c,):
                raise DimensionMismatchError(f"image {i} has dimension {vector.shape[-1]}, model expects {c}")
            matrix[i] = vector
        return matrix

    def _run_tower(self, inputs: Tensor, lengths: np.ndarray, visual: bool, train: bool, seed: List[int]) -> Tensor:
        batch, steps = inputs.shape[0], inputs.shape[1]
        slots = np.arange(steps)[None, :]
        mask = slots < (lengths + (1 if visual else 0))[:, None]
        positions = np.broadcast_to(slots, (batch, steps))
        types = np.zeros((batch, steps), dtype=np.int64)
        if visual:
            types[np.arange(batch), lengths] = VISUAL_TYPE_ID
        return self.tower.forward(inputs, mask, positions, types, train=train, seed=seed)

    def summary(self, texts: Sequence[TextEncoding], train: bool = False, seed: Optional[Sequence[int]] = None) -> Tensor:
        """Tower output at the summary slot, without any image input."""
        seed = list(seed or [0])
        inputs, lengths = self._pack(texts)
        hidden = self._run_tower(Tensor(inputs), lengths, False, train, seed)
        return take_position(hidden, 0)

    def encode_batch(
        self,
        texts: Sequence[TextEncoding],
        images: Optional[Sequence[Optional[ImageEncoding]]] = None,
        train: bool = False,
        seed: Optional[Sequence[int]] = None,
    ) -> Tensor:
        """(B, d) representations; padded batches use a key mask."""
        if not texts:
            raise ValueError("cannot encode an empty batch")
        if images is not None and len(images) != len(texts):
            raise ValueError(f"{len(texts)} texts but {len(images)} images")
        seed = list(seed or [0])
        prob = self.config.transformer.dropout_prob

        if self.kind == "text":
            return self.summary(texts, train, seed)

        image_matrix = self._images(images or [], len(texts))
        if self.kind == "eca":
            inputs, lengths = self._pack(texts)
            visual = matmul(Tensor(image_matrix[:, None, :]), self.w_c)
            visual = dropout(visual, prob, train, seed + [90])
            sequence = concat_seq(Tensor(inputs), visual, lengths)
            hidden = self._run_tower(sequence, lengths, True, train, seed)
            return take_position(hidden, 0)

        summary = self.summary(texts, train, seed)
        fused = add(matmul(summary, self.w_t), matmul(Tensor(image_matrix), self.w_c))
        fused = dropout(fused, prob, train, seed + [91])
        return layer_norm(fused, self.params[f"{self.prefix}fusion.norm.gamma"], self.params[f"{self.prefix}fusion.norm.beta"])

    # ===== State =====

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: param.data.copy() for name, param in self.params.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True):
        missing = [name for name in self.params if name not in state]
        if strict and missing:
            raise KeyError(f"checkpoint lacks parameter {missing[0]!r}")
        for name, param in self.params.items():
            if name not in state:
                continue
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.shape:
                raise DimensionMismatchError(f"parameter {name!r}: checkpoint shape {value.shape}, model {param.shape}")
            param.data = value.copy()


def _require(model: FusionModel, kind: str):
    if model.kind != kind:
        raise ValueError(f"expected a {kind} model, got {model.kind}")


def eca_encode(text: TextEncoding, image: ImageEncoding, model: FusionModel) -> np.ndarray:
    _require(model, "eca")
    return model.encode_batch([text], [image]).data[0].copy()


def ilf_encode(text: TextEncoding, image: ImageEncoding, model: FusionModel) -> np.ndarray:
    _require(model, "ilf")
    return model.encode_batch([text], [image]).data[0].copy()


def text_summary(text: TextEncoding, model: FusionModel) -> np.ndarray:
    return model.summary([text]).data[0].copy()


def encode(text: TextEncoding, image: Optional[ImageEncoding], model: FusionModel) -> np.ndarray:
    """Eval-mode vector of one input for any encoder kind."""
    return model.encode_batch([text], [image]).data[0].copy()


class BiEncoder:
    """Separate question and passage towers scored by dot product."""

    def __init__(self, config: FusionConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.question = FusionModel(config, rng, prefix="question.")
        self.passage = FusionModel(config, rng, prefix="passage.")

    @property
    def kind(self) -> str:
        return self.config.kind

    def parameters(self) -> List[Parameter]:
        return self.question.parameters() + self.passage.parameters()

    def freeze(self, frozen_last_l: int):
        self.question.freeze(frozen_last_l)
        self.passage.freeze(frozen_last_l)

    def encode_questions(self, texts, images=None, train: bool = False, seed: Optional[Sequence[int]] = None) -> Tensor:
        return self.question.encode_batch(texts, images, train, list(seed or [0]) + [0])

    def encode_passages(self, texts, images=None, train: bool = False, seed: Optional[Sequence[int]] = None) -> Tensor:
        return self.passage.encode_batch(texts, images, train, list(seed or [0]) + [1])

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = self.question.state_dict()
        state.update(self.passage.state_dict())
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True):
        self.question.load_state_dict(state, strict)
        self.passage.load_state_dict(state, strict)

    def initialize_from(self, other: "BiEncoder") -> int:
        """Copy tower weights from another bi-encoder; projections keep their fresh values."""
        source = other.state_dict()
        copied = 0
        for tower in (self.question.tower, self.passage.tower):
            for name, param in tower.params.items():
                if name not in source:
                    raise KeyError(f"source model lacks tower parameter {name!r}")
                if source[name].shape != param.shape:
                    raise DimensionMismatchError(
                        f"tower parameter {name!r}: source shape {source[name].shape}, target {param.shape}"
                    )
                param.data = source[name].copy()
                copied += 1
        logger.info("Initialised %s towers from a %s model (%d tensors)", self.kind, other.kind, copied)
        return copied

    def save(self, path: Union[str, Path], optimizer: Optional[AdamState] = None, extra: Optional[Dict] = None) -> Path:
        config = {"fusion": self.config.to_dict(), "seed": self.seed}
        config.update(extra or {})
        return save_checkpoint(path, self.state_dict(), config, optimizer)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "BiEncoder":
        state, config, _ = load_checkpoint(path)
        model = cls(FusionConfig.from_dict(config["fusion"]), seed=int(config.get("seed", 0)))
        model.load_state_dict(state)
        return model
