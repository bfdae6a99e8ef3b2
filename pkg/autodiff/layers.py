"""Post-norm transformer encoder built from the autodiff primitives."""

from dataclasses import dataclass, asdict
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np

from config.settings import DROPOUT_PROB, INIT_STD
from .tensor import (
    Parameter,
    Tensor,
    ShapeError,
    add,
    dropout,
    feed_forward,
    gather_rows,
    layer_norm,
    matmul,
    scaled_dot_attention,
)


@dataclass
class TransformerConfig:
    """Shape and regularisation of a transformer text tower."""
    layers: int = 2
    model_dim: int = 32
    heads: int = 4
    ffn_dim: int = 64
    dropout_prob: float = DROPOUT_PROB
    max_seq: int = 128
    use_positions: bool = True
    use_type_embedding: bool = True

    def __post_init__(self):
        if self.model_dim % self.heads:
            raise ValueError(f"model_dim {self.model_dim} must be divisible by heads {self.heads}")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError(f"dropout_prob must be in [0, 1), got {self.dropout_prob}")
        if self.layers < 0 or self.max_seq < 1:
            raise ValueError("layers must be >= 0 and max_seq >= 1")

    def to_dict(self) -> Dict:
        return asdict(self)


def _normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


class TransformerEncoder:
    """Embedding block plus ``layers`` self-attention blocks over (B, T, d) inputs.

    Parameter names follow ``<prefix>embeddings.*`` and ``<prefix>layers.<i>.*``.
    """

    def __init__(self, config: TransformerConfig, rng: np.random.Generator, prefix: str = ""):
        self.config = config
        self.prefix = prefix
        d, f = config.model_dim, config.ffn_dim
        p = self._name
        self.params: Dict[str, Parameter] = {
            p("embeddings.position"): Parameter(_normal(rng, (config.max_seq, d), INIT_STD), p("embeddings.position")),
            p("embeddings.type"): Parameter(_normal(rng, (2, d), INIT_STD), p("embeddings.type")),
            p("embeddings.norm.gamma"): Parameter(np.ones(d), p("embeddings.norm.gamma")),
            p("embeddings.norm.beta"): Parameter(np.zeros(d), p("embeddings.norm.beta")),
        }
        for i in range(config.layers):
            shapes = {
                "attention.query": (d, d), "attention.key": (d, d),
                "attention.value": (d, d), "attention.output": (d, d),
                "ffn.in": (d, f), "ffn.out": (f, d),
            }
            for name, shape in shapes.items():
                key = p(f"layers.{i}.{name}.weight")
                self.params[key] = Parameter(_normal(rng, shape, INIT_STD), key)
                key = p(f"layers.{i}.{name}.bias")
                self.params[key] = Parameter(np.zeros(shape[1]), key)
            for norm in ("attention_norm", "ffn_norm"):
                key = p(f"layers.{i}.{norm}.gamma")
                self.params[key] = Parameter(np.ones(d), key)
                key = p(f"layers.{i}.{norm}.beta")
                self.params[key] = Parameter(np.zeros(d), key)

    def _name(self, suffix: str) -> str:
        return f"{self.prefix}{suffix}"

    def layer_parameters(self, index: int) -> List[Parameter]:
        marker = self._name(f"layers.{index}.")
        return [param for name, param in self.params.items() if name.startswith(marker)]

    def embedding_parameters(self) -> List[Parameter]:
        marker = self._name("embeddings.")
        return [param for name, param in self.params.items() if name.startswith(marker)]

    def parameters(self) -> Iterator[Parameter]:
        return iter(self.params.values())

    def freeze_last(self, count: int):
        """Freeze the last ``count`` layers; all layers frozen also freezes the embeddings."""
        layers = self.config.layers
        if not 0 <= count <= layers:
            raise ValueError(f"cannot freeze {count} of {layers} layers")
        for param in self.parameters():
            param.frozen = False
        for index in range(layers - count, layers):
            for param in self.layer_parameters(index):
                param.frozen = True
        if count == layers:
            for param in self.embedding_parameters():
                param.frozen = True

    def forward(
        self,
        inputs: Tensor,
        key_mask: np.ndarray,
        position_ids: np.ndarray,
        type_ids: np.ndarray,
        train: bool = False,
        seed: Optional[Sequence[int]] = None,
    ) -> Tensor:
        """Encode (B, T, d) input vectors; returns the final hidden states."""
        cfg = self.config
        if inputs.shape[1] > cfg.max_seq:
            raise ShapeError(f"sequence length {inputs.shape[1]} exceeds max_seq {cfg.max_seq}")
        p = self.params
        seed = list(seed or [0])

        x = inputs
        if cfg.use_positions:
            x = add(x, gather_rows(p[self._name("embeddings.position")], position_ids))
        if cfg.use_type_embedding:
            x = add(x, gather_rows(p[self._name("embeddings.type")], type_ids))
        x = layer_norm(x, p[self._name("embeddings.norm.gamma")], p[self._name("embeddings.norm.beta")])
        x = dropout(x, cfg.dropout_prob, train, seed + [0, 0])

        for i in range(cfg.layers):
            w = lambda name: p[self._name(f"layers.{i}.{name}")]
            q = add(matmul(x, w("attention.query.weight")), w("attention.query.bias"))
            k = add(matmul(x, w("attention.key.weight")), w("attention.key.bias"))
            v = add(matmul(x, w("attention.value.weight")), w("attention.value.bias"))
            attended = scaled_dot_attention(q, k, v, cfg.heads, key_mask)
            attended = add(matmul(attended, w("attention.output.weight")), w("attention.output.bias"))
            attended = dropout(attended, cfg.dropout_prob, train, seed + [i + 1, 1])
            x = layer_norm(add(x, attended), w("attention_norm.gamma"), w("attention_norm.beta"))

            hidden = feed_forward(x, w("ffn.in.weight"), w("ffn.in.bias"), w("ffn.out.weight"), w("ffn.out.bias"))
            hidden = dropout(hidden, cfg.dropout_prob, train, seed + [i + 1, 2])
            x = layer_norm(add(x, hidden), w("ffn_norm.gamma"), w("ffn_norm.beta"))
        return x
