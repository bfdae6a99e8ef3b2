"""Pipeline configuration read from a YAML file."""

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import yaml

from .settings import (
    ALPHA_GRID_STEP,
    BM25_B,
    BM25_K1,
    CONFIG_ENV_VAR,
    FISHER_ITERATIONS,
    ICT_CONTEXT_SENTENCES,
    ICT_LEAVE_IN_PROB,
    ICT_MIN_SENTENCES,
    METRIC_KS,
    PASSAGE_MAX_WORDS,
    SIGNIFICANCE_LEVEL,
    SPLIT_RATIOS,
    STAGE_DEFAULTS,
    SYNTHETIC_DEFAULTS,
    TRANSFORMER_DEFAULTS,
    VALIDATION_EVERY,
)

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid configuration; the message names the failing field."""


class MissingInputError(ConfigError):
    """A required input artifact does not exist."""


@dataclass
class PathsConfig:
    """Artifact directories; relative entries live under ``root``."""
    root: str = "artifacts"
    corpus: str = "corpus"
    pairs: str = "pairs"
    models: str = "models"
    embeddings: str = "embeddings"
    indices: str = "indices"
    runs: str = "runs"
    qrels: str = "qrels"
    reports: str = "reports"

    def resolve(self, kind: str, *parts: str) -> Path:
        if kind not in {f.name for f in fields(self)} - {"root"}:
            raise ConfigError(f"paths.{kind} is not a known artifact directory")
        base = Path(getattr(self, kind))
        if not base.is_absolute():
            base = Path(self.root) / base
        return base.joinpath(*parts)


@dataclass
class BackendConfig:
    kind: str = "synthetic"
    image_table: Optional[str] = None
    entity_count: int = SYNTHETIC_DEFAULTS["entity_count"]
    latent_dim: int = SYNTHETIC_DEFAULTS["latent_dim"]
    image_dim: int = SYNTHETIC_DEFAULTS["image_dim"]
    noise_sigma: float = SYNTHETIC_DEFAULTS["noise_sigma"]


@dataclass
class WorldSettings:
    relations: int = 6
    paragraphs: int = 3
    sentences_per_paragraph: int = 4
    filler_words: Tuple[int, int] = (3, 6)
    image_only_share: float = 0.5
    alias_share: float = 0.2


@dataclass
class CorpusSettings:
    passage_max_words: int = PASSAGE_MAX_WORDS
    leave_in_prob: float = ICT_LEAVE_IN_PROB
    context_sentences: int = ICT_CONTEXT_SENTENCES
    min_sentences: int = ICT_MIN_SENTENCES
    split_ratios: Tuple[float, float, float] = SPLIT_RATIOS
    question_split_ratios: Tuple[float, float, float] = (0.6, 0.2, 0.2)


@dataclass
class ModelConfig:
    layers: int = TRANSFORMER_DEFAULTS["layers"]
    model_dim: int = TRANSFORMER_DEFAULTS["model_dim"]
    heads: int = TRANSFORMER_DEFAULTS["heads"]
    ffn_dim: int = TRANSFORMER_DEFAULTS["ffn_dim"]
    dropout_prob: float = TRANSFORMER_DEFAULTS["dropout_prob"]
    max_seq: int = TRANSFORMER_DEFAULTS["max_seq"]


@dataclass
class NegativesConfig:
    depth: int = 100
    per_question: int = 1


@dataclass
class EvalConfig:
    search_k: int = METRIC_KS["mrr"]
    mrr_k: int = METRIC_KS["mrr"]
    precision_ks: Tuple[int, ...] = METRIC_KS["precision"]
    hits_ks: Tuple[int, ...] = METRIC_KS["hits"]
    use_aliases: bool = True
    bm25_k1: float = BM25_K1
    bm25_b: float = BM25_B
    alpha_grid_step: float = ALPHA_GRID_STEP
    fisher_iterations: int = FISHER_ITERATIONS
    significance_level: float = SIGNIFICANCE_LEVEL

    def metric_ks(self) -> Dict[str, Any]:
        return {"mrr": self.mrr_k, "precision": tuple(self.precision_ks), "hits": tuple(self.hits_ks)}


def _default_stages() -> Dict[str, Dict[str, Dict[str, Any]]]:
    stages: Dict[str, Dict[str, Dict[str, Any]]] = {}
    for (stage, kind), values in sorted(STAGE_DEFAULTS.items()):
        stages.setdefault(f"stage{stage}", {})[kind] = dict(values, max_steps=0, validation_every=VALIDATION_EVERY)
    return stages


@dataclass
class PipelineConfig:
    """Resolved pipeline settings; ``seed`` has no default."""
    seed: int
    paths: PathsConfig = field(default_factory=PathsConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    world: WorldSettings = field(default_factory=WorldSettings)
    corpus: CorpusSettings = field(default_factory=CorpusSettings)
    model: ModelConfig = field(default_factory=ModelConfig)
    stages: Dict[str, Dict[str, Dict[str, Any]]] = field(default_factory=_default_stages)
    negatives: NegativesConfig = field(default_factory=NegativesConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.backend.kind not in ("synthetic", "precomputed"):
            raise ConfigError(f"backend.kind must be 'synthetic' or 'precomputed', got {self.backend.kind!r}")
        if self.backend.kind == "precomputed" and not self.backend.image_table:
            raise ConfigError("backend.image_table is required when backend.kind is 'precomputed'")
        if self.backend.latent_dim > min(self.model.model_dim, self.backend.image_dim):
            raise ConfigError("backend.latent_dim must not exceed model.model_dim or backend.image_dim")
        for path, value in (
            ("backend.entity_count", self.backend.entity_count),
            ("model.model_dim", self.model.model_dim),
            ("model.heads", self.model.heads),
            ("model.ffn_dim", self.model.ffn_dim),
            ("corpus.passage_max_words", self.corpus.passage_max_words),
            ("negatives.depth", self.negatives.depth),
            ("eval.search_k", self.eval.search_k),
            ("eval.mrr_k", self.eval.mrr_k),
            ("eval.fisher_iterations", self.eval.fisher_iterations),
        ):
            if value < 1:
                raise ConfigError(f"{path} must be positive")
        if self.model.model_dim % self.model.heads:
            raise ConfigError("model.model_dim must be divisible by model.heads")
        if self.negatives.per_question < 0:
            raise ConfigError("negatives.per_question must be non-negative")
        if not 0.0 < self.eval.alpha_grid_step <= 0.5:
            raise ConfigError("eval.alpha_grid_step must be in (0, 0.5]")
        for name in ("split_ratios", "question_split_ratios"):
            ratios = getattr(self.corpus, name)
            if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
                raise ConfigError(f"corpus.{name} must be three non-negative numbers summing to 1")
        for stage_name, kinds in self.stages.items():
            if stage_name not in ("stage1", "stage2", "stage3"):
                raise ConfigError(f"stages.{stage_name} is not a stage; expected stage1, stage2 or stage3")
            for kind in kinds:
                # builds and validates the plan
                self.stage_plan(int(stage_name[-1]), kind)

    def stage_plan(self, stage: int, kind: str, **overrides):
        """``StagePlan`` for ``(stage, kind)`` with config values over recipe defaults."""
        from trainer.stages import StagePlan

        where = f"stages.stage{stage}.{kind}"
        values = dict(self.stages.get(f"stage{stage}", {}).get(kind, {}))
        values.setdefault("seed", self.seed)
        values.update(overrides)
        if "frozen_last_l" not in values:
            # recipe values count layers of a full-size tower
            recipe = STAGE_DEFAULTS.get((stage, kind), {}).get("frozen_last_l", 0)
            values["frozen_last_l"] = min(recipe, self.model.layers)
        try:
            # YAML 1.1 reads exponent floats without a dot ("2e-5") as strings
            for key in ("lr", "clip_norm"):
                if key in values:
                    values[key] = float(values[key])
            if (stage, kind) in STAGE_DEFAULTS:
                return StagePlan.defaults(stage, kind, **values)
            return StagePlan(stage=stage, kind=kind, **values)
        except TypeError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"{where}.{exc}") from exc

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the resolved configuration."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_seed(self, seed: int) -> "PipelineConfig":
        data = self.to_dict()
        data["seed"] = seed
        return config_from_dict(data)


_SECTIONS = {
    "paths": PathsConfig,
    "backend": BackendConfig,
    "world": WorldSettings,
    "corpus": CorpusSettings,
    "model": ModelConfig,
    "negatives": NegativesConfig,
    "eval": EvalConfig,
}


def _section(name: str, cls, raw: Any):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{name} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]} is not a known setting")
    values = {}
    for key, value in raw.items():
        if isinstance(getattr(cls(), key), tuple) and isinstance(value, list):
            value = tuple(value)
        values[key] = value
    return cls(**values)


def config_from_dict(data: Dict[str, Any]) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    if "seed" not in data or data["seed"] is None:
        raise ConfigError("seed is required")
    unknown = sorted(set(data) - set(_SECTIONS) - {"seed", "stages"})
    if unknown:
        raise ConfigError(f"{unknown[0]} is not a known section")
    stages = _default_stages()
    for stage_name, kinds in (data.get("stages") or {}).items():
        if not isinstance(kinds, dict):
            raise ConfigError(f"stages.{stage_name} must be a mapping of kind to plan")
        for kind, plan in kinds.items():
            if not isinstance(plan, dict):
                raise ConfigError(f"stages.{stage_name}.{kind} must be a mapping")
            stages.setdefault(stage_name, {}).setdefault(kind, {}).update(plan)
    sections = {name: _section(name, cls, data.get(name)) for name, cls in _SECTIONS.items()}
    return PipelineConfig(seed=data["seed"], stages=stages, **sections)


def load_config(path: Optional[Union[str, Path]] = None, seed: Optional[int] = None) -> PipelineConfig:
    """Read ``path`` (or the file named by ``MICT_CONFIG``); ``seed`` overrides the file's seed."""
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if not path:
        raise ConfigError(f"no config file given and {CONFIG_ENV_VAR} is not set")
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file {path} does not exist")
    with path.open("r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if seed is not None:
        data["seed"] = seed
    config = config_from_dict(data)
    logger.info("Loaded config %s (hash %s)", path, config.config_hash()[:12])
    return config
