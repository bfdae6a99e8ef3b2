"""Configuration module."""

from .settings import (
    PROJECT_NAME, PROJECT_VERSION, PROJECT_SUBTITLE, CONFIG_ENV_VAR,
    STAGE_DEFAULTS, METRIC_KS, SIGNIFICANCE_LEVEL, COLORS,
)
from .loader import (
    ConfigError, MissingInputError,
    PathsConfig, BackendConfig, WorldSettings, CorpusSettings, ModelConfig, NegativesConfig, EvalConfig,
    PipelineConfig, config_from_dict, load_config,
)

__all__ = [
    "PROJECT_NAME", "PROJECT_VERSION", "PROJECT_SUBTITLE", "CONFIG_ENV_VAR",
    "STAGE_DEFAULTS", "METRIC_KS", "SIGNIFICANCE_LEVEL", "COLORS",
    "ConfigError", "MissingInputError",
    "PathsConfig", "BackendConfig", "WorldSettings", "CorpusSettings", "ModelConfig", "NegativesConfig", "EvalConfig",
    "PipelineConfig", "config_from_dict", "load_config",
]
