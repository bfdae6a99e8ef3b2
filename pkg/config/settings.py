"""Configuration settings for the multimodal ICT retrieval toolkit."""

# Project metadata
PROJECT_NAME = "mict-retrieval"
PROJECT_VERSION = "1.0.0"
PROJECT_SUBTITLE = "Multimodal inverse cloze pre-training for visual passage retrieval"

# Environment variable holding the default config path
CONFIG_ENV_VAR = "MICT_CONFIG"

# Corpus
TITLE_SEPARATOR = " [SEP] "
PASSAGE_MAX_WORDS = 100
IMAGE_FORMAT_ALLOWLIST = frozenset({"jpeg", "png", "gif", "bmp", "webp"})
IMAGE_FORMAT_ALIASES = {"jpg": "jpeg", "jpe": "jpeg", "tif": "tiff", "svgz": "svg"}

# Multimodal ICT
ICT_LEAVE_IN_PROB = 0.10
ICT_CONTEXT_SENTENCES = 4
ICT_MIN_SENTENCES = 2
SPLIT_RATIOS = (0.9, 0.05, 0.05)

# Optimisation
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
GRAD_CLIP_NORM = 2.0
DROPOUT_PROB = 0.1
LAYER_NORM_EPS = 1e-12
INIT_STD = 0.02
VALIDATION_EVERY = 50

# Stage defaults keyed by (stage, kind)
STAGE_DEFAULTS = {
    (1, "text"): {"batch_size": 128, "lr": 2e-5, "schedule": "linear_warmup", "warmup_steps": 100, "frozen_last_l": 0},
    (2, "eca"): {"batch_size": 512, "lr": 2e-5, "schedule": "linear_warmup", "warmup_steps": 100, "frozen_last_l": 6},
    (2, "ilf"): {"batch_size": 512, "lr": 2e-3, "schedule": "constant", "warmup_steps": 0, "frozen_last_l": 12},
    (3, "text"): {"batch_size": 298, "lr": 2e-5, "schedule": "linear_warmup", "warmup_steps": 4, "frozen_last_l": 0},
    (3, "eca"): {"batch_size": 298, "lr": 2e-5, "schedule": "linear_warmup", "warmup_steps": 4, "frozen_last_l": 0},
    (3, "ilf"): {"batch_size": 298, "lr": 2e-5, "schedule": "linear_warmup", "warmup_steps": 4, "frozen_last_l": 0},
}

# Transformer (desk scale)
TRANSFORMER_DEFAULTS = {
    "layers": 2,
    "model_dim": 32,
    "heads": 4,
    "ffn_dim": 64,
    "dropout_prob": DROPOUT_PROB,
    "max_seq": 128,
}

# Synthetic backend
SYNTHETIC_DEFAULTS = {
    "entity_count": 50,
    "latent_dim": 16,
    "text_dim": 32,
    "image_dim": 48,
    "noise_sigma": 0.05,
}

# Encoder memo bounds (entries)
ENCODER_CACHE_SIZE = 50_000
WORD_CACHE_SIZE = 200_000

# Retrieval
BM25_K1 = 0.9
BM25_B = 0.4
ALPHA_GRID_STEP = 0.01

# Evaluation
METRIC_KS = {"mrr": 100, "precision": (1, 20), "hits": (20,)}
SIGNIFICANCE_LEVEL = 0.01
FISHER_ITERATIONS = 100_000
FISHER_EXACT_MAX_N = 12

# Chart colors
COLORS = {
    "primary": "#D4AF37",      # Gold
    "secondary": "#2E4A3F",    # Dark green
    "accent": "#8B4513",       # Saddle brown
    "background": "#1A1A1A",   # Near black
    "text": "#E8E8E8",         # Light gray
    "muted": "#888888",        # Muted gray
    "text_only": "#DC143C",    # Crimson
    "eca": "#228B22",          # Forest green
    "ilf": "#4169E1",          # Royal blue
    "late": "#9932CC",         # Purple
}
