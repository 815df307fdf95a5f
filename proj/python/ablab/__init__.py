"""Concept ablation on a synthetic conditional diffusion model."""

from ._core import (
    Config,
    ConfigError,
    Denoiser,
    Vocabulary,
    __version__,
    alignment_score,
    gradcheck,
    load_checkpoint,
    run_pipeline,
    sample_ground_truth,
    save_checkpoint,
)

__all__ = [
    "Config",
    "ConfigError",
    "Denoiser",
    "Vocabulary",
    "__version__",
    "alignment_score",
    "gradcheck",
    "load_checkpoint",
    "run_pipeline",
    "sample_ground_truth",
    "save_checkpoint",
]
