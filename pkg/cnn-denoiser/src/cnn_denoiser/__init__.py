"""Colored-noise CNN denoiser: dataset builder, trainer, and bridge server."""

from .dataset import (
    CANONICAL_RANGES,
    DEFAULT_PATCH_COUNT,
    NUM_BANDS,
    PATCH_SIZE,
    NoiseRangeSpec,
    PatchDataset,
    build_patch_dataset,
    synthesize_colored_noise,
)
from .model import ColoredDnCNN, denoise_image
from .server import DenoiserService, serve_denoiser
from .training import ModelArtifact, train_colored_dncnn

__version__ = "0.1.0"

__all__ = [
    "CANONICAL_RANGES",
    "ColoredDnCNN",
    "DEFAULT_PATCH_COUNT",
    "DenoiserService",
    "ModelArtifact",
    "NUM_BANDS",
    "NoiseRangeSpec",
    "PATCH_SIZE",
    "PatchDataset",
    "build_patch_dataset",
    "denoise_image",
    "serve_denoiser",
    "synthesize_colored_noise",
    "train_colored_dncnn",
]
