"""Few-shot action recognition on frame features.

A desk-scale, fully verifiable pipeline: semantic-guided state-space
temporal refinement, frame-level cross-modal attention with a contrastive
alignment loss, prototype matching under temporal-alignment metrics, and
an episodic N-way K-shot training/evaluation harness, all built on a
numpy tape-based reverse-mode differentiation kernel.
"""

from . import autodiff
from .attention import (
    AttentionConfig,
    TextBank,
    TextEntry,
    cross_attention,
    video_text_loss,
)
from .config import RunConfig
from .episodic import (
    Episode,
    EvalReport,
    TrainConfig,
    evaluate,
    run_episode,
    sample_episode,
    train,
)
from .errors import FsarError
from .matching import (
    bimhm_distance,
    build_prototypes,
    episode_probs,
    frame_cost,
    otam_distance,
    predict,
    total_loss,
)
from .model import ModelSpec, Toggles, init_model
from .refiner import StprConfig, stpr_forward
from .ssm import SSMConfig, discretize_zoh, ssm_scan, tssm_block
from .synthetic import SyntheticSpec, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AttentionConfig", "Episode", "EvalReport", "FsarError", "ModelSpec",
    "RunConfig", "SSMConfig", "StprConfig", "SyntheticSpec", "TextBank",
    "TextEntry", "Toggles", "TrainConfig", "autodiff", "bimhm_distance",
    "build_prototypes", "cross_attention", "discretize_zoh", "episode_probs",
    "evaluate", "frame_cost", "generate_synthetic", "init_model",
    "otam_distance", "predict", "run_episode", "sample_episode", "ssm_scan",
    "stpr_forward", "total_loss", "train", "tssm_block", "video_text_loss",
]
