"""Model assembly: configuration, parameter initialization, toggles."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .attention import AttentionConfig, init_attention_params
from .errors import ConfigurationError
from .refiner import StprConfig, init_stpr_params
from .ssm import SSMConfig


@dataclass
class Toggles:
    """Module switches mirroring the ablation axes."""

    tcr: bool = True   # informative vs generic descriptor bank
    tsa: bool = True   # video-text contrastive term
    stpr: bool = True  # temporal refinement (off -> raw features)
    sgf: bool = True
    asd: bool = True
    acu: bool = True


@dataclass
class ModelSpec:
    dim: int = 64
    heads: int = 2
    state_dim: int = 16
    conv_kernel: int = 3
    expansion: int = 2
    strides: tuple = (1, 2, 4)
    recal_kernel: int = 3
    metric: str = "otam"
    otam_lambda: float = 0.1  # soft-min smoothing during training; 0 at eval
    alpha: float = 1.5
    toggles: Toggles = field(default_factory=Toggles)

    def __post_init__(self):
        if self.metric not in ("otam", "bimhm"):
            raise ConfigurationError(f"unknown metric {self.metric!r}")

    @property
    def ssm_config(self) -> SSMConfig:
        return SSMConfig(model_dim=self.dim, state_dim=self.state_dim,
                         conv_kernel=self.conv_kernel, expansion=self.expansion)

    @property
    def attention_config(self) -> AttentionConfig:
        return AttentionConfig(dim=self.dim, heads=self.heads)

    def stpr_config(self) -> StprConfig:
        return StprConfig(strides=self.strides,
                          recal_kernel=self.recal_kernel,
                          sgf_enabled_support=self.toggles.sgf,
                          use_asd=self.toggles.asd,
                          use_acu=self.toggles.acu)


def init_model(spec: ModelSpec, seed: int) -> dict:
    """All trainable parameters as a nested dict of float64 arrays."""
    rng = np.random.default_rng(seed)
    return {
        "stpr": init_stpr_params(spec.stpr_config(), spec.ssm_config, rng),
        "tsa": init_attention_params(spec.attention_config, rng),
    }
