"""Run configuration: one JSON document, strictly validated."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigurationError
from .model import ModelSpec, Toggles
from .synthetic import SyntheticSpec

STRIDE_GRID_DEFAULT = [[1], [2], [4], [1, 2], [1, 4], [2, 4], [1, 2, 4]]


def _from_dict(cls, data: dict, path: str):
    """Instantiate a flat dataclass from a dict, rejecting unknown keys."""
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigurationError(f"unknown keys under '{path}': {sorted(unknown)}")
    return cls(**data)


@dataclass
class DatasetConfig:
    source: str = "synthetic"        # synthetic | file
    feature_file: str | None = None
    seed: int = 1234
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)

    def validate(self):
        if self.source not in ("synthetic", "file"):
            raise ConfigurationError(f"unknown dataset source {self.source!r}")
        if self.source == "file" and not self.feature_file:
            raise ConfigurationError("dataset.feature_file required for source=file")


@dataclass
class ProtocolConfig:
    way: int = 5
    shot: int = 1
    queries: int = 5
    tasks: int = 1000
    eval_seed: int = 7777


@dataclass
class TrainingConfig:
    episodes: int = 2000
    lr: float = 1e-4
    alpha: float = 1.5
    seed: int = 0
    otam_lambda: float = 0.1
    milestones: list = field(default_factory=lambda: [0.6, 0.8])


@dataclass
class ModelConfig:
    dim: int = 64
    heads: int = 2
    state_dim: int = 16
    conv_kernel: int = 3
    expansion: int = 2
    strides: list = field(default_factory=lambda: [1, 2, 4])
    recal_kernel: int = 3


@dataclass
class AblateConfig:
    axis: str = "strides"            # strides | modules
    stride_grid: list = field(default_factory=lambda: [list(g) for g
                                                       in STRIDE_GRID_DEFAULT])
    toggle_grid: list = field(default_factory=list)


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    toggles: Toggles = field(default_factory=Toggles)
    ablate: AblateConfig = field(default_factory=AblateConfig)
    metric: str = "otam"
    output_dir: str = "runs/out"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        allowed = {f.name for f in fields(cls)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigurationError(f"unknown top-level keys: {sorted(unknown)}")
        cfg = cls()
        if "dataset" in data:
            d = dict(data["dataset"])
            synth = d.pop("synthetic", None)
            cfg.dataset = _from_dict(DatasetConfig, d, "dataset")
            if synth is not None:
                cfg.dataset.synthetic = _from_dict(SyntheticSpec, synth,
                                                   "dataset.synthetic")
        if "protocol" in data:
            cfg.protocol = _from_dict(ProtocolConfig, data["protocol"], "protocol")
        if "training" in data:
            cfg.training = _from_dict(TrainingConfig, data["training"], "training")
        if "model" in data:
            cfg.model = _from_dict(ModelConfig, data["model"], "model")
        if "toggles" in data:
            cfg.toggles = _from_dict(Toggles, data["toggles"], "toggles")
        if "ablate" in data:
            cfg.ablate = _from_dict(AblateConfig, data["ablate"], "ablate")
        cfg.metric = data.get("metric", cfg.metric)
        cfg.output_dir = data.get("output_dir", cfg.output_dir)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"{path}: invalid JSON ({e})") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def validate(self):
        self.dataset.validate()
        if self.metric not in ("otam", "bimhm"):
            raise ConfigurationError(f"unknown metric {self.metric!r}")
        self.model_spec()  # shape checks live in the component configs

    def to_dict(self) -> dict:
        return asdict(self)

    def model_spec(self) -> ModelSpec:
        m = self.model
        return ModelSpec(dim=m.dim, heads=m.heads, state_dim=m.state_dim,
                         conv_kernel=m.conv_kernel, expansion=m.expansion,
                         strides=tuple(m.strides), recal_kernel=m.recal_kernel,
                         metric=self.metric,
                         otam_lambda=self.training.otam_lambda,
                         alpha=self.training.alpha,
                         toggles=Toggles(**vars(self.toggles)))
