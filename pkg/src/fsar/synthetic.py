"""Sparse-motif synthetic videos for desk-scale benchmarking.

Each "video" is an F x D frame-feature matrix: a smooth background
trajectory living in a shared low-dimensional subspace, plus a class
motif (a fixed random direction) injected into a short class-specific
phase window, plus i.i.d. Gaussian noise.  Classes differ only in their
(motif, phase) pair, so the decisive evidence is confined to a few frames.

Two text banks accompany a dataset: an informative one whose embeddings
are the noiseless motif signatures (standing in for descriptor text
embeddings) and a generic one with uninformative per-class directions
(standing in for plain name-template prompts).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attention import TextBank, TextEntry
from .errors import ConfigurationError

_BACKGROUND_RANK = 4


@dataclass
class SyntheticSpec:
    num_classes: int = 12
    videos_per_class: int = 12
    frames: int = 8
    dim: int = 64
    motif_len: int = 2
    # sigma 0.25 puts raw nearest-prototype 5-way 1-shot accuracy near 43%,
    # hard enough that refinement has headroom but far above chance; the
    # background stays small enough that the noiseless problem is separable
    noise_sigma: float = 0.25
    background_amp: float = 0.3

    def __post_init__(self):
        if self.num_classes < 2 or self.videos_per_class < 2:
            raise ConfigurationError("need >= 2 classes and >= 2 videos per class")
        if not (1 <= self.motif_len < self.frames):
            raise ConfigurationError(
                f"motif_len {self.motif_len} must be in [1, frames)")
        if self.noise_sigma < 0:
            raise ConfigurationError("noise_sigma must be >= 0")


@dataclass
class Video:
    video_id: int
    class_id: int
    features: np.ndarray  # F x D


@dataclass
class Dataset:
    videos: list
    class_ids: list
    informative_bank: TextBank
    generic_bank: TextBank
    spec: SyntheticSpec | None = None
    by_class: dict = field(init=False)

    def __post_init__(self):
        self.by_class = {c: [] for c in self.class_ids}
        for v in self.videos:
            self.by_class[v.class_id].append(v)

    @property
    def dim(self) -> int:
        return self.videos[0].features.shape[1]

    @property
    def frames(self) -> int:
        return self.videos[0].features.shape[0]


def _smooth_coeffs(rng, F, rank):
    """Random low-frequency trajectories on [0, 1), shape F x rank."""
    t = np.arange(F) / F
    coeffs = np.zeros((F, rank))
    for j in range(rank):
        amp = rng.normal(0.0, 1.0, size=2)
        phase = rng.uniform(0.0, 2 * np.pi, size=2)
        coeffs[:, j] = (amp[0] * np.sin(2 * np.pi * t + phase[0])
                        + amp[1] * np.sin(4 * np.pi * t + phase[1]))
    return coeffs


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """Deterministic dataset for a given (spec, seed)."""
    rng = np.random.default_rng(seed)
    F, D = spec.frames, spec.dim

    bg_basis = rng.normal(0.0, 1.0, size=(_BACKGROUND_RANK, D))
    bg_basis /= np.linalg.norm(bg_basis, axis=1, keepdims=True)

    motifs = rng.normal(0.0, 1.0, size=(spec.num_classes, D))
    motifs /= np.linalg.norm(motifs, axis=1, keepdims=True)
    phases = rng.integers(0, F - spec.motif_len, size=spec.num_classes,
                          endpoint=True)

    videos, vid = [], 0
    for c in range(spec.num_classes):
        for _ in range(spec.videos_per_class):
            bg = _smooth_coeffs(rng, F, _BACKGROUND_RANK) @ bg_basis
            feats = spec.background_amp * bg
            lo = phases[c]
            feats[lo:lo + spec.motif_len] += motifs[c]
            if spec.noise_sigma > 0:
                feats += rng.normal(0.0, spec.noise_sigma, size=(F, D))
            videos.append(Video(vid, c, feats))
            vid += 1

    informative = TextBank(
        entries=[TextEntry(c, f"action {c}: build-up, decisive motion in "
                              f"frames {phases[c]}-{phases[c] + spec.motif_len - 1},"
                              " follow-through", motifs[c].copy())
                 for c in range(spec.num_classes)],
        source="llm-generated")
    generic_dirs = rng.normal(0.0, 1.0, size=(spec.num_classes, D))
    generic_dirs /= np.linalg.norm(generic_dirs, axis=1, keepdims=True)
    generic = TextBank(
        entries=[TextEntry(c, f"a photo of action_{c}", generic_dirs[c])
                 for c in range(spec.num_classes)],
        source="template")

    return Dataset(videos, list(range(spec.num_classes)), informative, generic,
                   spec=spec)
