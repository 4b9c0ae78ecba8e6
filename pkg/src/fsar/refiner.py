"""Semantic temporal prototype refiner.

Three stages refine the per-video frame features before prototype matching:

* semantic reweighting: a sigmoid gate from text/frame similarity scales
  each frame (support videos only; queries carry no label information),
* multi-stride causal refinement: each sampling stride is split into its
  offset sub-sequences, passed through a unidirectional state-space block,
  linearly upsampled back to F frames and averaged over offsets,
* bidirectional fusion: forward and (reversed) backward state-space passes
  are summed per stride, strides are fused with fixed weights, and a
  channel recalibration gate derived from the temporal mean is applied.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import val
from .errors import (
    ConfigurationError,
    DomainError,
    EmptySequenceError,
    InconsistencyError,
)
from .ssm import SSMConfig, init_tssm_params, tssm_block


@dataclass
class StprConfig:
    strides: tuple = (1, 2, 4)
    fuse_weights: tuple | None = None  # None -> uniform 1/|strides|
    recal_kernel: int = 3
    sgf_enabled_support: bool = True
    sgf_enabled_query: bool = False
    use_asd: bool = True
    use_acu: bool = True

    def __post_init__(self):
        self.strides = tuple(self.strides)
        if len(self.strides) != len(set(self.strides)) or min(self.strides) < 1:
            raise ConfigurationError(f"bad stride set {self.strides}")
        if self.recal_kernel % 2 == 0:
            raise ConfigurationError("recal_kernel must be odd")
        if self.fuse_weights is None:
            self.fuse_weights = tuple(1.0 / len(self.strides) for _ in self.strides)
        else:
            self.fuse_weights = tuple(float(w) for w in self.fuse_weights)
            if len(self.fuse_weights) != len(self.strides):
                raise ConfigurationError("one fuse weight per stride required")
            if abs(sum(self.fuse_weights) - 1.0) > 1e-9:
                raise ConfigurationError("fuse weights must sum to 1")

    def weight_for(self, w: int) -> float:
        return self.fuse_weights[self.strides.index(w)]


def init_stpr_params(cfg: StprConfig, ssm_cfg: SSMConfig,
                     rng: np.random.Generator) -> dict:
    """One unidirectional block per stride for the refinement stage and an
    independent (fwd, bwd) pair per stride for the bidirectional stage."""
    params = {"asd": {}, "acu": {}, "recal": np.zeros(cfg.recal_kernel)}
    for w in cfg.strides:
        params["asd"][f"w{w}"] = init_tssm_params(ssm_cfg, rng)
        params["acu"][f"w{w}"] = {
            "fwd": init_tssm_params(ssm_cfg, rng),
            "bwd": init_tssm_params(ssm_cfg, rng),
        }
    return params


def sgf_reweight(text_emb, frames):
    """Scale each frame by 1 + sigmoid(<text, frame>/sqrt(D)).

    ``text_emb`` must already be layer-normalized and belong to the video's
    own class; output keeps the residual copy of the input.
    """
    fv = val(frames)
    if fv.shape[0] == 0:
        raise EmptySequenceError("sgf_reweight needs at least one frame")
    d = fv.shape[1]
    scores = ad.mul(ad.matmul(frames, ad.reshape(text_emb, (d, 1))), d ** -0.5)
    gate = ad.sigmoid(scores)  # F x 1
    return ad.add(frames, ad.mul(gate, frames))


def asd_subsample(frames, w: int, o: int):
    """Rows o, o+w, o+2w, ... of the sequence; ceil((F-o)/w) of them."""
    F = val(frames).shape[0]
    if not (0 <= o < w):
        raise DomainError(f"offset {o} must satisfy 0 <= o < w={w}")
    if w > F:
        raise DomainError(f"stride {w} exceeds sequence length {F}")
    return ad.take(frames, np.arange(o, F, w))


def asd_refine(frames, sgf_out, w: int, tssm_params: dict, ssm_cfg: SSMConfig):
    """Offset-averaged causal refinement at one stride.

    Each offset sub-sequence is refined by the unidirectional block and
    upsampled back to F frames; the support branch adds the semantically
    reweighted features residually (pass ``sgf_out=None`` for queries).
    """
    F = val(frames).shape[0]
    acc = None
    for o in range(w):
        sub = asd_subsample(frames, w, o)
        up = ad.temporal_resample(tssm_block(sub, tssm_params, ssm_cfg), F)
        acc = up if acc is None else ad.add(acc, up)
    acc = ad.mul(acc, 1.0 / w)
    if sgf_out is not None:
        acc = ad.add(acc, sgf_out)
    return acc


def acu_bidirectional(x, fwd_params: dict, bwd_params: dict, ssm_cfg: SSMConfig):
    """Forward pass plus time-reversed backward pass, re-reversed and summed."""
    forward = tssm_block(x, fwd_params, ssm_cfg)
    backward = ad.reverse_rows(tssm_block(ad.reverse_rows(x), bwd_params, ssm_cfg))
    return ad.add(forward, backward)


def acu_fuse(bundle: dict, cfg: StprConfig):
    """Fixed-weight sum of the per-stride features."""
    out = None
    for w in cfg.strides:
        if w not in bundle:
            raise InconsistencyError(f"stride {w} missing from bundle")
        term = ad.mul(bundle[w], cfg.weight_for(w))
        out = term if out is None else ad.add(out, term)
    return out


def channel_recalibrate(x, kernel):
    """Gate channels by a conv over the temporal-mean descriptor.

    g = mean over frames (D,), a = sigmoid(conv1d(g, kernel)), out = x + x*a.
    """
    kv = val(kernel)
    d = val(x).shape[1]
    g = ad.tmean(x, axis=0)  # (D,)
    conv = ad.conv1d(ad.reshape(g, (d, 1)), ad.reshape(kernel, (kv.shape[0], 1, 1)))
    a = ad.sigmoid(ad.reshape(conv, (1, d)))
    return ad.add(x, ad.mul(x, a))


def _check_dims(videos, name):
    shapes = {val(v).shape for v in videos}
    if len(shapes) > 1:
        raise InconsistencyError(f"mixed {name} shapes: {shapes}")
    return shapes.pop()


def _refine_one(frames, sgf_out, cfg: StprConfig, ssm_cfg: SSMConfig, params: dict):
    base = sgf_out if sgf_out is not None else frames
    bundle = {}
    for w in cfg.strides:
        if cfg.use_asd:
            feat = asd_refine(base, sgf_out, w, params["asd"][f"w{w}"], ssm_cfg)
        else:
            feat = base
        if cfg.use_acu:
            p = params["acu"][f"w{w}"]
            feat = acu_bidirectional(feat, p["fwd"], p["bwd"], ssm_cfg)
        bundle[w] = feat
    fused = acu_fuse(bundle, cfg)
    if cfg.use_acu:
        fused = channel_recalibrate(fused, params["recal"])
    return fused


def stpr_forward(support_frames, support_class_embs, query_frames,
                 cfg: StprConfig, ssm_cfg: SSMConfig, params: dict):
    """Refine all support and query videos of an episode.

    Support videos are gated by their own (layer-normalized) class
    embedding when ``sgf_enabled_support`` is set; the query path never
    sees class information and skips the residual fusion of the support
    branch.  Returns (refined_supports, refined_queries).
    """
    if cfg.sgf_enabled_query:
        raise ConfigurationError(
            "semantic gating of queries would require query labels")
    shape = _check_dims(list(support_frames) + list(query_frames), "video")
    F = shape[0]
    if max(cfg.strides) >= F:
        raise ConfigurationError(
            f"strides {cfg.strides} must be < frame count {F}")
    if len(support_frames) != len(support_class_embs):
        raise InconsistencyError("one class embedding per support video required")

    refined_s = []
    for frames, emb in zip(support_frames, support_class_embs):
        sgf_out = sgf_reweight(emb, frames) if cfg.sgf_enabled_support else None
        refined_s.append(_refine_one(frames, sgf_out, cfg, ssm_cfg, params))
    refined_q = [_refine_one(frames, None, cfg, ssm_cfg, params)
                 for frames in query_frames]
    return refined_s, refined_q
