"""Frame-level cross-modal attention and the video-text contrastive loss.

Class descriptor embeddings act as attention queries over the frames of a
video; the class-conditioned summaries are then pulled toward their own
descriptor (and pushed from the others) by an InfoNCE objective with a
learnable temperature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import val
from .errors import ConfigurationError, EmptySequenceError, InconsistencyError

TAU_FLOOR = 1e-3


@dataclass
class AttentionConfig:
    dim: int
    heads: int = 2

    def __post_init__(self):
        if self.heads < 1 or self.dim % self.heads != 0:
            raise ConfigurationError(
                f"heads ({self.heads}) must divide dim ({self.dim})")

    @property
    def head_dim(self) -> int:
        return self.dim // self.heads


@dataclass
class TextEntry:
    class_id: int
    text: str
    embedding: np.ndarray


@dataclass
class TextBank:
    """Class descriptors: id, text, and a D-dim embedding per class."""

    entries: list = field(default_factory=list)
    source: str = "template"  # template | llm-generated

    def __post_init__(self):
        ids = [e.class_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise InconsistencyError("duplicate class_id in text bank")
        dims = {e.embedding.shape for e in self.entries}
        if len(dims) > 1:
            raise InconsistencyError(f"mixed embedding dims in text bank: {dims}")
        for e in self.entries:
            if not np.all(np.isfinite(e.embedding)):
                raise InconsistencyError(f"non-finite embedding for class {e.class_id}")

    def embedding_for(self, class_id: int) -> np.ndarray:
        for e in self.entries:
            if e.class_id == class_id:
                return e.embedding
        raise InconsistencyError(f"class {class_id} not in text bank")


def init_attention_params(cfg: AttentionConfig, rng: np.random.Generator) -> dict:
    D = cfg.dim
    scale = D ** -0.5

    def w():
        return rng.normal(0.0, scale, size=(D, D))

    return {
        "wq": w(), "bq": np.zeros(D),
        "wk": w(), "bk": np.zeros(D),
        "wv": w(), "bv": np.zeros(D),
        "wo": w(), "bo": np.zeros(D),
        "log_tau": np.array(np.log(0.07)),
    }


def _concat_cols(parts):
    return ad.transpose(ad.concat_rows([ad.transpose(p) for p in parts]))


def cross_attention(class_embs, frames, params: dict, cfg: AttentionConfig):
    """Multi-head attention: queries = class embeddings, keys/values = frames.

    Returns an M x D matrix whose row i is the class-i-conditioned summary
    of the video.
    """
    M, F = val(class_embs).shape[0], val(frames).shape[0]
    if M < 1 or F < 1:
        raise EmptySequenceError("cross_attention needs >= 1 class and frame")
    q = ad.add(ad.matmul(class_embs, params["wq"]), params["bq"])
    k = ad.add(ad.matmul(frames, params["wk"]), params["bk"])
    v = ad.add(ad.matmul(frames, params["wv"]), params["bv"])

    dh = cfg.head_dim
    heads = []
    for h in range(cfg.heads):
        cols = (slice(None), slice(h * dh, (h + 1) * dh))
        qh, kh, vh = ad.take(q, cols), ad.take(k, cols), ad.take(v, cols)
        scores = ad.mul(ad.matmul(qh, ad.transpose(kh)), dh ** -0.5)
        attn = ad.softmax(scores, axis=-1)  # M x F, rows sum to 1
        heads.append(ad.matmul(attn, vh))
    out = _concat_cols(heads)
    return ad.add(ad.matmul(out, params["wo"]), params["bo"])


def _row_normalize(x):
    norms = ad.sqrt(ad.tsum(ad.square(x), axis=-1, keepdims=True))
    return ad.div(x, ad.clip_min(norms, 1e-8))


def cosine_matrix(a, b):
    """Pairwise cosine similarities between rows of a and rows of b."""
    return ad.matmul(_row_normalize(a), ad.transpose(_row_normalize(b)))


def video_text_loss(v_enh, class_embs, tau):
    """InfoNCE over class-conditioned video summaries, diagonal positives."""
    M = val(v_enh).shape[0]
    if M == 0:
        raise EmptySequenceError("video_text_loss needs at least one class")
    logits = ad.div(cosine_matrix(v_enh, class_embs), tau)
    # stable log-softmax with a detached row max
    row_max = val(logits).max(axis=1, keepdims=True)
    lse = ad.add(ad.log(ad.tsum(ad.exp(ad.sub(logits, row_max)),
                                axis=1, keepdims=True)), row_max)
    diag = (np.arange(M), np.arange(M))
    per_row = ad.sub(ad.reshape(lse, (M,)), ad.take(logits, diag))
    return ad.tmean(per_row)


def effective_tau(log_tau):
    """Temperature from its log-space parameter, floored for stability."""
    return ad.clip_min(ad.exp(log_tau), TAU_FLOOR)
