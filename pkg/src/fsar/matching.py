"""Prototype construction and temporal distances between frame sequences.

Two metrics share a cosine frame-cost substrate: an ordered monotonic
alignment DP (OTAM-style, with relaxed boundary columns and optional
soft-min smoothing for differentiability) and a bidirectional mean
Hausdorff distance (Bi-MHM).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .attention import _row_normalize
from .autodiff import val
from .errors import DomainError, EmptySequenceError, InconsistencyError

_BIG = 1e30


@dataclass
class Prototype:
    class_id: int
    feature: object  # F x D tensor (ndarray or Node)


def build_prototypes(refined_supports):
    """Frame-wise mean of the refined supports, grouped by class.

    ``refined_supports`` is a list of (class_id, F x D feature); every class
    must contribute the same number of entries.  Order follows first
    appearance of each class.
    """
    grouped: dict = {}
    order = []
    for class_id, feat in refined_supports:
        if class_id not in grouped:
            grouped[class_id] = []
            order.append(class_id)
        grouped[class_id].append(feat)
    counts = {len(v) for v in grouped.values()}
    if len(counts) > 1:
        raise InconsistencyError(f"unequal support counts per class: {counts}")
    protos = []
    for class_id in order:
        feats = grouped[class_id]
        acc = feats[0]
        for f in feats[1:]:
            acc = ad.add(acc, f)
        protos.append(Prototype(class_id, ad.mul(acc, 1.0 / len(feats))))
    return protos


def frame_cost(q, p):
    """Pairwise cost matrix C[i, j] = 1 - cos(q_i, p_j)."""
    sim = ad.matmul(_row_normalize(q), ad.transpose(_row_normalize(p)))
    return ad.sub(1.0, sim)


def _pair_min(a, b, lam: float):
    if lam == 0.0:
        return ad.where(val(a) <= val(b), a, b)
    return ad.mul(-lam, ad.logaddexp(ad.div(ad.mul(a, -1.0), lam),
                                     ad.div(ad.mul(b, -1.0), lam)))


def _otam_dp_batch(costs, lam: float):
    """One-directional alignment DP over a batch of cost matrices.

    ``costs`` has shape B x F_q x F_p.  Support columns are padded with a
    zero-cost column on each side so the alignment may start and end at any
    support frame.  Transitions into a cell are diagonal (advance both) or
    horizontal (advance support only); every path starts at (0, 0) and ends
    at (F_q - 1, F_p + 1) of the padded matrix.  Returns the raw path cost,
    shape (B,).
    """
    B, Fq, Fp = val(costs).shape
    padded = ad.pad_axis(costs, 2, 1, 1)
    cols = Fp + 2
    big = np.full(B, _BIG)
    prev = None
    for i in range(Fq):
        cur = []
        for j in range(cols):
            c = ad.take(padded, (slice(None), i, j))
            if i == 0:
                cur.append(c if j == 0 else ad.add(c, cur[j - 1]))
            elif j == 0:
                cur.append(big)
            else:
                cur.append(ad.add(c, _pair_min(prev[j - 1], cur[j - 1], lam)))
        prev = cur
    return prev[-1]


def otam_distance_batch(costs, lam: float = 0.0):
    """Bidirectional, per-frame-normalized alignment distance, shape (B,)."""
    shape = val(costs).shape
    if len(shape) != 3 or shape[1] == 0 or shape[2] == 0:
        raise EmptySequenceError(f"need B x F_q x F_p costs, got {shape}")
    if lam < 0:
        raise DomainError("smoothing must be >= 0")
    _, Fq, Fp = shape
    fwd = ad.div(_otam_dp_batch(costs, lam), float(Fq))
    costs_t = ad.stack([ad.transpose(ad.take(costs, b)) for b in range(shape[0])])
    bwd = ad.div(_otam_dp_batch(costs_t, lam), float(Fp))
    return ad.mul(ad.add(fwd, bwd), 0.5)


def otam_distance(cost, lam: float = 0.0):
    """Alignment distance for a single F_q x F_p cost matrix."""
    cv = val(cost)
    if cv.ndim != 2:
        raise EmptySequenceError(f"expected a 2-D cost matrix, got {cv.shape}")
    batched = ad.reshape(cost, (1,) + cv.shape)
    out = otam_distance_batch(batched, lam)
    return ad.take(out, 0)


def bimhm_distance_batch(costs):
    """Bidirectional mean Hausdorff over a batch of cost matrices, (B,)."""
    row_term = ad.tmean(ad.reduce_min(costs, axis=2), axis=1)
    col_term = ad.tmean(ad.reduce_min(costs, axis=1), axis=1)
    return ad.add(row_term, col_term)


def bimhm_distance(cost):
    """(1/F_q) sum_i min_j C[i,j] + (1/F_p) sum_j min_i C[i,j]."""
    cv = val(cost)
    if cv.ndim != 2:
        raise EmptySequenceError(f"expected a 2-D cost matrix, got {cv.shape}")
    out = bimhm_distance_batch(ad.reshape(cost, (1,) + cv.shape))
    return ad.take(out, 0)


def episode_probs(distances):
    """softmax(-d): class probabilities of one query over the N prototypes."""
    return ad.softmax(ad.mul(distances, -1.0), axis=-1)


def predict(distances) -> int:
    """Nearest prototype; ties resolve to the lowest class index."""
    return int(np.argmin(val(distances)))


def total_loss(probs, labels, vt_loss, alpha: float):
    """Joint objective: video-text loss plus alpha * mean query cross-entropy.

    ``probs`` is P x N (one probability row per query), ``labels`` the
    per-query class indices.
    """
    pv = val(probs)
    P, N = pv.shape
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() >= N:
        raise DomainError(f"labels out of range [0, {N})")
    picked = ad.take(probs, (np.arange(P), labels))
    ce = ad.mul(ad.tmean(ad.log(picked)), -1.0)
    return ad.add(vt_loss, ad.mul(ce, alpha))
