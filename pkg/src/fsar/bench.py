"""Wall-time scaling of the refiner versus a quadratic attention baseline.

Both measurements use the same computational granularity: the state-space
scan advances one python-level step per frame, so the attention baseline
computes its score matrix one (query, key) pair at a time.  The refiner is
expected to scale near-linearly in the frame count, the baseline
quadratically.
"""

from __future__ import annotations

import time

import numpy as np

from .model import ModelSpec, init_model
from .refiner import stpr_forward


def quadratic_attention_reference(x: np.ndarray) -> np.ndarray:
    """Plain softmax self-attention over F frames, pairwise scores."""
    F, D = x.shape
    scale = D ** -0.5
    scores = np.empty((F, F))
    for i in range(F):
        for j in range(F):
            scores[i, j] = float(x[i] @ x[j]) * scale
    scores -= scores.max(axis=1, keepdims=True)
    e = np.exp(scores)
    attn = e / e.sum(axis=1, keepdims=True)
    return attn @ x


def _time(fn, repeats: int) -> float:
    fn()  # warmup
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_scale_bench(frame_lengths, dim=64, seed=0, repeats=3) -> list:
    """Rows of (F, refiner seconds, attention-reference seconds)."""
    lengths = list(frame_lengths)
    if lengths != sorted(lengths):
        raise ValueError("frame lengths must be ascending")
    spec = ModelSpec(dim=dim)
    params = init_model(spec, seed)
    rng = np.random.default_rng(seed)
    emb = rng.normal(size=dim)
    rows = []
    for F in lengths:
        x = rng.normal(size=(F, dim))
        rows.append({
            "frames": F,
            "stpr_seconds": _time(
                lambda: stpr_forward([x], [emb], [], spec.stpr_config(),
                                     spec.ssm_config, params["stpr"]),
                repeats),
            "attention_seconds": _time(
                lambda: quadratic_attention_reference(x), repeats),
        })
    return rows


def loglog_slope(frames, seconds) -> float:
    """Least-squares slope of log(time) against log(F)."""
    return float(np.polyfit(np.log(np.asarray(frames, dtype=float)),
                            np.log(np.asarray(seconds, dtype=float)), 1)[0])
