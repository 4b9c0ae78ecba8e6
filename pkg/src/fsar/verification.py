"""Finite-difference verification suites shared by tests and the CLI."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .attention import (
    AttentionConfig,
    cross_attention,
    effective_tau,
    init_attention_params,
    video_text_loss,
)
from .episodic import run_episode, sample_episode
from .model import ModelSpec, init_model
from .ssm import SSMConfig, init_tssm_params, tssm_block
from .synthetic import SyntheticSpec, generate_synthetic

# module-level checks must come in below this; the end-to-end loss below 1e-4
MODULE_TOL = 1e-5
KERNEL_TOL = 1e-6
END_TO_END_TOL = 1e-4


def _weighted_sum(out, w):
    return ad.tsum(ad.mul(out, w))


def randomize_params(params: dict, rng: np.random.Generator, scale=0.3):
    """Add noise to every leaf so zero-initialized paths carry gradients."""
    for key, sub in params.items():
        if isinstance(sub, dict):
            randomize_params(sub, rng, scale)
        else:
            params[key] = np.asarray(sub + rng.normal(0.0, scale, size=sub.shape))
    return params


def check_kernel_ops(rng=None) -> dict:
    """Gradient checks for each differentiable kernel op in isolation."""
    rng = rng or np.random.default_rng(11)
    results = {}

    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    w = rng.normal(size=(3, 2))
    results["matmul"] = ad.grad_check(
        lambda p: _weighted_sum(ad.matmul(p["a"], p["b"]), w), {"a": a, "b": b})

    x = rng.normal(size=(3, 5))
    w2 = rng.normal(size=(3, 5))
    results["softmax"] = ad.grad_check(
        lambda p: _weighted_sum(ad.softmax(p["x"], axis=-1), w2), {"x": x})

    gain, bias = rng.normal(size=5), rng.normal(size=5)
    results["layer_norm"] = ad.grad_check(
        lambda p: _weighted_sum(ad.layer_norm(p["x"], p["gain"], p["bias"]), w2),
        {"x": x.copy(), "gain": gain, "bias": bias})

    xr = rng.normal(size=(3, 4))
    wr = rng.normal(size=(8, 4))
    results["temporal_resample"] = ad.grad_check(
        lambda p: _weighted_sum(ad.temporal_resample(p["x"], 8), wr), {"x": xr})

    xc = rng.normal(size=(6, 2))
    kc = rng.normal(size=(3, 2, 3))
    wc = rng.normal(size=(6, 3))
    results["conv1d"] = ad.grad_check(
        lambda p: _weighted_sum(ad.conv1d(p["x"], p["k"]), wc),
        {"x": xc, "k": kc})

    xd = rng.normal(size=(6, 3))
    kd = rng.normal(size=(3, 3))
    wd = rng.normal(size=(6, 3))
    results["causal_depthwise_conv"] = ad.grad_check(
        lambda p: _weighted_sum(ad.causal_depthwise_conv(p["x"], p["k"]), wd),
        {"x": xd, "k": kd})
    return results


def check_tssm(rng=None) -> float:
    rng = rng or np.random.default_rng(12)
    cfg = SSMConfig(model_dim=4, state_dim=3, conv_kernel=3, expansion=2)
    params = randomize_params(init_tssm_params(cfg, rng), rng)
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 4))
    return ad.grad_check(
        lambda p: _weighted_sum(tssm_block(x, p, cfg), w), params,
        max_coords=6, rng=rng)


def check_attention(rng=None) -> float:
    rng = rng or np.random.default_rng(13)
    cfg = AttentionConfig(dim=8, heads=2)
    params = init_attention_params(cfg, rng)
    class_embs = rng.normal(size=(3, 8))
    frames = rng.normal(size=(4, 8))

    def loss(p):
        v_enh = cross_attention(class_embs, frames, p, cfg)
        return video_text_loss(v_enh, class_embs, effective_tau(p["log_tau"]))

    return ad.grad_check(loss, params, max_coords=8, rng=rng)


def micro_episode_setup(seed=21):
    """A 2-way 1-shot micro problem (F=4, D=8) for end-to-end checks."""
    spec = ModelSpec(dim=8, heads=2, state_dim=4, strides=(1, 2),
                     otam_lambda=0.1)
    data_spec = SyntheticSpec(num_classes=3, videos_per_class=3, frames=4,
                              dim=8, motif_len=1, noise_sigma=0.3)
    dataset = generate_synthetic(data_spec, seed)
    rng = np.random.default_rng(seed)
    episode = sample_episode(dataset, way=2, shot=1, queries=2, rng=rng)
    params = init_model(spec, seed)
    randomize_params(params, np.random.default_rng(seed + 1), scale=0.2)
    return spec, episode, params


def check_end_to_end(seed=21, metric="otam") -> float:
    spec, episode, params = micro_episode_setup(seed)
    spec.metric = metric

    def loss(p):
        return run_episode(p, episode, spec, mode="train").loss

    return ad.grad_check(loss, params, max_coords=3,
                         rng=np.random.default_rng(seed))


def full_suite() -> dict:
    """All gradient checks with their tolerances: name -> (err, tol)."""
    out = {}
    for name, err in check_kernel_ops().items():
        out[f"kernel/{name}"] = (err, KERNEL_TOL)
    out["tssm_block"] = (check_tssm(), MODULE_TOL)
    out["attention+infonce"] = (check_attention(), MODULE_TOL)
    out["end_to_end/otam"] = (check_end_to_end(metric="otam"), END_TO_END_TOL)
    out["end_to_end/bimhm"] = (check_end_to_end(metric="bimhm"), END_TO_END_TOL)
    return out
