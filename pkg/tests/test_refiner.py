"""Temporal refiner: gating, multi-stride refinement, bidirectional fusion,
and the composed support/query paths."""

import numpy as np
import pytest

from fsar import autodiff as ad
from fsar.errors import ConfigurationError, DomainError, InconsistencyError
from fsar.refiner import (
    StprConfig,
    acu_bidirectional,
    acu_fuse,
    asd_refine,
    asd_subsample,
    channel_recalibrate,
    init_stpr_params,
    sgf_reweight,
    stpr_forward,
)
from fsar.ssm import SSMConfig, init_tssm_params, tssm_block

CFG = SSMConfig(model_dim=8, state_dim=3, conv_kernel=3, expansion=2)


def _passthrough_params(rng):
    # init keeps out_proj at zero, so the block is the identity
    return init_tssm_params(CFG, rng)


def _active_params(rng):
    p = init_tssm_params(CFG, rng)
    for k in p:
        p[k] = p[k] + rng.normal(0.0, 0.3, size=p[k].shape)
    return p


# ---------------------------------------------------------------------------
# semantic gating


def test_sgf_zero_text_gives_constant_gate():
    rng = np.random.default_rng(0)
    frames = rng.normal(size=(4, 8))
    out = sgf_reweight(np.zeros(8), frames)
    assert np.allclose(out, 1.5 * frames, atol=1e-15)


def test_sgf_zero_frames():
    out = sgf_reweight(np.ones(8), np.zeros((4, 8)))
    assert np.array_equal(out, np.zeros((4, 8)))


def test_sgf_matches_per_frame_oracle():
    rng = np.random.default_rng(1)
    text = rng.normal(size=8)
    frames = rng.normal(size=(4, 8))
    out = sgf_reweight(text, frames)
    for f in range(4):
        gate = 1.0 / (1.0 + np.exp(-(text @ frames[f]) / np.sqrt(8)))
        assert np.max(np.abs(out[f] - (1 + gate) * frames[f])) < 1e-12


# ---------------------------------------------------------------------------
# strided subsampling


def test_subsample_full_rate_is_identity():
    x = np.random.default_rng(2).normal(size=(8, 3))
    assert np.array_equal(asd_subsample(x, 1, 0), x)


@pytest.mark.parametrize("o,rows", [(1, [1, 5]), (3, [3, 7])])
def test_subsample_stride_four(o, rows):
    x = np.arange(8.0)[:, None]
    out = asd_subsample(x, 4, o)
    assert out[:, 0].tolist() == rows


@pytest.mark.parametrize("F", [8, 16])
@pytest.mark.parametrize("w", [1, 2, 4])
def test_subsample_offsets_partition_frames(F, w):
    x = np.arange(float(F))[:, None]
    seen = []
    for o in range(w):
        sub = asd_subsample(x, w, o)
        assert sub.shape[0] == -(-(F - o) // w)  # ceil
        seen.extend(int(v) for v in sub[:, 0])
    assert sorted(seen) == list(range(F))


def test_subsample_bad_offset():
    with pytest.raises(DomainError):
        asd_subsample(np.zeros((8, 2)), 2, 2)
    with pytest.raises(DomainError):
        asd_subsample(np.zeros((3, 2)), 4, 0)


# ---------------------------------------------------------------------------
# strided refinement


def test_asd_refine_passthrough_identity():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(8, 8))
    out = asd_refine(x, None, 1, _passthrough_params(rng), CFG)
    assert np.array_equal(out, x)


def test_asd_refine_constant_rows_survive_interpolation():
    rng = np.random.default_rng(4)
    row = rng.normal(size=8)
    x = np.tile(row, (8, 1))
    out = asd_refine(x, None, 2, _passthrough_params(rng), CFG)
    assert np.max(np.abs(out - x)) < 1e-12


def test_asd_refine_compositional_oracle():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(8, 8))
    sgf_out = rng.normal(size=(8, 8))
    params = _active_params(rng)
    w = 4
    want = np.zeros_like(x)
    for o in range(w):
        sub = asd_subsample(x, w, o)
        want += ad.temporal_resample(tssm_block(sub, params, CFG), 8)
    want = want / w + sgf_out
    got = asd_refine(x, sgf_out, w, params, CFG)
    assert np.max(np.abs(got - want)) < 1e-12


def test_asd_refine_query_branch_skips_residual():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(8, 8))
    params = _active_params(rng)
    with_res = asd_refine(x, np.zeros_like(x), 2, params, CFG)
    without = asd_refine(x, None, 2, params, CFG)
    assert np.array_equal(with_res, without)


# ---------------------------------------------------------------------------
# bidirectional fusion


def test_acu_passthrough_doubles():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(6, 8))
    out = acu_bidirectional(x, _passthrough_params(rng),
                            _passthrough_params(rng), CFG)
    assert np.allclose(out, 2 * x, atol=1e-15)


def test_acu_reversal_equivariance_with_tied_params():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(6, 8))
    params = _active_params(rng)
    lhs = acu_bidirectional(x[::-1].copy(), params, params, CFG)
    rhs = acu_bidirectional(x, params, params, CFG)[::-1]
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_acu_two_branch_oracle():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(6, 8))
    fwd, bwd = _active_params(rng), _active_params(rng)
    want = (tssm_block(x, fwd, CFG)
            + tssm_block(x[::-1].copy(), bwd, CFG)[::-1])
    got = acu_bidirectional(x, fwd, bwd, CFG)
    assert np.max(np.abs(got - want)) < 1e-12


def test_acu_fuse_single_stride_identity():
    cfg = StprConfig(strides=(2,))
    x = np.random.default_rng(10).normal(size=(4, 3))
    assert np.array_equal(acu_fuse({2: x}, cfg), x)


def test_acu_fuse_uniform_weighted_sum():
    rng = np.random.default_rng(11)
    cfg = StprConfig(strides=(1, 2, 4))
    bundle = {w: rng.normal(size=(4, 3)) for w in (1, 2, 4)}
    want = sum(bundle.values()) / 3.0
    assert np.max(np.abs(acu_fuse(bundle, cfg) - want)) < 1e-12


def test_acu_fuse_missing_stride():
    cfg = StprConfig(strides=(1, 2))
    with pytest.raises(InconsistencyError):
        acu_fuse({1: np.zeros((4, 3))}, cfg)


# ---------------------------------------------------------------------------
# recalibration


def test_recalibrate_zero_input():
    assert np.array_equal(channel_recalibrate(np.zeros((4, 8)), np.zeros(3)),
                          np.zeros((4, 8)))


def test_recalibrate_zero_kernel_forces_half_gate():
    x = np.random.default_rng(12).normal(size=(4, 8))
    assert np.allclose(channel_recalibrate(x, np.zeros(3)), 1.5 * x,
                       atol=1e-15)


def test_recalibrate_direct_oracle():
    rng = np.random.default_rng(13)
    x = rng.normal(size=(4, 8))
    kernel = rng.normal(size=3)
    g = x.mean(axis=0)
    gp = np.concatenate([[0.0], g, [0.0]])
    conv = np.array([gp[d:d + 3] @ kernel for d in range(8)])
    want = x + x / (1.0 + np.exp(-conv))
    got = channel_recalibrate(x, kernel)
    assert np.max(np.abs(got - want)) < 1e-12


# ---------------------------------------------------------------------------
# composed refiner


def _micro_inputs(rng, n_support=2, n_query=2, F=8, D=8):
    supports = [rng.normal(size=(F, D)) for _ in range(n_support)]
    queries = [rng.normal(size=(F, D)) for _ in range(n_query)]
    embs = [rng.normal(size=D) for _ in range(n_support)]
    return supports, embs, queries


def test_forward_trivial_composition():
    # passthrough blocks, no gating, single stride, zero recal kernel:
    # the only active piece is the doubled bidirectional pass and the
    # forced half recalibration gate -> 1.5 * 2x = 3x
    rng = np.random.default_rng(14)
    cfg = StprConfig(strides=(1,), sgf_enabled_support=False)
    params = init_stpr_params(cfg, CFG, rng)
    supports, embs, queries = _micro_inputs(rng)
    ref_s, ref_q = stpr_forward(supports, embs, queries, cfg, CFG, params)
    for x, out in zip(supports + queries, ref_s + ref_q):
        want = 1.5 * acu_bidirectional(x, params["acu"]["w1"]["fwd"],
                                       params["acu"]["w1"]["bwd"], CFG)
        assert np.max(np.abs(out - want)) < 1e-12
        assert np.max(np.abs(out - 3.0 * x)) < 1e-12


def test_forward_single_stride_matches_direct_composition():
    rng = np.random.default_rng(15)
    cfg = StprConfig(strides=(1,), sgf_enabled_support=False)
    params = init_stpr_params(cfg, CFG, rng)
    for key in ("fwd", "bwd"):
        sub = params["acu"]["w1"][key]
        for k in sub:
            sub[k] = sub[k] + rng.normal(0.0, 0.3, size=sub[k].shape)
    supports, embs, queries = _micro_inputs(rng)
    ref_s, _ = stpr_forward(supports, embs, queries, cfg, CFG, params)
    for x, out in zip(supports, ref_s):
        asd = asd_refine(x, None, 1, params["asd"]["w1"], CFG)
        acu = acu_bidirectional(asd, params["acu"]["w1"]["fwd"],
                                params["acu"]["w1"]["bwd"], CFG)
        want = channel_recalibrate(acu, params["recal"])
        assert np.max(np.abs(out - want)) < 1e-12


def test_forward_full_compositional_oracle():
    rng = np.random.default_rng(16)
    cfg = StprConfig(strides=(1, 2))
    params = init_stpr_params(cfg, CFG, rng)
    flat = dict(ad.tree_flatten(params))
    for name in flat:
        flat[name] += rng.normal(0.0, 0.2, size=flat[name].shape)
    supports, embs, queries = _micro_inputs(rng, F=4)
    cfg4 = StprConfig(strides=(1, 2))
    ref_s, ref_q = stpr_forward(supports, embs, queries, cfg4, CFG, params)

    def oracle(x, emb):
        sgf = sgf_reweight(emb, x) if emb is not None else None
        base = sgf if sgf is not None else x
        bundle = {}
        for w in (1, 2):
            asd = asd_refine(base, sgf, w, params["asd"][f"w{w}"], CFG)
            bundle[w] = acu_bidirectional(asd, params["acu"][f"w{w}"]["fwd"],
                                          params["acu"][f"w{w}"]["bwd"], CFG)
        return channel_recalibrate(acu_fuse(bundle, cfg4), params["recal"])

    for x, emb, out in zip(supports, embs, ref_s):
        assert np.max(np.abs(out - oracle(x, emb))) < 1e-10
    for x, out in zip(queries, ref_q):
        assert np.max(np.abs(out - oracle(x, None))) < 1e-10


def test_forward_support_order_independence():
    rng = np.random.default_rng(17)
    cfg = StprConfig(strides=(1, 2))
    params = init_stpr_params(cfg, CFG, rng)
    supports, embs, queries = _micro_inputs(rng, n_support=3)
    ref_s, _ = stpr_forward(supports, embs, queries, cfg, CFG, params)
    perm = [2, 0, 1]
    ref_p, _ = stpr_forward([supports[i] for i in perm],
                            [embs[i] for i in perm], queries, cfg, CFG, params)
    for i, j in enumerate(perm):
        assert np.array_equal(ref_p[i], ref_s[j])


def test_forward_rejects_query_gating():
    cfg = StprConfig(sgf_enabled_query=True)
    rng = np.random.default_rng(18)
    params = init_stpr_params(cfg, CFG, rng)
    supports, embs, queries = _micro_inputs(rng)
    with pytest.raises(ConfigurationError):
        stpr_forward(supports, embs, queries, cfg, CFG, params)


def test_forward_rejects_mixed_shapes():
    rng = np.random.default_rng(19)
    cfg = StprConfig(strides=(1,))
    params = init_stpr_params(cfg, CFG, rng)
    with pytest.raises(InconsistencyError):
        stpr_forward([rng.normal(size=(8, 8)), rng.normal(size=(6, 8))],
                     [rng.normal(size=8)] * 2, [], cfg, CFG, params)


def test_forward_gradients():
    rng = np.random.default_rng(20)
    cfg = StprConfig(strides=(1, 2))
    params = init_stpr_params(cfg, CFG, rng)
    flat = dict(ad.tree_flatten(params))
    for name in flat:
        flat[name] += rng.normal(0.0, 0.2, size=flat[name].shape)
    supports, embs, queries = _micro_inputs(rng, F=4, n_support=1, n_query=1)
    w_s = rng.normal(size=(4, 8))
    w_q = rng.normal(size=(4, 8))

    def loss(p):
        ref_s, ref_q = stpr_forward(supports, embs, queries, cfg, CFG, p)
        return ad.add(ad.tsum(ad.mul(ref_s[0], w_s)),
                      ad.tsum(ad.mul(ref_q[0], w_q)))

    assert ad.grad_check(loss, params, max_coords=4, rng=rng) < 1e-4


def test_config_validation():
    with pytest.raises(ConfigurationError):
        StprConfig(strides=(2, 2))
    with pytest.raises(ConfigurationError):
        StprConfig(recal_kernel=4)
    with pytest.raises(ConfigurationError):
        StprConfig(strides=(1, 2), fuse_weights=(0.5,))
    with pytest.raises(ConfigurationError):
        StprConfig(strides=(1, 2), fuse_weights=(0.9, 0.2))
