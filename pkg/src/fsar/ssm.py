"""Gated selective state-space block for temporal sequences.

The block follows the Mamba recipe: input projection, depthwise causal
convolution, SiLU, a selective scan whose step size and input/output
couplings are functions of the (convolved) input, a multiplicative SiLU
gate, and an output projection with a residual connection.  The state
transition is diagonal negative-real, discretized with zero-order hold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import val
from .errors import ConfigurationError, DomainError, EmptySequenceError

# below this, (exp(dt*a) - 1) / a switches to its series limit dt
_ZOH_LIMIT = 1e-8


@dataclass
class SSMConfig:
    model_dim: int = 8
    state_dim: int = 16
    conv_kernel: int = 3
    expansion: int = 2
    dt_min: float = 0.001
    dt_max: float = 0.1

    def __post_init__(self):
        if min(self.model_dim, self.state_dim, self.expansion) < 1:
            raise ConfigurationError("model_dim, state_dim, expansion must be >= 1")
        if self.conv_kernel % 2 == 0:
            raise ConfigurationError("conv_kernel must be odd")
        if not (0.0 < self.dt_min <= self.dt_max):
            raise ConfigurationError("need 0 < dt_min <= dt_max")

    @property
    def inner_dim(self) -> int:
        return self.model_dim * self.expansion


def discretize_zoh(a_diag, b, dt):
    """ZOH discretization of a diagonal system: returns (a_bar, b_bar).

    a_bar = exp(dt*a), b_bar = ((exp(dt*a) - 1) / a) * b, with the series
    limit b_bar = dt*b used where |dt*a| is tiny.
    """
    if float(val(dt)) <= 0.0:
        raise DomainError(f"dt must be positive, got {float(val(dt))}")
    da = ad.mul(dt, a_diag)
    a_bar = ad.exp(da)
    tiny = np.abs(val(da)) < _ZOH_LIMIT
    # keep the unselected branch free of 0/0 (it would leak NaN warnings)
    safe_a = ad.where(tiny, np.ones_like(val(a_diag)), a_diag)
    coeff = ad.where(tiny, ad.mul(dt, np.ones_like(val(a_diag))),
                     ad.div(ad.expm1(da), safe_a))
    return a_bar, ad.mul(coeff, b)


def ssm_scan(x, dt, b_t, c_t, a_diag):
    """Causal linear recurrence over an L x C sequence with H-dim state.

    dt: L x C per-step step sizes (already positive), b_t/c_t: L x H
    input/output couplings, a_diag: C x H diagonal transition.  Per channel:
    h_t = a_bar_t * h_{t-1} + b_bar_t * x_t,   y_t = <c_t, h_t>.
    """
    L, C = val(x).shape
    if L == 0:
        raise EmptySequenceError("ssm_scan needs a non-empty sequence")
    H = val(a_diag).shape[1]

    dt_e = ad.reshape(dt, (L, C, 1))
    da = ad.mul(dt_e, a_diag)  # L x C x H
    a_bar = ad.exp(da)
    tiny = np.abs(val(da)) < _ZOH_LIMIT
    safe_a = ad.where(tiny, np.ones(1), a_diag)
    coeff = ad.where(tiny, dt_e, ad.div(ad.expm1(da), safe_a))
    bx = ad.mul(ad.mul(coeff, ad.reshape(b_t, (L, 1, H))),
                ad.reshape(x, (L, C, 1)))

    h = np.zeros((C, H))
    ys = []
    for t in range(L):
        h = ad.add(ad.mul(ad.take(a_bar, t), h), ad.take(bx, t))
        ct = ad.reshape(ad.take(c_t, t), (1, H))
        ys.append(ad.tsum(ad.mul(h, ct), axis=1))
    return ad.stack(ys, axis=0)


def init_tssm_params(cfg: SSMConfig, rng: np.random.Generator) -> dict:
    """Fresh block parameters; out_proj starts at zero so the block is the
    identity map (pure residual) until training moves it."""
    D, Di, H = cfg.model_dim, cfg.inner_dim, cfg.state_dim
    conv = np.zeros((cfg.conv_kernel, Di))
    conv[-1, :] = 1.0  # identity tap at the current frame
    dt = np.exp(rng.uniform(np.log(cfg.dt_min), np.log(cfg.dt_max), size=Di))
    return {
        "in_proj": rng.normal(0.0, D ** -0.5, size=(D, Di)),
        "gate_proj": rng.normal(0.0, D ** -0.5, size=(D, Di)),
        "conv": conv,
        "A_log": np.tile(np.log(np.arange(1, H + 1, dtype=np.float64)), (Di, 1)),
        "B_proj": rng.normal(0.0, Di ** -0.5, size=(Di, H)),
        "C_proj": rng.normal(0.0, Di ** -0.5, size=(Di, H)),
        "dt_proj": np.zeros((Di, Di)),
        "dt_bias": np.log(np.expm1(dt)),  # softplus^-1
        "out_proj": np.zeros((Di, D)),
    }


def tssm_block(x, params: dict, cfg: SSMConfig):
    """Forward pass of the gated block; strictly causal, output F x D."""
    xv = val(x)
    if xv.ndim != 2 or xv.shape[1] != cfg.model_dim:
        raise ConfigurationError(
            f"input shape {xv.shape} does not match model_dim {cfg.model_dim}")
    if xv.shape[0] == 0:
        raise EmptySequenceError("tssm_block needs at least one frame")

    u = ad.matmul(x, params["in_proj"])
    u = ad.silu(ad.causal_depthwise_conv(u, params["conv"]))
    dt = ad.softplus(ad.add(ad.matmul(u, params["dt_proj"]), params["dt_bias"]))
    b_t = ad.matmul(u, params["B_proj"])
    c_t = ad.matmul(u, params["C_proj"])
    a_diag = ad.mul(-1.0, ad.exp(params["A_log"]))
    y = ssm_scan(u, dt, b_t, c_t, a_diag)
    y = ad.mul(y, ad.silu(ad.matmul(x, params["gate_proj"])))
    return ad.add(ad.matmul(y, params["out_proj"]), x)
