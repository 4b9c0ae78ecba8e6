"""Dense-tensor arithmetic with reverse-mode differentiation.

Values are plain float64 numpy arrays (rank <= 3, row-major).  Every public
op dispatches on its arguments: if none of them is a :class:`Node` the op is
evaluated eagerly in numpy and returns an ndarray; if at least one argument
is a Node the op records itself on the implicit tape and returns a new Node.
This lets the exact same model code run in a cheap no-grad mode (evaluation)
and in a recorded mode (training).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    EmptySequenceError,
    EvaluationError,
    ShapeMismatchError,
)

Array = np.ndarray


def as_tensor(x) -> Array:
    """Coerce to a float64 ndarray of rank <= 3."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim > 3:
        raise ShapeMismatchError(f"rank {a.ndim} tensor not supported (max 3)")
    return a


class Node:
    """A value on the differentiation tape.

    ``parents`` holds the Node inputs of the producing op and ``vjp`` maps the
    incoming gradient to one gradient per parent, in order.
    """

    __slots__ = ("value", "grad", "parents", "vjp")

    def __init__(self, value, parents=(), vjp=None):
        self.value = as_tensor(value)
        self.grad = None
        self.parents = tuple(parents)
        self.vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    # arithmetic sugar so model code reads like numpy
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def __repr__(self):
        return f"Node(shape={self.value.shape})"


def val(x) -> Array:
    """Underlying ndarray of a Node or array-like."""
    if isinstance(x, Node):
        return x.value
    return as_tensor(x)


def _is_node(*xs):
    return any(isinstance(x, Node) for x in xs)


def _unbroadcast(g: Array, shape) -> Array:
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _record(value, inputs, vjps):
    """Build a Node keeping only the Node inputs and their vjp closures."""
    parents, keep = [], []
    for inp, fn in zip(inputs, vjps):
        if isinstance(inp, Node):
            parents.append(inp)
            keep.append(fn)

    def vjp(g):
        return [fn(g) for fn in keep]

    return Node(value, parents, vjp)


def backward(root: Node) -> None:
    """Reverse-mode accumulation from a scalar (or any) root node."""
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))

    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.grad is None or node.vjp is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.value)
            parent.grad += g


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b):
    av, bv = val(a), val(b)
    out = av + bv
    if not _is_node(a, b):
        return out
    return _record(out, (a, b), (
        lambda g: _unbroadcast(g, av.shape),
        lambda g: _unbroadcast(g, bv.shape),
    ))


def sub(a, b):
    return add(a, mul(b, -1.0))


def mul(a, b):
    av, bv = val(a), val(b)
    out = av * bv
    if not _is_node(a, b):
        return out
    return _record(out, (a, b), (
        lambda g: _unbroadcast(g * bv, av.shape),
        lambda g: _unbroadcast(g * av, bv.shape),
    ))


def div(a, b):
    av, bv = val(a), val(b)
    out = av / bv
    if not _is_node(a, b):
        return out
    return _record(out, (a, b), (
        lambda g: _unbroadcast(g / bv, av.shape),
        lambda g: _unbroadcast(-g * av / (bv * bv), bv.shape),
    ))


def exp(a):
    out = np.exp(val(a))
    if not _is_node(a):
        return out
    return _record(out, (a,), (lambda g: g * out,))


def expm1(a):
    av = val(a)
    out = np.expm1(av)
    if not _is_node(a):
        return out
    return _record(out, (a,), (lambda g: g * np.exp(av),))


def log(a):
    av = val(a)
    out = np.log(av)
    if not _is_node(a):
        return out
    return _record(out, (a,), (lambda g: g / av,))


def sqrt(a):
    out = np.sqrt(val(a))
    if not _is_node(a):
        return out
    return _record(out, (a,), (lambda g: g * 0.5 / out,))


def square(a):
    return mul(a, a)


def sigmoid(a):
    av = val(a)
    out = np.empty_like(av)
    pos = av >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-av[pos]))
    e = np.exp(av[~pos])
    out[~pos] = e / (1.0 + e)
    if not _is_node(a):
        return out
    return _record(out, (a,), (lambda g: g * out * (1.0 - out),))


def silu(a):
    s = sigmoid(val(a))
    out = val(a) * s
    if not _is_node(a):
        return out
    av = val(a)
    return _record(out, (a,), (lambda g: g * (s + av * s * (1.0 - s)),))


def softplus(a):
    av = val(a)
    out = np.logaddexp(0.0, av)
    if not _is_node(a):
        return out
    s = sigmoid(av)
    return _record(out, (a,), (lambda g: g * s,))


def clip_min(a, lo: float):
    """max(a, lo) elementwise; gradient is 0 where the floor is active."""
    av = val(a)
    out = np.maximum(av, lo)
    if not _is_node(a):
        return out
    mask = (av > lo).astype(np.float64)
    return _record(out, (a,), (lambda g: g * mask,))


def where(cond, a, b):
    """Select by a constant boolean mask (the mask itself is not differentiated)."""
    c = np.asarray(cond, dtype=bool)
    av, bv = val(a), val(b)
    out = np.where(c, av, bv)
    if not _is_node(a, b):
        return out
    return _record(out, (a, b), (
        lambda g: _unbroadcast(np.where(c, g, 0.0), av.shape),
        lambda g: _unbroadcast(np.where(c, 0.0, g), bv.shape),
    ))


def logaddexp(a, b):
    av, bv = val(a), val(b)
    out = np.logaddexp(av, bv)
    if not _is_node(a, b):
        return out
    wa = sigmoid(av - bv)
    return _record(out, (a, b), (
        lambda g: _unbroadcast(g * wa, av.shape),
        lambda g: _unbroadcast(g * (1.0 - wa), bv.shape),
    ))


# ---------------------------------------------------------------------------
# reductions


def tsum(a, axis=None, keepdims=False):
    av = val(a)
    out = av.sum(axis=axis, keepdims=keepdims)
    if not _is_node(a):
        return out

    def vjp(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, av.shape).copy()

    return _record(out, (a,), (vjp,))


def tmean(a, axis=None, keepdims=False):
    av = val(a)
    n = av.size if axis is None else av.shape[axis]
    return div(tsum(a, axis=axis, keepdims=keepdims), float(n))


def reduce_min(a, axis):
    """min along ``axis``; subgradient flows to the first argmin."""
    av = val(a)
    out = av.min(axis=axis)
    if not _is_node(a):
        return out
    idx = np.expand_dims(av.argmin(axis=axis), axis)

    def vjp(g):
        full = np.zeros_like(av)
        np.put_along_axis(full, idx, np.expand_dims(g, axis), axis)
        return full

    return _record(out, (a,), (vjp,))


# ---------------------------------------------------------------------------
# linear algebra and structure


def matmul(a, b):
    av, bv = val(a), val(b)
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeMismatchError(
            f"matmul shapes incompatible: {av.shape} x {bv.shape}")
    out = av @ bv
    if not _is_node(a, b):
        return out
    return _record(out, (a, b), (
        lambda g: g @ bv.T,
        lambda g: av.T @ g,
    ))


def transpose(a):
    av = val(a)
    out = av.T
    if not _is_node(a):
        return out
    return _record(out, (a,), (lambda g: np.ascontiguousarray(g.T),))


def take(a, idx):
    """General indexing (slices, ints, index arrays) with scatter-add vjp."""
    av = val(a)
    out = av[idx]
    if not _is_node(a):
        return out

    def vjp(g):
        full = np.zeros_like(av)
        np.add.at(full, idx, g)
        return full

    return _record(np.array(out, copy=True), (a,), (vjp,))


def reshape(a, shape):
    av = val(a)
    out = av.reshape(shape)
    if not _is_node(a):
        return out
    return _record(out, (a,), (lambda g: g.reshape(av.shape),))


def reverse_rows(a):
    av = val(a)
    out = av[::-1].copy()
    if not _is_node(a):
        return out
    return _record(out, (a,), (lambda g: g[::-1].copy(),))


def pad_axis(a, axis: int, before: int, after: int):
    """Zero-pad along one axis."""
    av = val(a)
    widths = [(0, 0)] * av.ndim
    widths[axis] = (before, after)
    out = np.pad(av, widths)
    if not _is_node(a):
        return out
    n = av.shape[axis]
    sl = [slice(None)] * av.ndim
    sl[axis] = slice(before, before + n)
    sl = tuple(sl)
    return _record(out, (a,), (lambda g: g[sl].copy(),))


def pad_rows(a, before: int, after: int):
    """Zero-pad along the leading axis."""
    return pad_axis(a, 0, before, after)


def stack(parts, axis=0):
    vals = [val(p) for p in parts]
    out = np.stack(vals, axis=axis)
    if not _is_node(*parts):
        return out

    def make_vjp(i):
        return lambda g: np.take(g, i, axis=axis)

    return _record(out, tuple(parts), tuple(make_vjp(i) for i in range(len(parts))))


def concat_rows(parts):
    vals = [val(p) for p in parts]
    out = np.concatenate(vals, axis=0)
    if not _is_node(*parts):
        return out
    offsets = np.cumsum([0] + [v.shape[0] for v in vals])

    def make_vjp(i):
        return lambda g: g[offsets[i]:offsets[i + 1]].copy()

    return _record(out, tuple(parts), tuple(make_vjp(i) for i in range(len(parts))))


# ---------------------------------------------------------------------------
# neural-net ops


def softmax(x, axis=-1):
    xv = val(x)
    shifted = xv - xv.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)
    if not _is_node(x):
        return out

    def vjp(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return out * (g - dot)

    return _record(out, (x,), (vjp,))


def layer_norm(x, gain, bias, eps: float = 1e-5):
    """Per-row normalization over the trailing axis, then affine."""
    mu = tmean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = tmean(square(centered), axis=-1, keepdims=True)
    inv = div(1.0, sqrt(add(var, eps)))
    return add(mul(mul(centered, inv), gain), bias)


def temporal_resample(x, target_len: int):
    """Per-channel linear interpolation of a t x D sequence to target_len rows.

    Both grids live on [0, 1] with endpoints pinned; a length-1 input is
    repeated.  O(F * D): each output row mixes exactly two input rows.
    """
    xv = val(x)
    if xv.ndim != 2:
        raise ShapeMismatchError(f"expected t x D input, got shape {xv.shape}")
    t = xv.shape[0]
    if t == 0:
        raise EmptySequenceError("cannot resample an empty sequence")
    if target_len < 1:
        raise EmptySequenceError("target length must be >= 1")
    if t == target_len:
        return x
    if t == 1:
        ones = np.ones((target_len, 1))
        return mul(ones, x)  # broadcast the single row

    pos = np.linspace(0.0, 1.0, target_len) * (t - 1)
    i0 = np.floor(pos).astype(np.intp)
    i0 = np.minimum(i0, t - 2)
    w = (pos - i0)[:, None]
    lo = take(x, i0)
    hi = take(x, i0 + 1)
    return add(mul(lo, 1.0 - w), mul(hi, w))


def conv1d(x, kernel, padding: str = "same"):
    """1-D convolution (cross-correlation convention) over an L x C_in input.

    ``kernel`` has shape k x C_in x C_out; zero padding keeps length L.
    """
    kv = val(kernel)
    xv = val(x)
    if kv.ndim != 3:
        raise ShapeMismatchError(f"kernel must be k x C_in x C_out, got {kv.shape}")
    if padding != "same":
        raise ConfigurationError(f"unsupported padding mode: {padding}")
    k = kv.shape[0]
    if k % 2 == 0:
        raise ConfigurationError(f"same-padding conv needs odd kernel size, got {k}")
    if xv.shape[1] != kv.shape[1]:
        raise ShapeMismatchError(
            f"conv1d channel mismatch: input {xv.shape} vs kernel {kv.shape}")
    L = xv.shape[0]
    half = k // 2
    xp = pad_rows(x, half, half)
    out = None
    for s in range(k):
        term = matmul(take(xp, slice(s, s + L)), take(kernel, s))
        out = term if out is None else add(out, term)
    return out


def causal_depthwise_conv(x, kernel):
    """Depthwise causal conv: kernel k x C, left zero padding of k-1 rows."""
    kv = val(kernel)
    xv = val(x)
    k = kv.shape[0]
    if xv.shape[1] != kv.shape[1]:
        raise ShapeMismatchError(
            f"depthwise conv channel mismatch: {xv.shape} vs {kv.shape}")
    L = xv.shape[0]
    xp = pad_rows(x, k - 1, 0)
    out = None
    for s in range(k):
        term = mul(take(xp, slice(s, s + L)), take(kernel, s))
        out = term if out is None else add(out, term)
    return out


# ---------------------------------------------------------------------------
# parameters and verification


@dataclass
class Parameter:
    """A named trainable array."""

    name: str
    value: Array
    trainable: bool = True


def tree_flatten(params, prefix="") -> list[tuple[str, Array]]:
    """Flatten a nested dict of arrays into (path, array) pairs, sorted order."""
    out = []
    for key in sorted(params):
        sub_tree = params[key]
        path = f"{prefix}{key}"
        if isinstance(sub_tree, dict):
            out.extend(tree_flatten(sub_tree, path + "/"))
        else:
            out.append((path, sub_tree))
    return out


def tree_wrap(params):
    """Mirror a nested dict of arrays with leaf Nodes; returns (tree, leaves)."""
    leaves = {}

    def rec(tree, prefix):
        wrapped = {}
        for key in sorted(tree):
            path = f"{prefix}{key}"
            if isinstance(tree[key], dict):
                wrapped[key] = rec(tree[key], path + "/")
            else:
                node = Node(tree[key])
                wrapped[key] = node
                leaves[path] = node
        return wrapped

    return rec(params, ""), leaves


def tree_unflatten(pairs) -> dict:
    tree: dict = {}
    for path, arr in pairs:
        parts = path.split("/")
        cur = tree
        for p in parts[:-1]:
            cur = cur.setdefault(p, {})
        cur[parts[-1]] = arr
    return tree


def grad_check(f, params: dict, eps: float = 1e-5, max_coords: int = 24,
               rng=None) -> float:
    """Compare reverse-mode gradients of ``f(params)`` to central differences.

    ``f`` maps a nested dict (of Nodes or arrays) to a scalar.  Returns the
    max relative error over a sampled coordinate subset per parameter, where
    rel(g, h) = |g - h| / max(1e-8, |g| + |h|).  Differences below the
    central-difference roundoff bound (~|f| * machine_eps / eps) are not
    counted: at tiny true gradients the difference quotient itself carries
    that much noise regardless of the reverse-mode result.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    wrapped, leaves = tree_wrap(params)
    out = f(wrapped)
    loss = val(out)
    if not np.all(np.isfinite(loss)):
        raise EvaluationError("objective is not finite at the given parameters")
    backward(out)
    fd_noise = 100.0 * np.finfo(float).eps * max(1.0, abs(float(loss))) / eps

    flat = dict(tree_flatten(params))
    worst = 0.0
    for path, arr in flat.items():
        node = leaves[path]
        g = node.grad if node.grad is not None else np.zeros_like(arr)
        n = arr.size
        coords = np.arange(n) if n <= max_coords else rng.choice(
            n, size=max_coords, replace=False)
        for c in coords:
            idx = np.unravel_index(c, arr.shape)
            orig = arr[idx]
            arr[idx] = orig + eps
            hi = float(val(f(params)))
            arr[idx] = orig - eps
            lo = float(val(f(params)))
            arr[idx] = orig
            fd = (hi - lo) / (2.0 * eps)
            an = float(g[idx])
            diff = max(0.0, abs(an - fd) - fd_noise)
            rel = diff / max(1e-8, abs(an) + abs(fd))
            worst = max(worst, rel)
    return worst
