"""Dense tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy float array. Differentiable ops build a graph by
storing, on each result, its operand tensors and a gradient closure. Calling
``backward(loss)`` materializes a Tape (the topologically ordered record of
op nodes reachable from the loss), walks it in reverse, and accumulates
``d(loss)/d(t)`` into ``t.grad`` for every tensor with ``requires_grad``.

Default scalar width is float32; pass float64 arrays for the high-precision
mode used by gradient checking. Elementwise ops accept equal shapes or a
python scalar / 0-d tensor; anything richer (bias rows, additive masks,
block upsampling) goes through a dedicated op with its own gradient rule.
"""

from __future__ import annotations

import math

import numpy as np

DEFAULT_DTYPE = np.float32

GELU_C = math.sqrt(2.0 / math.pi)
GELU_A = 0.044715


class ShapeError(ValueError):
    """Operand shapes incompatible with the requested operation."""


class DomainError(ValueError):
    """Operand values outside the operation's domain (e.g. log of x <= 0)."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad=False, _parents=(), _grad_fn=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._grad_fn = _grad_fn

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap_scalar(other, self), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return narrow(self, key)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def backward(self, tape=None):
        backward(self, tape)


class Tape:
    """Topologically ordered record of the op nodes feeding one result.

    Every operand node precedes its result; a backward run visits each node
    exactly once and can run only once.
    """

    def __init__(self, nodes):
        self.nodes = nodes
        self.consumed = False

    @classmethod
    def trace(cls, root):
        order = []
        seen = set()
        stack = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        return cls(order)

    def run(self, root):
        if self.consumed:
            raise RuntimeError("tape already consumed by a previous backward pass")
        self.consumed = True
        grads = {id(root): np.ones_like(root.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._grad_fn is None:
                continue
            for parent, pg in node._grad_fn(g):
                if pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def backward(loss, tape=None):
    """Populate ``t.grad`` with d(loss)/d(t) for every requires-grad tensor."""
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if tape is None:
        tape = Tape.trace(loss)
    tape.run(loss)


def _wrap_scalar(value, like):
    return Tensor(np.asarray(value, dtype=like.dtype))


def _is_scalar_operand(t):
    return t.ndim == 0


def _check_same_dtype(a, b):
    if a.dtype != b.dtype:
        raise TypeError(f"mixed dtypes {a.dtype} and {b.dtype}; cast explicitly")


def _node(data, parents, grad_fn):
    track = any(p.requires_grad or p._grad_fn is not None for p in parents)
    if not track:
        return Tensor(data)
    return Tensor(data, _parents=parents, _grad_fn=grad_fn)


def _binary_shapes(a, b):
    if a.shape == b.shape or _is_scalar_operand(a) or _is_scalar_operand(b):
        return
    raise ShapeError(f"elementwise op needs equal shapes or a scalar, got {a.shape} and {b.shape}")


def _reduce_to(grad, t):
    # gradient of broadcasting a scalar operand across the other shape
    if _is_scalar_operand(t) and grad.shape != ():
        return np.sum(grad, dtype=grad.dtype).reshape(())
    return grad


def add(a, b):
    if not isinstance(b, Tensor):
        b = _wrap_scalar(b, a)
    _check_same_dtype(a, b)
    _binary_shapes(a, b)
    out = a.data + b.data
    return _node(out, (a, b), lambda g: ((a, _reduce_to(g, a)), (b, _reduce_to(g, b))))


def sub(a, b):
    if not isinstance(b, Tensor):
        b = _wrap_scalar(b, a)
    _check_same_dtype(a, b)
    _binary_shapes(a, b)
    out = a.data - b.data
    return _node(out, (a, b), lambda g: ((a, _reduce_to(g, a)), (b, _reduce_to(-g, b))))


def mul(a, b):
    if not isinstance(b, Tensor):
        b = _wrap_scalar(b, a)
    _check_same_dtype(a, b)
    _binary_shapes(a, b)
    out = a.data * b.data
    return _node(out, (a, b), lambda g: ((a, _reduce_to(g * b.data, a)), (b, _reduce_to(g * a.data, b))))


def neg(a):
    return _node(-a.data, (a,), lambda g: ((a, -g),))


def add_const(a, const):
    """Add a non-differentiable numpy array, broadcast against ``a``."""
    const = np.asarray(const, dtype=a.dtype)
    out = a.data + const
    if out.shape != a.shape:
        raise ShapeError(f"constant of shape {const.shape} does not broadcast onto {a.shape}")
    return _node(out, (a,), lambda g: ((a, g),))


def add_bias(x, b):
    """x[..., j] + b[j]; gradient of b sums over the leading axes."""
    _check_same_dtype(x, b)
    if b.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError(f"bias shape {b.shape} does not match last axis of {x.shape}")
    out = x.data + b.data

    def grad_fn(g):
        gb = g.reshape(-1, b.shape[0]).sum(axis=0)
        return ((x, g), (b, gb))

    return _node(out, (x, b), grad_fn)


def matmul(a, b):
    _check_same_dtype(a, b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul operands need at least 2 dimensions")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"inner dimensions disagree: {a.shape} @ {b.shape}")
    if b.ndim == 2:
        out = a.data @ b.data

        def grad_fn(g):
            ga = g @ b.data.T
            a2 = a.data.reshape(-1, a.shape[-1])
            g2 = g.reshape(-1, b.shape[-1])
            gb = a2.T @ g2
            return ((a, ga), (b, gb))

        return _node(out, (a, b), grad_fn)
    if a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"stacked matmul needs equal batch dims: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def grad_fn(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return ((a, ga), (b, gb))

    return _node(out, (a, b), grad_fn)


def relu(a):
    out = np.maximum(a.data, 0)
    return _node(out, (a,), lambda g: ((a, g * (a.data > 0)),))


def gelu(a):
    """tanh-approximation gelu: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3)))."""
    x = a.data
    u = GELU_C * (x + GELU_A * x * x * x)
    t = np.tanh(u)
    out = 0.5 * x * (1.0 + t)

    def grad_fn(g):
        du = GELU_C * (1.0 + 3.0 * GELU_A * x * x)
        d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
        return ((a, g * d),)

    return _node(out, (a,), grad_fn)


def exp(a):
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: ((a, g * out),))


def log(a):
    if np.any(a.data <= 0):
        raise DomainError("log of non-positive value")
    out = np.log(a.data)
    return _node(out, (a,), lambda g: ((a, g / a.data),))


def absolute(a):
    out = np.abs(a.data)
    return _node(out, (a,), lambda g: ((a, g * np.sign(a.data)),))


def abs_pow(a, p):
    """|x| ** p with gradient p*|x|**(p-1)*sign(x); subgradient 0 at x=0 for p>1."""
    absx = np.abs(a.data)
    out = absx**p

    def grad_fn(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = p * absx ** (p - 1.0) * np.sign(a.data)
        if p < 1.0:
            d = np.where(absx == 0, 0.0, d)
        return ((a, g * d),)

    return _node(out, (a,), grad_fn)


def softmax(a, axis=-1):
    x = a.data
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def grad_fn(g):
        dot = np.sum(g * out, axis=axis, keepdims=True)
        return ((a, out * (g - dot)),)

    return _node(out, (a,), grad_fn)


def layernorm(x, gain, bias, eps=1e-5, axis=-1):
    """Normalize ``axis`` to zero mean / unit variance, then affine by the
    per-slot gain and bias (each of length x.shape[axis])."""
    _check_same_dtype(x, gain)
    _check_same_dtype(x, bias)
    axis = axis % x.ndim
    n = x.shape[axis]
    if gain.shape != (n,) or bias.shape != (n,):
        raise ShapeError(f"gain/bias must have shape ({n},)")
    bshape = [1] * x.ndim
    bshape[axis] = n
    gain_b = gain.data.reshape(bshape)
    bias_b = bias.data.reshape(bshape)
    mean = np.mean(x.data, axis=axis, keepdims=True)
    centered = x.data - mean
    var = np.mean(centered**2, axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gain_b + bias_b

    def grad_fn(g):
        others = tuple(i for i in range(g.ndim) if i != axis)
        ggain = np.sum(g * xhat, axis=others)
        gbias = np.sum(g, axis=others)
        dxhat = g * gain_b
        m1 = np.mean(dxhat, axis=axis, keepdims=True)
        m2 = np.mean(dxhat * xhat, axis=axis, keepdims=True)
        gx = (dxhat - m1 - xhat * m2) * inv
        return ((x, gx), (gain, ggain), (bias, gbias))

    return _node(out, (x, gain, bias), grad_fn)


def _conv_geometry(h, w, kh, kw, stride, padding):
    hp, wp = h + 2 * padding, w + 2 * padding
    if kh > hp or kw > wp:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {hp}x{wp}")
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    return oh, ow


def _im2col(x, kh, kw, stride, pad_h, pad_w):
    # (B, C, H, W) -> (B, C*kh*kw, oh*ow) over the padded input; filled by
    # per-tap strided copies, which beat gather-style window flattening
    if pad_h or pad_w:
        x = np.pad(x, ((0, 0), (0, 0), (pad_h, pad_h), (pad_w, pad_w)))
    b, c, hp, wp = x.shape
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    cols = np.empty((b, c, kh, kw, oh, ow), dtype=x.dtype)
    for ki in range(kh):
        for kj in range(kw):
            cols[:, :, ki, kj] = x[:, :, ki : ki + oh * stride : stride, kj : kj + ow * stride : stride]
    return cols.reshape(b, c * kh * kw, oh * ow), oh, ow


def _corr2d(x, w, stride, pad_h, pad_w):
    """Raw batched cross-correlation used by conv2d forward and its input grad."""
    f = w.shape[0]
    cols, oh, ow = _im2col(x, w.shape[2], w.shape[3], stride, pad_h, pad_w)
    out = w.reshape(f, -1) @ cols  # (B, F, oh*ow) via broadcasted matmul
    return out.reshape(x.shape[0], f, oh, ow)


def conv2d(x, kernels, bias=None, stride=1, padding=0):
    """Batched 2-d cross-correlation (no kernel flip).

    ``x`` is (C,H,W) or (B,C,H,W); ``kernels`` is (F,C,kh,kw). Output spatial
    dims follow floor((H+2p-kh)/stride)+1.
    """
    _check_same_dtype(x, kernels)
    squeeze = x.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4 or kernels.ndim != 4:
        raise ShapeError("conv2d expects (B,C,H,W) input and (F,C,kh,kw) kernels")
    if xd.shape[1] != kernels.shape[1]:
        raise ShapeError(f"channel mismatch: input {xd.shape[1]}, kernels {kernels.shape[1]}")
    f, c, kh, kw = kernels.shape
    h, wd = xd.shape[2], xd.shape[3]
    _conv_geometry(h, wd, kh, kw, stride, padding)
    out = _corr2d(xd, kernels.data, stride, padding, padding)
    if bias is not None:
        _check_same_dtype(x, bias)
        if bias.shape != (f,):
            raise ShapeError(f"conv bias must have shape ({f},)")
        out = out + bias.data[None, :, None, None]

    def grad_fn(g):
        gout = g[None] if squeeze else g
        b = gout.shape[0]
        oh, ow = gout.shape[2], gout.shape[3]
        # weight grad: sum over batch of dout (F,P) @ cols^T (P, C*kh*kw)
        cols, _, _ = _im2col(xd, kh, kw, stride, padding, padding)
        g2 = gout.reshape(b, f, oh * ow)
        gw = (g2 @ cols.transpose(0, 2, 1)).sum(axis=0).reshape(f, c, kh, kw)
        # input grad: full correlation of the stride-dilated output grad with
        # the flipped kernel (channel axes swapped), cropped by the padding
        if stride > 1:
            dil = np.zeros((b, f, (oh - 1) * stride + 1, (ow - 1) * stride + 1), dtype=gout.dtype)
            dil[:, :, ::stride, ::stride] = gout
        else:
            dil = gout
        wflip = np.ascontiguousarray(kernels.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
        gx_pad = _corr2d(dil, wflip, 1, kh - 1, kw - 1)  # grad of the padded input
        gx_src = gx_pad[:, :, padding:, padding:]
        gx = np.zeros_like(xd)
        gx[:, :, : min(h, gx_src.shape[2]), : min(wd, gx_src.shape[3])] = gx_src[:, :, :h, :wd]
        parts = [(x, gx[0] if squeeze else gx), (kernels, gw)]
        if bias is not None:
            parts.append((bias, gout.sum(axis=(0, 2, 3))))
        return tuple(parts)

    parents = (x, kernels) if bias is None else (x, kernels, bias)
    return _node(out[0] if squeeze else out, parents, grad_fn)


def reshape(a, shape):
    out = a.data.reshape(shape)
    return _node(out, (a,), lambda g: ((a, g.reshape(a.shape)),))


def transpose(a, axes):
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = a.data.transpose(axes)
    return _node(out, (a,), lambda g: ((a, g.transpose(inverse)),))


def broadcast_to(a, shape):
    out = np.broadcast_to(a.data, shape)

    def grad_fn(g):
        extra = g.ndim - a.ndim
        axes = tuple(range(extra)) + tuple(
            i + extra for i, d in enumerate(a.shape) if d == 1 and g.shape[i + extra] != 1
        )
        ga = g.sum(axis=axes, keepdims=False) if axes else g
        return ((a, ga.reshape(a.shape)),)

    return _node(np.ascontiguousarray(out), (a,), grad_fn)


def narrow(a, key):
    out = a.data[key]
    if isinstance(out, np.ndarray) and out.base is not None:
        out = out.copy()

    def grad_fn(g):
        ga = np.zeros_like(a.data)
        ga[key] += g
        return ((a, ga),)

    return _node(out, (a,), grad_fn)


def gather_rows(a, indices):
    """a[indices] along axis 0; int index array of any shape."""
    idx = np.asarray(indices)
    out = a.data[idx]

    def grad_fn(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, idx, g)
        return ((a, ga),)

    return _node(out, (a,), grad_fn)


def gather_tokens(a, indices):
    """Per-sample row gather: out[b, j] = a[b, indices[b, j]]."""
    idx = np.asarray(indices)
    if a.ndim < 2 or idx.ndim != 2 or idx.shape[0] != a.shape[0]:
        raise ShapeError(f"gather_tokens needs (B,N,...) data and (B,K) indices, got {a.shape}, {idx.shape}")
    batch = np.arange(a.shape[0])[:, None]
    out = a.data[batch, idx]

    def grad_fn(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (batch, idx), g)
        return ((a, ga),)

    return _node(out, (a,), grad_fn)


def concat(tensors, axis=0):
    for t in tensors[1:]:
        _check_same_dtype(tensors[0], t)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        pieces = np.split(g, splits, axis=axis)
        return tuple((t, p) for t, p in zip(tensors, pieces))

    return _node(out, tuple(tensors), grad_fn)


def tsum(a, axis=None, keepdims=False):
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def grad_fn(g):
        if axis is None:
            return ((a, np.broadcast_to(g, a.shape).copy()),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return ((a, np.broadcast_to(gk, a.shape).copy()),)

    return _node(out, (a,), grad_fn)


def tmean(a, axis=None, keepdims=False):
    if axis is None:
        count = a.size
    elif isinstance(axis, tuple):
        count = int(np.prod([a.shape[i] for i in axis]))
    else:
        count = a.shape[axis]
    out = np.mean(a.data, axis=axis, keepdims=keepdims)

    def grad_fn(g):
        scale = np.asarray(1.0 / count, dtype=a.dtype)
        if axis is None:
            return ((a, np.broadcast_to(g * scale, a.shape).copy()),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return ((a, np.broadcast_to(gk * scale, a.shape).copy()),)

    return _node(out, (a,), grad_fn)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    if logits.ndim != 2:
        raise ShapeError("cross_entropy expects (B, C) logits")
    lab = np.asarray(labels)
    b = logits.shape[0]
    x = logits.data
    shifted = x - np.max(x, axis=1, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=1)) + np.max(x, axis=1)
    nll = lse - x[np.arange(b), lab]
    out = np.asarray(np.mean(nll), dtype=logits.dtype)

    def grad_fn(g):
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(b), lab] -= 1.0
        return ((logits, (g / b) * p.astype(logits.dtype)),)

    return _node(out, (logits,), grad_fn)


class Adam:
    """Standard Adam with bias correction; updates parameters in place."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                raise ValueError("adam step with missing gradient; run backward first")
            g = p.grad
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p.data -= (self.lr / c1) * m / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def parameter(data, dtype=DEFAULT_DTYPE):
    return Tensor(np.asarray(data, dtype=dtype), requires_grad=True)
