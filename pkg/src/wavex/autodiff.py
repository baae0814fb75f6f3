"""Minimal dense-tensor reverse-mode differentiation core.

Tensors wrap real numpy arrays of rank <= 4; spatial activations use the
channel-last layout (batch, height, width, channel), which keeps every
convolution and pointwise channel map a plain GEMM without gather
transposes.  Each op records a backward closure on its output; calling
``backward`` on a scalar walks the graph in reverse topological order,
accumulating gradients copy-on-write and releasing interior buffers as
soon as they are spent.

Spectral convolution weights are the one complex parameter type; their
gradient uses the convention ``grad = dL/dRe + i dL/dIm`` so an optimizer
can treat real and imaginary parts as independent coordinates.

Forward results are deterministic: identical inputs give bitwise-identical
outputs in single-threaded use.  Training math is meant to run in float32;
gradient verification in float64.
"""
from __future__ import annotations

from contextlib import contextmanager

import numpy as np
import scipy.fft

from .errors import ModeOverflow, ShapeMismatch

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class _GradMixin:
    def zero_grad(self):
        self.grad = None
        self._grad_owned = False

    def accumulate(self, g):
        # first contribution is borrowed; later ones force a private buffer
        if self.grad is None:
            self.grad = g
            self._grad_owned = False
        elif not self._grad_owned:
            self.grad = self.grad + g
            self._grad_owned = True
        else:
            self.grad += g


class Tensor(_GradMixin):
    """Dense real array with optional reverse-mode gradient tracking."""

    __slots__ = ("data", "requires_grad", "grad", "_grad_owned", "_parents",
                 "_backward_fn", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        self.data = np.asarray(data)
        if self.data.ndim > 4:
            raise ShapeMismatch(f"rank {self.data.ndim} exceeds 4")
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._grad_owned = False
        self._parents = ()
        self._backward_fn = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def backward(self):
        """Reverse-mode sweep from this (scalar) tensor.

        Interior gradients and closures are freed as soon as they are
        consumed; only leaves keep grads.  The graph is spent afterwards.
        """
        if self.data.size != 1:
            raise ShapeMismatch("backward requires a scalar output")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)
            if node._parents:
                node.grad = None
                node._backward_fn = None
                node._parents = ()

    def __repr__(self):
        return f"Tensor(shape={self.shape}, grad={self.requires_grad})"


class SpectralWeights(_GradMixin):
    """Complex multiplier block for the retained low-frequency modes.

    Shape (c_in, c_out, m, m): the first mode index spans the nonnegative
    low-frequency rows 0..m-1, the second the m lowest-|frequency|
    (wrap-around) columns.
    """

    __slots__ = ("data", "requires_grad", "grad", "_grad_owned", "name")

    def __init__(self, data, requires_grad: bool = True, name: str = ""):
        self.data = np.asarray(data)
        if self.data.ndim != 4 or self.data.shape[2] != self.data.shape[3]:
            raise ShapeMismatch("spectral weights must have shape (c_in, c_out, m, m)")
        if not np.iscomplexobj(self.data):
            raise ShapeMismatch("spectral weights must be complex")
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._grad_owned = False
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def modes(self) -> int:
        return self.data.shape[2]


def _toposort(root: Tensor):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if isinstance(p, Tensor):
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    if isinstance(x, (int, float)):
        # float32 scalars avoid silently promoting float32 graphs
        return Tensor(np.float32(x))
    return Tensor(np.asarray(x))


def _tracks(*tensors) -> bool:
    return _GRAD_ENABLED and any(t.requires_grad for t in tensors)


def _make(data, parents, backward_fn, track: bool) -> Tensor:
    out = Tensor(data, requires_grad=track)
    if track:
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and grad.shape[ax] != 1:
            grad = grad.sum(axis=ax, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementary ops

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    track = _tracks(a, b)

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward, track)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    track = _tracks(a, b)

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), backward, track)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    track = _tracks(a, b)

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward, track)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    track = _tracks(a)

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * c)

    return _make(a.data * np.asarray(c, dtype=a.dtype), (a,), backward, track)


def matmul(a, b) -> Tensor:
    """Batched matrix product over the last two axes."""
    a, b = as_tensor(a), as_tensor(b)
    track = _tracks(a, b)

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a.accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b.accumulate(_unbroadcast(gb, b.shape))

    return _make(np.matmul(a.data, b.data), (a, b), backward, track)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    track = _tracks(a)
    old = a.shape

    def backward(g):
        if a.requires_grad:
            a.accumulate(g.reshape(old))

    return _make(a.data.reshape(shape), (a,), backward, track)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    track = _tracks(a)
    inverse = np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a.accumulate(np.transpose(g, inverse))

    return _make(np.transpose(a.data, axes), (a,), backward, track)


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    track = _tracks(*tensors)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        pieces = np.split(g, splits, axis=axis)
        for t, piece in zip(tensors, pieces):
            if t.requires_grad:
                t.accumulate(piece)

    return _make(np.concatenate([t.data for t in tensors], axis=axis),
                 tensors, backward, track)


def sum_all(a) -> Tensor:
    a = as_tensor(a)
    track = _tracks(a)

    def backward(g):
        if a.requires_grad:
            a.accumulate(np.broadcast_to(g, a.shape).astype(a.dtype, copy=False))

    return _make(np.asarray(a.data.sum()), (a,), backward, track)


def mean_all(a) -> Tensor:
    a = as_tensor(a)
    track = _tracks(a)
    n = a.data.size

    def backward(g):
        if a.requires_grad:
            a.accumulate(np.broadcast_to(g / n, a.shape).astype(a.dtype, copy=False))

    return _make(np.asarray(a.data.mean()), (a,), backward, track)


_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def gelu(a) -> Tensor:
    """GELU in its tanh form; the cached tanh makes backward polynomial."""
    a = as_tensor(a)
    track = _tracks(a)
    x = a.data
    u = _GELU_C * (x + _GELU_A * x * x * x)
    t = np.tanh(u)

    def backward(g):
        if a.requires_grad:
            du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
            a.accumulate(g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du))

    return _make(0.5 * x * (1.0 + t), (a,), backward, track)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    track = _tracks(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(z, out=z)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            inner = (g * s).sum(axis=axis, keepdims=True)
            a.accumulate(s * (g - inner))

    return _make(s, (a,), backward, track)


# ---------------------------------------------------------------------------
# structured ops (rank-4 activations are channel-last: B, H, W, C)

def film_modulate(x, gamma, beta) -> Tensor:
    """Per-channel affine modulation: gamma * x + beta.

    ``gamma``/``beta`` carry shape (B, C) or (C,); they broadcast over the
    spatial axes of x (B, H, W, C).
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.data.ndim != 4:
        raise ShapeMismatch("film_modulate expects rank-4 input")
    if gamma.shape != beta.shape:
        raise ShapeMismatch("gamma and beta must share a shape")
    if gamma.shape[-1] != x.shape[-1]:
        raise ShapeMismatch(f"channel mismatch: {gamma.shape} vs {x.shape}")
    track = _tracks(x, gamma, beta)
    gd = gamma.data.reshape((-1, 1, 1, x.shape[-1]))
    bd = beta.data.reshape((-1, 1, 1, x.shape[-1]))

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * gd)
        if gamma.requires_grad:
            gg = (g * x.data).sum(axis=(1, 2))
            gamma.accumulate(gg.sum(axis=0) if gamma.data.ndim == 1 else gg)
        if beta.requires_grad:
            gb = g.sum(axis=(1, 2))
            beta.accumulate(gb.sum(axis=0) if beta.data.ndim == 1 else gb)

    return _make(x.data * gd + bd, (x, gamma, beta), backward, track)


def instance_norm(x, eps: float = 1e-5) -> Tensor:
    """Normalize each (sample, channel) plane to zero mean, unit variance."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeMismatch("instance_norm expects rank-4 input")
    track = _tracks(x)
    mu = x.data.mean(axis=(1, 2), keepdims=True)
    var = x.data.var(axis=(1, 2), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv

    def backward(g):
        if x.requires_grad:
            gm = g.mean(axis=(1, 2), keepdims=True)
            gx = (g * xhat).mean(axis=(1, 2), keepdims=True)
            x.accumulate(inv * (g - gm - xhat * gx))

    return _make(xhat.astype(x.dtype, copy=False), (x,), backward, track)


def avg_pool2(x) -> Tensor:
    """2x2 average pooling with stride 2."""
    x = as_tensor(x)
    b, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch("avg_pool2 needs even spatial dims")
    track = _tracks(x)
    pooled = x.data.reshape(b, h // 2, 2, w // 2, 2, c).mean(axis=(2, 4))

    def backward(g):
        if x.requires_grad:
            up = np.repeat(np.repeat(g, 2, axis=1), 2, axis=2)
            x.accumulate(up * np.asarray(0.25, dtype=g.dtype))

    return _make(pooled.astype(x.dtype, copy=False), (x,), backward, track)


def upsample_nearest2(x) -> Tensor:
    """Nearest-neighbor 2x upsampling."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeMismatch("upsample expects rank-4 input")
    track = _tracks(x)
    up = np.repeat(np.repeat(x.data, 2, axis=1), 2, axis=2)

    def backward(g):
        if x.requires_grad:
            b, h2, w2, c = g.shape
            x.accumulate(g.reshape(b, h2 // 2, 2, w2 // 2, 2, c).sum(axis=(2, 4)))

    return _make(up, (x,), backward, track)


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int):
    b, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    s0, s1, s2, s3 = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp, shape=(b, ho, wo, kh, kw, c),
        strides=(s0, s1 * stride, s2 * stride, s1, s2, s3), writeable=False)
    # channel-last keeps the innermost copy runs contiguous
    cols = np.ascontiguousarray(windows).reshape(b * ho * wo, kh * kw * c)
    return cols, ho, wo


def conv2d(x, w, bias=None, stride: int = 1, padding: int = 1) -> Tensor:
    """2-D convolution; kernel laid out (kh, kw, c_in, c_out), zero padding."""
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeMismatch("conv2d expects rank-4 input and kernel")
    if x.shape[-1] != w.shape[2]:
        raise ShapeMismatch(f"channel mismatch {x.shape} vs kernel {w.shape}")
    bias = as_tensor(bias) if bias is not None else None
    track = _tracks(*([x, w] + ([bias] if bias is not None else [])))

    kh, kw, c_in, c_out = w.shape
    b = x.shape[0]
    cols, ho, wo = _im2col(x.data, kh, kw, stride, padding)
    wmat = w.data.reshape(kh * kw * c_in, c_out)
    out = (cols @ wmat).reshape(b, ho, wo, c_out)
    if bias is not None:
        out = out + bias.data
    if not track:
        del cols  # inference never revisits the window buffer

    def backward(g):
        gmat = g.reshape(-1, c_out)
        if bias is not None and bias.requires_grad:
            bias.accumulate(gmat.sum(axis=0))
        if w.requires_grad:
            w.accumulate((cols.T @ gmat).reshape(w.shape))
        if x.requires_grad:
            if stride == 1:
                # input gradient = correlation with the spatially flipped,
                # in/out-swapped kernel (a second GEMM conv)
                wt = w.data[::-1, ::-1].transpose(0, 1, 3, 2)
                gcols, gho, gwo = _im2col(g, kh, kw, 1, kh - 1 - padding)
                dx = (gcols @ wt.reshape(kh * kw * c_out, c_in))
                x.accumulate(dx.reshape(b, gho, gwo, c_in))
            else:
                dcols = (gmat @ wmat.T).reshape(b, ho, wo, kh, kw, c_in)
                dxp = np.zeros((b, x.shape[1] + 2 * padding,
                                x.shape[2] + 2 * padding, c_in), dtype=g.dtype)
                for i in range(kh):
                    for j in range(kw):
                        dxp[:, i:i + stride * ho:stride,
                            j:j + stride * wo:stride] += dcols[:, :, :, i, j]
                x.accumulate(dxp[:, padding:padding + x.shape[1],
                                 padding:padding + x.shape[2]])

    parents = (x, w) if bias is None else (x, w, bias)
    return _make(out, parents, backward, track)


def channel_linear(x, w, bias=None) -> Tensor:
    """Pointwise channel map on the last axis: (B, H, W, C_in) -> (..., C_out)."""
    x, w = as_tensor(x), as_tensor(w)
    if w.data.ndim != 2:
        raise ShapeMismatch("channel_linear expects a rank-2 weight")
    if w.shape[0] != x.shape[-1]:
        raise ShapeMismatch(f"channel mismatch {x.shape} vs weight {w.shape}")
    bias = as_tensor(bias) if bias is not None else None
    track = _tracks(*([x, w] + ([bias] if bias is not None else [])))
    out = x.data @ w.data
    if bias is not None:
        out = out + bias.data

    def backward(g):
        if bias is not None and bias.requires_grad:
            bias.accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))
        if w.requires_grad:
            c_in, c_out = w.shape
            w.accumulate(x.data.reshape(-1, c_in).T @ g.reshape(-1, c_out))
        if x.requires_grad:
            x.accumulate(g @ w.data.T)

    parents = (x, w) if bias is None else (x, w, bias)
    return _make(out, parents, backward, track)


def linear(x, w, bias=None) -> Tensor:
    """Affine map on the last axis: (..., D) @ (D, K) + bias."""
    out = matmul(x, w)
    if bias is not None:
        out = add(out, bias)
    return out


def _mode_cols(w_dim: int, m: int) -> np.ndarray:
    half = (m + 1) // 2
    return np.concatenate([np.arange(half), np.arange(w_dim - (m - half), w_dim)])


def spectral_conv2d(x, w: SpectralWeights) -> Tensor:
    """Multiply the retained low-frequency FFT block by complex weights.

    Forward: 2-D FFT over the spatial axes of x (B, H, W, C), contract
    channels against ``w`` on the block of rows 0..m-1 and the m
    lowest-|frequency| (wrapped) columns, zero every other mode, inverse
    FFT, and keep the real part.  The derivative flows through the FFT as
    its linear adjoint.
    """
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeMismatch("spectral_conv2d expects rank-4 input")
    b, h, wdim, c = x.shape
    c_in, c_out, m, _ = w.shape
    if c != c_in:
        raise ShapeMismatch(f"channel mismatch: input {c}, weights {c_in}")
    if h < 2 * m or wdim < 2 * m:
        raise ModeOverflow(f"m={m} needs spatial dims >= {2 * m}, got {h}x{wdim}")
    track = _GRAD_ENABLED and (x.requires_grad or w.requires_grad)

    cols = _mode_cols(wdim, m)
    # separable FFT: real-to-complex along H (inputs are always real), then
    # transform only the m retained rows along W
    block = scipy.fft.fft(scipy.fft.rfft(x.data, axis=1)[:, :m], axis=2)[:, :, cols]
    out_block = np.einsum("bxyi,ioxy->bxyo", block, w.data, optimize=True)

    def _expand(blk, channels):
        tmp = np.zeros((b, m, wdim, channels), dtype=blk.dtype)
        tmp[:, :, cols] = blk
        rows = scipy.fft.ifft(tmp, axis=2)
        spec = np.zeros((b, h, wdim, channels), dtype=blk.dtype)
        spec[:, :m] = rows
        return scipy.fft.ifft(spec, axis=1).real

    y = _expand(out_block, c_out).astype(x.dtype, copy=False)

    def backward(g):
        n = h * wdim
        g_block = scipy.fft.fft(scipy.fft.rfft(g, axis=1)[:, :m],
                                axis=2)[:, :, cols] / n
        if w.requires_grad:
            w.accumulate(np.einsum("bxyi,bxyo->ioxy", np.conj(block), g_block,
                                   optimize=True))
        if x.requires_grad:
            gx_block = np.einsum("bxyo,ioxy->bxyi", g_block, np.conj(w.data),
                                 optimize=True)
            x.accumulate((n * _expand(gx_block, c_in)).astype(x.dtype, copy=False))

    return _make(y, (x, w), backward, track)


# ---------------------------------------------------------------------------
# gradient verification

class GradCheckReport:
    """Outcome of comparing reverse-mode gradients to central differences."""

    def __init__(self, per_param: dict[str, float], tolerance: float):
        self.per_param = per_param
        self.tolerance = tolerance
        self.max_rel_error = max(per_param.values()) if per_param else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def __repr__(self):
        status = "ok" if self.passed else "FAIL"
        return f"GradCheckReport({status}, max_rel_error={self.max_rel_error:.3e})"


def grad_check(build_fn, params, tolerance: float = 1e-4,
               step: float = 1e-5) -> GradCheckReport:
    """Compare reverse-mode gradients against central finite differences.

    ``build_fn`` must construct a scalar output tensor from ``params``
    (a sequence of Tensor / SpectralWeights).  Every entry of every
    parameter is perturbed by ``step`` in both directions; complex
    parameters are checked separately along their real and imaginary axes.
    Relative error uses the floor max(|a|, |b|, 1), so parameters should be
    scaled for O(1) gradients.  Run in float64; float32 drowns in noise.
    """
    for p in params:
        p.zero_grad()
    out = build_fn()
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]
    for p in params:
        p.zero_grad()

    def eval_scalar():
        with no_grad():
            return float(build_fn().data)

    per_param: dict[str, float] = {}
    for pi, p in enumerate(params):
        name = p.name or f"param{pi}"
        worst = 0.0
        flat = p.data.reshape(-1)
        components = (1.0, 1.0j) if np.iscomplexobj(p.data) else (1.0,)
        for i in range(flat.size):
            orig = flat[i]
            for comp in components:
                flat[i] = orig + comp * step
                f_plus = eval_scalar()
                flat[i] = orig - comp * step
                f_minus = eval_scalar()
                flat[i] = orig
                fd = (f_plus - f_minus) / (2.0 * step)
                a = analytic[pi].reshape(-1)[i]
                ad = a.real if comp == 1.0 else a.imag
                rel = abs(ad - fd) / max(abs(ad), abs(fd), 1.0)
                worst = max(worst, rel)
        per_param[name] = worst
    return GradCheckReport(per_param, tolerance)
