"""Parameterized layers on top of the autodiff core.

Spatial activations are channel-last (B, H, W, C).  Initialization follows
the recorded conventions: conv/linear weights are uniform in
+-sqrt(1/fan_in); spectral weights are uniform complex scaled by
1/(c_in*c_out).  Every layer draws from the generator it is given, so a
model seed fully determines the parameter bytes.
"""
from __future__ import annotations

import numpy as np

from . import autodiff as ad

DTYPE = np.float32
CDTYPE = np.complex64


class Module:
    """Parameter container; children are discovered from attributes."""

    def parameters(self) -> list:
        return [p for _, p in self.named_parameters()]

    def named_parameters(self, prefix: str = "") -> list[tuple[str, object]]:
        out = []
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}" if prefix else attr
            out.extend(_collect(name, value))
        return out

    def zero_grads(self):
        for p in self.parameters():
            p.zero_grad()


def _collect(name, value):
    if isinstance(value, (ad.Tensor, ad.SpectralWeights)):
        return [(name, value)] if value.requires_grad else []
    if isinstance(value, Module):
        return value.named_parameters(prefix=f"{name}.")
    if isinstance(value, (list, tuple)):
        out = []
        for i, item in enumerate(value):
            out.extend(_collect(f"{name}.{i}", item))
        return out
    return []


def _uniform(rng, shape, fan_in):
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(DTYPE)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, rng, kernel: int = 3,
                 stride: int = 1, padding: int = 1):
        fan_in = c_in * kernel * kernel
        self.weight = ad.Tensor(_uniform(rng, (kernel, kernel, c_in, c_out), fan_in),
                                requires_grad=True)
        self.bias = ad.Tensor(_uniform(rng, (c_out,), fan_in), requires_grad=True)
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return ad.conv2d(x, self.weight, self.bias, stride=self.stride,
                         padding=self.padding)


class ChannelLinear(Module):
    """Pointwise (1x1) channel map."""

    def __init__(self, c_in: int, c_out: int, rng):
        self.weight = ad.Tensor(_uniform(rng, (c_in, c_out), c_in), requires_grad=True)
        self.bias = ad.Tensor(_uniform(rng, (c_out,), c_in), requires_grad=True)

    def __call__(self, x):
        return ad.channel_linear(x, self.weight, self.bias)


class Dense(Module):
    """Affine map on the last axis of a rank-2 tensor."""

    def __init__(self, d_in: int, d_out: int, rng):
        self.weight = ad.Tensor(_uniform(rng, (d_in, d_out), d_in), requires_grad=True)
        self.bias = ad.Tensor(_uniform(rng, (d_out,), d_in), requires_grad=True)

    def __call__(self, x):
        return ad.linear(x, self.weight, self.bias)


class SpectralConv2d(Module):
    """Learned multipliers on the retained low-frequency FFT block."""

    def __init__(self, c_in: int, c_out: int, modes: int, rng):
        scale = 1.0 / (c_in * c_out)
        w = scale * (rng.random((c_in, c_out, modes, modes))
                     + 1j * rng.random((c_in, c_out, modes, modes)))
        self.weight = ad.SpectralWeights(w.astype(CDTYPE))

    def __call__(self, x):
        return ad.spectral_conv2d(x, self.weight)


class InstanceNorm(Module):
    """Instance normalization with a learned per-channel affine."""

    def __init__(self, channels: int, affine: bool = True):
        self.gamma = ad.Tensor(np.ones(channels, dtype=DTYPE), requires_grad=affine)
        self.beta = ad.Tensor(np.zeros(channels, dtype=DTYPE), requires_grad=affine)

    def __call__(self, x):
        return ad.film_modulate(ad.instance_norm(x), self.gamma, self.beta)


class SelfAttention2d(Module):
    """Multi-head self-attention over the spatial grid.

    With ``pool=2`` the attention operates on 2x average-pooled features
    and the mixed result is nearest-upsampled before the residual add;
    the N^2 score matrix shrinks 16-fold, which is what makes a mid-block
    attention affordable on one core.
    """

    def __init__(self, channels: int, heads: int, rng, pool: int = 1):
        if channels % heads:
            raise ValueError("channels must divide evenly into heads")
        if pool not in (1, 2):
            raise ValueError("pool must be 1 or 2")
        self.heads = heads
        self.pool = pool
        self.norm = InstanceNorm(channels)
        self.q = ChannelLinear(channels, channels, rng)
        self.k = ChannelLinear(channels, channels, rng)
        self.v = ChannelLinear(channels, channels, rng)
        self.out = ChannelLinear(channels, channels, rng)

    def __call__(self, x):
        xn = self.norm(x)
        if self.pool == 2:
            xn = ad.avg_pool2(xn)
        b, h, w, c = xn.shape
        d = c // self.heads
        n = h * w

        def heads_view(t):
            # (B, H, W, C) -> (B, heads, N, d)
            t = ad.reshape(t, (b, n, self.heads, d))
            return ad.transpose(t, (0, 2, 1, 3))

        # scale q instead of the N x N score matrix: heads*d values vs N^2
        q = heads_view(self.q(xn))
        q = ad.scale(q, 1.0 / np.sqrt(d))
        k = heads_view(self.k(xn))
        v = heads_view(self.v(xn))
        attn = ad.softmax(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))))
        mixed = ad.matmul(attn, v)  # (B, heads, N, d)
        mixed = ad.reshape(ad.transpose(mixed, (0, 2, 1, 3)), (b, h, w, c))
        out = self.out(mixed)
        if self.pool == 2:
            out = ad.upsample_nearest2(out)
        return ad.add(x, out)
