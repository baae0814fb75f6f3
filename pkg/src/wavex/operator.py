"""Spectral neural operator: lower-frequency training, direct extrapolation
to higher spectral values, and extraction of the coarse log-amplitude
anchor.

The operator maps broadcast input channels to three output channels
(magnitude, sin phase, cos phase).  The sine/cosine pair sidesteps the
wrap discontinuity a raw phase channel would hit at +-pi; predictions are
reprojected onto the unit circle before a complex field is assembled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from .dataio import Dataset
from .errors import FrozenModel, NotFrozen, ShapeMismatch
from .field import ComplexField, Domain

ANCHOR_EPS = 1e-6


@dataclass(frozen=True)
class OperatorConfig:
    """Desk-scale defaults; paper-scale values stay reachable via config."""

    layers: int = 4
    modes: int = 8
    width: int = 16
    lift_width: int = 32
    epochs: int = 30
    lr: float = 2e-3
    batch: int = 16
    seed: int = 0

    def __post_init__(self):
        if min(self.layers, self.modes, self.width) < 1:
            raise ValueError("layers, modes, and width must be >= 1")


@dataclass
class NormStats:
    """Per-channel unit-Gaussian normalization for inputs and targets."""

    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: np.ndarray
    target_std: np.ndarray

    def __post_init__(self):
        if np.any(self.input_std <= 0) or np.any(self.target_std <= 0):
            raise ValueError("standard deviations must be positive")


def encode_targets(dataset: Dataset) -> np.ndarray:
    """(magnitude, sin, cos) target channels for every sample, float32."""
    re = dataset.re.astype(np.float64)
    im = dataset.im.astype(np.float64)
    mag = np.hypot(re, im)
    safe = np.where(mag == 0.0, 1.0, mag)
    sin = np.where(mag == 0.0, 0.0, im / safe)
    cos = np.where(mag == 0.0, 1.0, re / safe)
    return np.stack([mag, sin, cos], axis=1).astype(np.float32)


def compute_norm_stats(dataset: Dataset) -> NormStats:
    targets = encode_targets(dataset)
    floor = 1e-6
    return NormStats(
        input_mean=dataset.inputs.mean(axis=(0, 2, 3)).astype(np.float64),
        input_std=np.maximum(dataset.inputs.std(axis=(0, 2, 3)), floor).astype(np.float64),
        target_mean=targets.mean(axis=(0, 2, 3)).astype(np.float64),
        target_std=np.maximum(targets.std(axis=(0, 2, 3)), floor).astype(np.float64),
    )


def coordinate_channels(h: int, w: int) -> np.ndarray:
    """Fixed (x, y) position channels in [0, 1], shape (H, W, 2).

    Broadcast scalar inputs carry no spatial content, so without a
    positional grid the spectral layers could only ever emit constant
    fields; appending coordinates is the standard cure.
    """
    x = (np.arange(w, dtype=np.float32) + 0.5) / w
    y = (np.arange(h, dtype=np.float32) + 0.5) / h
    xx, yy = np.meshgrid(x, y, indexing="xy")
    return np.stack([xx, yy], axis=-1)


class OperatorModel(nn.Module):
    """Lift, L spectral blocks (spectral conv + pointwise linear + GELU),
    and a projection head back to the three target channels.  Two fixed
    coordinate channels are appended to every input."""

    def __init__(self, in_channels: int, cfg: OperatorConfig):
        rng = np.random.default_rng(cfg.seed)
        self.lift_in = nn.ChannelLinear(in_channels + 2, cfg.lift_width, rng)
        self.lift_out = nn.ChannelLinear(cfg.lift_width, cfg.width, rng)
        self.spectral = [nn.SpectralConv2d(cfg.width, cfg.width, cfg.modes, rng)
                         for _ in range(cfg.layers)]
        self.pointwise = [nn.ChannelLinear(cfg.width, cfg.width, rng)
                          for _ in range(cfg.layers)]
        self.proj_in = nn.ChannelLinear(cfg.width, cfg.lift_width, rng)
        self.proj_out = nn.ChannelLinear(cfg.lift_width, 3, rng)
        # non-parameter state is set after construction
        self.config = cfg
        self.in_channels = in_channels
        self.norm: NormStats | None = None
        self.frozen = False

    def core(self, x: ad.Tensor) -> ad.Tensor:
        """Channel-last forward: x is (B, H, W, C_in), output (B, H, W, 3)."""
        b, hgt, wid, _ = x.shape
        coords = np.broadcast_to(coordinate_channels(hgt, wid), (b, hgt, wid, 2))
        h = ad.concat([x, ad.Tensor(np.ascontiguousarray(coords))], axis=-1)
        h = self.lift_out(ad.gelu(self.lift_in(h)))
        for spec, pw in zip(self.spectral, self.pointwise):
            h = ad.gelu(ad.add(spec(h), pw(h)))
        return self.proj_out(ad.gelu(self.proj_in(h)))


def build_operator(in_channels: int, cfg: OperatorConfig) -> OperatorModel:
    return OperatorModel(in_channels, cfg)


def _normalize_inputs(model: OperatorModel, channels: np.ndarray) -> np.ndarray:
    stats = model.norm
    mean = stats.input_mean[None, :, None, None]
    std = stats.input_std[None, :, None, None]
    return ((channels - mean) / std).astype(np.float32)


def predict_channels(model: OperatorModel, channels: np.ndarray) -> np.ndarray:
    """Denormalized (magnitude, sin, cos) prediction for a batch of inputs."""
    if model.norm is None:
        raise ShapeMismatch("model has no normalization stats; train it first")
    channels = np.asarray(channels, dtype=np.float32)
    squeeze = channels.ndim == 3
    if squeeze:
        channels = channels[None]
    if channels.shape[1] != model.in_channels:
        raise ShapeMismatch(f"expected {model.in_channels} input channels, "
                            f"got {channels.shape[1]}")
    normalized = _normalize_inputs(model, channels).transpose(0, 2, 3, 1)
    with ad.no_grad():
        out = model.core(ad.Tensor(np.ascontiguousarray(normalized))).data
    out = out.transpose(0, 3, 1, 2)
    out = (out.astype(np.float64) * model.norm.target_std[None, :, None, None]
           + model.norm.target_mean[None, :, None, None])
    return out[0] if squeeze else out


def channels_to_field(pred: np.ndarray, nu: float, env=None,
                      domain: Domain = Domain.SIMPLEWAVE,
                      tag: str | None = None) -> ComplexField:
    """Assemble a complex field from (magnitude, sin, cos) channels.

    The magnitude is clamped to be nonnegative and the (sin, cos) pair is
    projected back onto the unit circle; cells where both vanish fall back
    to phase 0.
    """
    mag = np.maximum(pred[0], 0.0)
    sin, cos = pred[1], pred[2]
    norm = np.hypot(sin, cos)
    sin = np.where(norm < 1e-12, 0.0, sin / np.where(norm < 1e-12, 1.0, norm))
    cos = np.where(norm < 1e-12, 1.0, cos / np.where(norm < 1e-12, 1.0, norm))
    env = dict(env or {})
    if tag:
        env["prediction"] = tag
    return ComplexField(re=mag * cos, im=mag * sin, nu=float(nu), env=env,
                        domain=domain)


def forward(model: OperatorModel, channels: np.ndarray, nu: float | None = None,
            env=None, domain: Domain = Domain.SIMPLEWAVE) -> ComplexField:
    """Full prediction for one sample's input channels.

    ``nu`` defaults to the value broadcast in the second input channel,
    which is the [env, spectral] convention both generators use.
    """
    pred = predict_channels(model, channels)
    if nu is None:
        nu = float(np.asarray(channels)[1].mean())
    return channels_to_field(pred, nu, env=env, domain=domain)


def train_operator(model: OperatorModel, dataset: Dataset, epochs: int,
                   lr: float, batch: int, seed: int,
                   freeze_after: bool = False) -> list[float]:
    """Adam on the MSE over normalized target channels; returns the
    per-epoch mean training loss.

    Raises
    ------
    FrozenModel
        If the model has been frozen by an earlier training stage.
    """
    from .optim import Adam

    if model.frozen:
        raise FrozenModel("operator is frozen; clone it to fine-tune")
    if model.norm is None:
        model.norm = compute_norm_stats(dataset)

    inputs = np.ascontiguousarray(
        _normalize_inputs(model, dataset.inputs).transpose(0, 2, 3, 1))
    targets = ((encode_targets(dataset).astype(np.float64)
                - model.norm.target_mean[None, :, None, None])
               / model.norm.target_std[None, :, None, None]).astype(np.float32)
    targets = np.ascontiguousarray(targets.transpose(0, 2, 3, 1))

    params = model.parameters()
    opt = Adam(params, lr=lr)
    rng = np.random.default_rng(seed)
    n = len(dataset)
    trace = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, batch):
            idx = perm[start:start + batch]
            opt.zero_grad()
            pred = model.core(ad.Tensor(inputs[idx]))
            diff = ad.sub(pred, ad.Tensor(targets[idx]))
            loss = ad.mean_all(ad.mul(diff, diff))
            loss.backward()
            opt.step()
            losses.append(float(loss.data))
        trace.append(float(np.mean(losses)))
    if freeze_after:
        model.frozen = True
    return trace


def train_lf(model: OperatorModel, lf_train: Dataset,
             cfg: OperatorConfig | None = None) -> list[float]:
    """Train on the lower-frequency split and freeze the model."""
    cfg = cfg or model.config
    return train_operator(model, lf_train, epochs=cfg.epochs, lr=cfg.lr,
                          batch=cfg.batch, seed=cfg.seed, freeze_after=True)


def clone_unfrozen(model: OperatorModel) -> OperatorModel:
    """Deep copy with the frozen flag cleared (fine-tuning entry point)."""
    twin = OperatorModel(model.in_channels, model.config)
    for (_, src), (_, dst) in zip(model.named_parameters(), twin.named_parameters()):
        dst.data = src.data.copy()
    twin.norm = model.norm
    twin.frozen = False
    return twin


def extrapolate(model: OperatorModel, channels: np.ndarray, nu: float,
                env=None, domain: Domain = Domain.SIMPLEWAVE) -> ComplexField:
    """Query the frozen operator at a spectral value, overriding the
    broadcast spectral channel.

    Raises
    ------
    NotFrozen
        If called before the lower-frequency training has been frozen.
    """
    if not model.frozen:
        raise NotFrozen("freeze the operator before extrapolating")
    channels = np.array(channels, dtype=np.float32, copy=True)
    channels[1] = nu
    pred = predict_channels(model, channels)
    return channels_to_field(pred, nu, env=env, domain=domain, tag="coarse")


def coarse_anchor(model: OperatorModel, channels: np.ndarray, nu: float,
                  eps: float = ANCHOR_EPS) -> np.ndarray:
    """Log-magnitude of the extrapolated prediction: log(|u| + eps).

    Finite everywhere; the eps floor maps zero magnitude to log(eps).
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    u = extrapolate(model, channels, nu)
    return np.log(np.hypot(u.re, u.im) + eps)
