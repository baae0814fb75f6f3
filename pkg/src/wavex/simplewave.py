"""Deterministic two-path wave-field simulator on a square domain.

A direct path from a fixed source and a reflected path from its mirror
image are combined with fixed amplitude envelopes and smooth travel-time
perturbations.  Sample-to-sample variation comes only from the propagation
speed ``v`` and the queried spectral value ``nu``; all geometry and
envelope constants are fixed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import Dataset
from .errors import InvalidFrequency, InvalidSpeed
from .field import ComplexField, Domain

LF_FREQS = (1.0, 2.0, 3.0, 4.0)
HF_FREQS = (4.8, 6.0, 8.0)


@dataclass(frozen=True)
class SimpleWaveConfig:
    """Constants of the two-path simulator.

    Defaults reproduce the standard benchmark; ``eps`` regularizes the
    reflected-path envelope at its mirror source (which lies outside the
    domain, so the choice barely matters numerically).
    """

    grid: int = 64
    lx: float = 10.0
    ly: float = 10.0
    source: tuple[float, float] = (2.0, 5.0)
    mirror: tuple[float, float] = (2.0, -5.0)
    reflection: float = 0.18      # lambda
    delay_bias: float = 0.35      # d
    perturb_strength: float = 0.08  # eta
    alpha1: float = 0.0
    c1: float = 0.8
    p1: float = 0.3
    alpha2: float = 0.12
    eps: float = 1e-6
    speed_range: tuple[float, float] = (0.8, 1.2)

    def __post_init__(self):
        if not 0.0 <= self.reflection < 1.0:
            raise ValueError("reflection coefficient must lie in [0, 1)")
        if self.perturb_strength < 0:
            raise ValueError("perturbation strength must be nonnegative")
        if not 0 < self.speed_range[0] <= self.speed_range[1]:
            raise ValueError("speed range must be positive and ordered")


def grid_coords(cfg: SimpleWaveConfig) -> tuple[np.ndarray, np.ndarray]:
    """Cell-center coordinate grids (X, Y), each of shape (grid, grid).

    Cell centers sit at ``(j + 0.5) * lx / grid``; the source never
    coincides with a sample point.
    """
    n = cfg.grid
    x = (np.arange(n) + 0.5) * cfg.lx / n
    y = (np.arange(n) + 0.5) * cfg.ly / n
    return np.meshgrid(x, y, indexing="xy")


def path_distances(cfg: SimpleWaveConfig, coords=None) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean distances R1 (to the source) and R2 (to the mirror source)."""
    x, y = grid_coords(cfg) if coords is None else coords
    r1 = np.hypot(x - cfg.source[0], y - cfg.source[1])
    r2 = np.hypot(x - cfg.mirror[0], y - cfg.mirror[1])
    return r1, r2


def perturbation_fields(cfg: SimpleWaveConfig, coords=None) -> tuple[np.ndarray, np.ndarray]:
    """The fixed smooth perturbation fields (q1, q2).

    Both are short sums of sinusoids of the coordinates; they are identical
    across samples and bounded by 1 in magnitude.
    """
    x, y = grid_coords(cfg) if coords is None else coords
    two_pi = 2.0 * np.pi
    q1 = (0.45 * np.sin(two_pi * x / cfg.lx)
          + 0.35 * np.cos(two_pi * y / cfg.ly)
          + 0.20 * np.sin(two_pi * (x + 0.6 * y) / cfg.lx))
    q2 = (0.40 * np.cos(two_pi * (x - 0.3 * y) / cfg.lx)
          + 0.30 * np.sin(two_pi * y / cfg.ly)
          + 0.15 * np.cos(two_pi * (x + y) / cfg.ly))
    return q1, q2


def travel_times(cfg: SimpleWaveConfig, v: float, coords=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-path travel-time grids (tau1, tau2) for propagation speed ``v``.

    tau1 = (R1 / v) (1 + eta q1);  tau2 = ((R2 + d) / v) (1 + eta q2).

    Raises
    ------
    InvalidSpeed
        If ``v`` is not positive.
    """
    if not v > 0:
        raise InvalidSpeed(f"speed must be positive, got {v}")
    r1, r2 = path_distances(cfg, coords)
    q1, q2 = perturbation_fields(cfg, coords)
    tau1 = (r1 / v) * (1.0 + cfg.perturb_strength * q1)
    tau2 = ((r2 + cfg.delay_bias) / v) * (1.0 + cfg.perturb_strength * q2)
    return tau1, tau2


def envelopes(cfg: SimpleWaveConfig, coords=None) -> tuple[np.ndarray, np.ndarray]:
    """Fixed amplitude envelopes (a1, a2); strictly positive everywhere."""
    r1, r2 = path_distances(cfg, coords)
    a1 = np.exp(-cfg.alpha1 * r1) / (r1 + cfg.c1) ** cfg.p1
    a2 = np.exp(-cfg.alpha2 * r2) / np.sqrt(r2 + cfg.eps)
    return a1, a2


@dataclass(frozen=True)
class SimpleWaveSample:
    """Input channels [v, nu] broadcast over the grid, plus the target field."""

    input_channels: np.ndarray  # (2, H, W)
    field: ComplexField


def generate(cfg: SimpleWaveConfig, v: float, nu: float) -> SimpleWaveSample:
    """One deterministic sample of the two-path field.

    u = a1 exp(i 2 pi nu tau1) + lambda a2 exp(i 2 pi nu tau2)

    Raises
    ------
    InvalidSpeed
        If ``v`` falls outside the configured speed range.
    InvalidFrequency
        If ``nu`` is not positive.
    """
    lo, hi = cfg.speed_range
    if not lo <= v <= hi:
        raise InvalidSpeed(f"speed {v} outside configured range [{lo}, {hi}]")
    if not nu > 0:
        raise InvalidFrequency(f"nu must be positive, got {nu}")

    tau1, tau2 = travel_times(cfg, v)
    a1, a2 = envelopes(cfg)
    omega = 2.0 * np.pi * nu
    u = a1 * np.exp(1j * omega * tau1) + cfg.reflection * a2 * np.exp(1j * omega * tau2)

    n = cfg.grid
    channels = np.stack([np.full((n, n), v, dtype=np.float32),
                         np.full((n, n), nu, dtype=np.float32)])
    fld = ComplexField(re=u.real, im=u.imag, nu=float(nu), env={"v": float(v)},
                       domain=Domain.SIMPLEWAVE)
    return SimpleWaveSample(input_channels=channels, field=fld)


def generate_dataset(cfg: SimpleWaveConfig, seed: int, freqs=LF_FREQS + HF_FREQS,
                     n_per_freq: int = 250) -> Dataset:
    """Cross product of seeded random speeds with the requested frequencies.

    ``n_per_freq`` speeds are drawn once from ``U[speed_range]`` using a
    PCG64 generator seeded with ``seed``, then every (speed, frequency)
    pair yields one sample.  Sharing the speeds across frequencies keeps a
    common environment available at every spectral value, which the
    similarity diagnostics rely on.  Sample order is frequency-major.
    """
    freqs = tuple(float(f) for f in freqs)
    if len(freqs) == 0:
        raise ValueError("freqs must be nonempty")
    if n_per_freq < 1:
        raise ValueError("n_per_freq must be at least 1")

    rng = np.random.default_rng(seed)  # PCG64
    lo, hi = cfg.speed_range
    speeds = rng.uniform(lo, hi, size=n_per_freq)

    n_total = len(freqs) * n_per_freq
    g = cfg.grid
    nus = np.empty(n_total)
    env = np.empty((n_total, 1))
    inputs = np.empty((n_total, 2, g, g), dtype=np.float32)
    re = np.empty((n_total, g, g), dtype=np.float32)
    im = np.empty((n_total, g, g), dtype=np.float32)

    i = 0
    for f in freqs:
        for v in speeds:
            s = generate(cfg, float(v), f)
            nus[i] = f
            env[i, 0] = v
            inputs[i] = s.input_channels
            re[i] = s.field.re
            im[i] = s.field.im
            i += 1
    return Dataset(domain=Domain.SIMPLEWAVE, nus=nus, env=env,
                   inputs=inputs, re=re, im=im)
