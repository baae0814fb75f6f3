"""Evaluation and diagnostic quantities for complex wave fields.

Covers the relative H1 error, amplitude-weighted phase coherence, the
amplitude/phase similarity measures used by the transfer diagnostics, the
relative similarity curves, and percentile bootstrap confidence intervals.
Everything here is pure and per-sample; aggregation happens in the
pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (EmptyInput, MissingReference, ZeroDenominator, ZeroNorm,
                     ZeroWeight)
from .field import ComplexField


def _as_complex(u) -> np.ndarray:
    if isinstance(u, ComplexField):
        return u.values
    return np.asarray(u)


def h1_error(pred, truth) -> float:
    """Relative complex H1 error between prediction and ground truth.

    sqrt((|e|^2 + |Dx e|^2 + |Dy e|^2) / (|u|^2 + |Dx u|^2 + |Dy u|^2))
    with e = pred - truth and Dx, Dy discrete forward differences.  The
    difference arrays lose one column/row; sums run over valid entries only.

    Raises
    ------
    ZeroDenominator
        If the truth field and both its difference fields vanish.
    """
    p = _as_complex(pred)
    u = _as_complex(truth)
    if p.shape != u.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {u.shape}")

    def sq(a):
        return float(np.sum(np.abs(a) ** 2))

    def dx(a):
        return a[:, 1:] - a[:, :-1]

    def dy(a):
        return a[1:, :] - a[:-1, :]

    e = p - u
    num = sq(e) + sq(dx(e)) + sq(dy(e))
    den = sq(u) + sq(dx(u)) + sq(dy(u))
    if den == 0.0:
        raise ZeroDenominator("truth field and its differences are identically zero")
    return float(np.sqrt(num / den))


def awpc(pred, truth) -> float:
    """Amplitude-weighted phase coherence, in [0, 1].

    | sum |u| exp(i (arg(pred) - arg(truth))) | / sum |u|, weighting each
    cell by the ground-truth magnitude.  Invariant to a global phase offset
    of the prediction.

    Raises
    ------
    ZeroWeight
        If the ground-truth magnitude sums to zero.
    """
    p = _as_complex(pred)
    u = _as_complex(truth)
    if p.shape != u.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {u.shape}")
    w = np.abs(u)
    total = float(w.sum())
    if total == 0.0:
        raise ZeroWeight("ground-truth amplitude sums to zero")
    delta = np.angle(p) - np.angle(u)
    return float(np.abs(np.sum(w * np.exp(1j * delta))) / total)


def amp_similarity(u_i, u_j) -> float:
    """Cosine similarity of the flattened amplitude grids.

    Raises
    ------
    ZeroNorm
        If either amplitude grid has zero norm.
    """
    a = np.abs(_as_complex(u_i)).ravel()
    b = np.abs(_as_complex(u_j)).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("amplitude grid with zero norm")
    return float(np.dot(a, b) / (na * nb))


def phase_similarity(u_i, u_j) -> float:
    """Phase-factor coherence |mean exp(i (phi_i - phi_j))|, in [0, 1]."""
    a = _as_complex(u_i)
    b = _as_complex(u_j)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    delta = np.angle(a) - np.angle(b)
    return float(np.abs(np.mean(np.exp(1j * delta))))


@dataclass(frozen=True)
class RelativeSimilarityCurve:
    """Per-frequency mean similarities normalized by a reference frequency."""

    freqs: tuple[float, ...]
    rel_amp: tuple[float, ...]
    rel_phase: tuple[float, ...]
    ref_freq: float
    ref_amp: float
    ref_phase: float


def relative_similarity_curve(preds_by_freq: dict, truths_by_freq: dict,
                              ref_freq: float) -> RelativeSimilarityCurve:
    """Prediction-vs-truth similarity, normalized at a reference frequency.

    For each frequency, S_A(pred, truth) and S_P(pred, truth) are averaged
    over the paired samples and divided by the same averages at
    ``ref_freq``.

    Raises
    ------
    MissingReference
        If ``ref_freq`` is absent from the inputs.
    """
    if ref_freq not in preds_by_freq or ref_freq not in truths_by_freq:
        raise MissingReference(f"reference frequency {ref_freq} not present")

    def mean_sims(f):
        preds, truths = preds_by_freq[f], truths_by_freq[f]
        sa = np.mean([amp_similarity(p, t) for p, t in zip(preds, truths)])
        sp = np.mean([phase_similarity(p, t) for p, t in zip(preds, truths)])
        return float(sa), float(sp)

    ref_amp, ref_phase = mean_sims(ref_freq)
    freqs = sorted(f for f in preds_by_freq if f != ref_freq)
    rel_amp, rel_phase = [], []
    for f in freqs:
        sa, sp = mean_sims(f)
        rel_amp.append(sa / ref_amp)
        rel_phase.append(sp / ref_phase)
    return RelativeSimilarityCurve(freqs=tuple(freqs), rel_amp=tuple(rel_amp),
                                   rel_phase=tuple(rel_phase), ref_freq=ref_freq,
                                   ref_amp=ref_amp, ref_phase=ref_phase)


@dataclass(frozen=True)
class BootstrapCI:
    """Percentile bootstrap interval around a sample mean."""

    mean: float
    lo: float
    hi: float
    level: float = 0.95
    resamples: int = 2000

    def __post_init__(self):
        if not (self.lo <= self.mean + 1e-12 and self.mean - 1e-12 <= self.hi):
            raise ValueError("interval must bracket the mean")

    @property
    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)


def bootstrap_ci(values, resamples: int = 2000, level: float = 0.95,
                 seed: int = 0) -> BootstrapCI:
    """Non-parametric percentile bootstrap CI for the mean.

    Resamples with replacement ``resamples`` times using a PCG64 stream
    seeded with ``seed`` and takes the empirical (1-level)/2 and
    (1+level)/2 quantiles of the resampled means.

    Raises
    ------
    EmptyInput
        If ``values`` is empty.
    """
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size == 0:
        raise EmptyInput("bootstrap needs at least one value")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, vals.size, size=(resamples, vals.size))
    means = vals[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    m = float(vals.mean())
    # quantile granularity can nudge an endpoint past the mean on tiny n
    return BootstrapCI(mean=m, lo=min(float(lo), m), hi=max(float(hi), m),
                       level=level, resamples=resamples)
