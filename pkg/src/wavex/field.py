"""Complex field containers, amplitude/phase conversions, and the exact
regional error decomposition with its frequency-sensitive upper bound.

All grids are dense 2-D numpy arrays indexed ``[row, col]``.  Integrals over
a region are midpoint quadrature: mask-weighted cell sums times the cell
area.  Decomposition checks should be run in double precision; the identity
tolerances are unreachable in float32.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

import numpy as np

from .errors import MismatchedFrequency


class Domain(Enum):
    """Benchmark family a field belongs to."""

    SIMPLEWAVE = "simplewave"
    HELMHOLTZ = "helmholtz"
    MAXWELL = "maxwell"

    @property
    def wire_code(self) -> int:
        return _WIRE_CODES[self]

    @classmethod
    def from_wire_code(cls, code: int) -> "Domain":
        for dom, c in _WIRE_CODES.items():
            if c == code:
                return dom
        raise ValueError(f"unknown domain wire code {code}")


_WIRE_CODES = {Domain.SIMPLEWAVE: 0, Domain.HELMHOLTZ: 1, Domain.MAXWELL: 2}


@dataclass(frozen=True)
class ComplexField:
    """A frequency-tagged complex field on a rectangular grid.

    Parameters
    ----------
    re, im : ndarray (H, W)
        Real and imaginary parts; identical shapes with H, W >= 2.
    nu : float
        Positive spectral value (frequency, wavenumber, or dimensionless).
    env : mapping
        Opaque environment record (e.g. ``{"v": 1.05}`` or ``{"n_mean": 0.98}``).
    domain : Domain
        Benchmark tag.
    """

    re: np.ndarray
    im: np.ndarray
    nu: float
    env: Mapping[str, Any] = field(default_factory=dict)
    domain: Domain = Domain.SIMPLEWAVE

    def __post_init__(self):
        re = np.asarray(self.re)
        im = np.asarray(self.im)
        if re.ndim != 2 or re.shape != im.shape:
            raise ValueError(f"re/im must be matching 2-D grids, got {re.shape} vs {im.shape}")
        if min(re.shape) < 2:
            raise ValueError(f"grid must be at least 2x2, got {re.shape}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        object.__setattr__(self, "re", re)
        object.__setattr__(self, "im", im)

    @property
    def shape(self) -> tuple[int, int]:
        return self.re.shape

    @property
    def values(self) -> np.ndarray:
        """The field as a complex array."""
        return self.re + 1j * self.im

    @classmethod
    def from_complex(cls, u: np.ndarray, nu: float, env: Mapping[str, Any] | None = None,
                     domain: Domain = Domain.SIMPLEWAVE) -> "ComplexField":
        u = np.asarray(u)
        return cls(re=u.real.copy(), im=u.imag.copy(), nu=float(nu),
                   env=dict(env or {}), domain=domain)


@dataclass(frozen=True)
class PolarField:
    """Amplitude/phase view of a complex field.

    ``amp`` is nonnegative; ``phase`` holds principal arguments in (-pi, pi],
    with phase fixed to 0 wherever the amplitude vanishes.
    """

    amp: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amp)
        phase = np.asarray(self.phase)
        if amp.shape != phase.shape:
            raise ValueError("amp and phase must share a shape")
        if np.any(amp < 0):
            raise ValueError("amplitude must be nonnegative")
        if np.any(phase <= -np.pi) or np.any(phase > np.pi):
            raise ValueError("phase must lie in (-pi, pi]")
        object.__setattr__(self, "amp", amp)
        object.__setattr__(self, "phase", phase)


@dataclass(frozen=True)
class TravelTimeSpec:
    """Amplitude plus effective travel-time grids at a fixed spectral value.

    Encodes a field of the form ``A * exp(i * nu * tau)``.
    """

    amp: np.ndarray
    tau: np.ndarray
    nu: float

    def __post_init__(self):
        amp = np.asarray(self.amp, dtype=np.float64)
        tau = np.asarray(self.tau, dtype=np.float64)
        if amp.shape != tau.shape:
            raise ValueError("amp and tau must share a shape")
        if np.any(amp < 0):
            raise ValueError("amplitude must be nonnegative")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        object.__setattr__(self, "amp", amp)
        object.__setattr__(self, "tau", tau)


@dataclass(frozen=True)
class RegionMask:
    """Boolean integration region with a per-cell quadrature weight."""

    mask: np.ndarray
    cell_area: float = 1.0

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if not mask.any():
            raise ValueError("region must contain at least one cell")
        if not self.cell_area > 0:
            raise ValueError("cell_area must be positive")
        object.__setattr__(self, "mask", mask)


def principal_angle(phase: np.ndarray) -> np.ndarray:
    """Wrap angles into the principal branch (-pi, pi]."""
    wrapped = np.mod(np.asarray(phase) + np.pi, 2.0 * np.pi) - np.pi
    # mod maps odd multiples of pi to -pi; the principal branch keeps +pi
    return np.where(wrapped == -np.pi, np.pi, wrapped)


def to_polar(u: ComplexField) -> PolarField:
    """Amplitude and principal-argument phase of a complex field.

    The argument is undefined at zero amplitude; those cells get phase 0
    so the map is total.
    """
    amp = np.hypot(u.re, u.im)
    phase = np.arctan2(u.im, u.re)
    phase = np.where(phase == -np.pi, np.pi, phase)
    phase = np.where(amp == 0.0, 0.0, phase)
    return PolarField(amp=amp, phase=phase)


def from_polar(p: PolarField, nu: float, env: Mapping[str, Any] | None = None,
               domain: Domain = Domain.SIMPLEWAVE) -> ComplexField:
    """Rebuild a complex field from amplitude and phase."""
    return ComplexField(re=p.amp * np.cos(p.phase), im=p.amp * np.sin(p.phase),
                        nu=float(nu), env=dict(env or {}), domain=domain)


def synth_from_travel_time(s: TravelTimeSpec, env: Mapping[str, Any] | None = None,
                           domain: Domain = Domain.SIMPLEWAVE) -> ComplexField:
    """Synthesize ``A * exp(i * nu * tau)`` on the grid."""
    ph = s.nu * s.tau
    return ComplexField(re=s.amp * np.cos(ph), im=s.amp * np.sin(ph),
                        nu=s.nu, env=dict(env or {}), domain=domain)


def decompose_regional_error(truth: TravelTimeSpec, pred: TravelTimeSpec,
                             region: RegionMask) -> dict[str, float]:
    """Exact amplitude/phase split of the regional squared field error.

    Returns a dict with keys ``lhs``, ``amp_term`` and ``phase_term`` where

    * ``lhs``        = integral over the region of |u_pred - u_truth|^2,
      evaluated from the two synthesized complex fields;
    * ``amp_term``   = integral of (A_pred - A_truth)^2;
    * ``phase_term`` = 4 * integral of A_truth * A_pred * sin^2(nu*dtau/2).

    The three satisfy ``lhs == amp_term + phase_term`` identically (up to
    round-off); returning all of them keeps the identity checkable.

    Raises
    ------
    MismatchedFrequency
        If the two specs carry different spectral values.
    """
    if truth.nu != pred.nu:
        raise MismatchedFrequency(f"truth nu={truth.nu} vs pred nu={pred.nu}")
    if truth.amp.shape != pred.amp.shape or truth.amp.shape != region.mask.shape:
        raise ValueError("truth, pred, and region must share a grid shape")

    m = region.mask
    ca = region.cell_area

    u = synth_from_travel_time(truth).values
    u_hat = synth_from_travel_time(pred).values
    lhs = float(np.sum(np.abs(u_hat - u)[m] ** 2) * ca)

    amp_term = float(np.sum((pred.amp - truth.amp)[m] ** 2) * ca)
    dtau = pred.tau - truth.tau
    phase_term = float(4.0 * np.sum(
        (truth.amp * pred.amp * np.sin(truth.nu * dtau / 2.0) ** 2)[m]) * ca)
    return {"lhs": lhs, "amp_term": amp_term, "phase_term": phase_term}


def regional_error_bound(amp_term: float, dtau_l2_sq: float, nu: float,
                         a_max: float, a_hat_max: float) -> float:
    """Frequency-sensitive upper bound on the regional squared field error.

    ``amp_term + nu^2 * a_max * a_hat_max * dtau_l2_sq`` where ``dtau_l2_sq``
    is the squared L2 norm of the travel-time mismatch over the region.  The
    phase component scales with nu^2, which is what makes phase mismatch
    increasingly costly at higher spectral values.
    """
    if min(amp_term, dtau_l2_sq, a_max, a_hat_max) < 0:
        raise ValueError("all bound inputs must be nonnegative")
    if not nu > 0:
        raise ValueError("nu must be positive")
    return float(amp_term + nu**2 * a_max * a_hat_max * dtau_l2_sq)
