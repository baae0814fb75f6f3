"""Path-sum phase surrogate and its sine/cosine conditioning features.

The surrogate sums a handful of dominant propagation paths, each
accumulating phase as a reference coefficient times geometric path length:

    g(r) = sum_m a_m exp(i kappa_ref L_m(r, r_s))

Only the angle of g is used downstream; it supplies cheap source- and
geometry-aware oscillatory cues at spectral values where no training data
exists.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from . import helmholtz, simplewave
from .errors import UnknownDomain
from .field import Domain

DEGENERATE_MODULUS = 1e-12


@dataclass(frozen=True)
class PhasePriorSpec:
    """Retained paths (coefficient, length map) plus the phase coefficient."""

    paths: tuple[tuple[float, np.ndarray], ...]
    kappa_ref: float
    source: tuple[float, float]

    def __post_init__(self):
        if len(self.paths) == 0:
            raise ValueError("at least one path is required")
        for _, length in self.paths:
            if np.any(np.asarray(length) < 0):
                raise ValueError("path lengths must be nonnegative")
        if not self.kappa_ref > 0:
            raise ValueError("kappa_ref must be positive")


@dataclass(frozen=True)
class PhaseBaseFeatures:
    """Unit-circle features (sin, cos) of the surrogate phase."""

    sin_map: np.ndarray
    cos_map: np.ndarray
    degenerate_cells: int = 0  # cells where |g| vanished and the fallback applied


def kappa_ref(domain: Domain, env: Mapping[str, Any], nu: float) -> float:
    """Reference phase coefficient per benchmark.

    * simplewave: 2 pi nu / v   (matches the generator's exp(i 2 pi nu tau))
    * helmholtz:  k sqrt(n_mean)
    * maxwell:    2 pi nu sqrt(eps_mean)  (formula carried, no data to test)

    The environment supplies the sample-wise medium summary: ``v`` for
    simplewave, ``n_mean`` for helmholtz, ``eps_mean`` for maxwell.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    if domain is Domain.SIMPLEWAVE:
        return 2.0 * np.pi * nu / float(env["v"])
    if domain is Domain.HELMHOLTZ:
        return nu * float(np.sqrt(env["n_mean"]))
    if domain is Domain.MAXWELL:
        return 2.0 * np.pi * nu * float(np.sqrt(env["eps_mean"]))
    raise UnknownDomain(str(domain))


def g_prior(spec: PhasePriorSpec) -> np.ndarray:
    """Complex path sum on the grid."""
    total = None
    for coeff, length in spec.paths:
        term = coeff * np.exp(1j * spec.kappa_ref * np.asarray(length, dtype=np.float64))
        total = term if total is None else total + term
    return total


def phase_base_features(spec: PhasePriorSpec) -> PhaseBaseFeatures:
    """Sine and cosine of the surrogate's principal argument.

    Cells where the path sum (nearly) cancels get the fixed fallback
    (sin, cos) = (0, 1); their count is reported in the output.
    """
    g = g_prior(spec)
    mod = np.abs(g)
    degenerate = mod <= DEGENERATE_MODULUS
    safe = np.where(degenerate, 1.0, mod)
    sin_map = np.where(degenerate, 0.0, g.imag / safe)
    cos_map = np.where(degenerate, 1.0, g.real / safe)
    return PhaseBaseFeatures(sin_map=sin_map, cos_map=cos_map,
                             degenerate_cells=int(degenerate.sum()))


def build_prior(domain: Domain, env: Mapping[str, Any], nu: float,
                grid: int | None = None) -> PhasePriorSpec:
    """Instantiate the prior for a benchmark on its generator's grid.

    simplewave and helmholtz retain the single direct path (the simplewave
    generator's reflected component is deliberately not modeled); maxwell
    additionally carries a mirror path across the electric-wall lower
    boundary.  Path lengths use the same grid sampling as the matching
    generator.
    """
    kref = kappa_ref(domain, env, nu)
    if domain is Domain.SIMPLEWAVE:
        cfg = simplewave.SimpleWaveConfig(grid=grid or 64)
        x, y = simplewave.grid_coords(cfg)
        l1 = np.hypot(x - cfg.source[0], y - cfg.source[1])
        return PhasePriorSpec(paths=((1.0, l1),), kappa_ref=kref, source=cfg.source)
    if domain is Domain.HELMHOLTZ:
        x, y = helmholtz.grid_coords(grid or 64)
        sx, sy = helmholtz.SOURCE_CENTER
        l1 = np.hypot(x - sx, y - sy)
        return PhasePriorSpec(paths=((1.0, l1),), kappa_ref=kref, source=(sx, sy))
    if domain is Domain.MAXWELL:
        # generic carrier: unit square grid, source from env, mirror across y=0
        g = grid or 64
        t = np.linspace(0.0, 1.0, g)
        x, y = np.meshgrid(t, t, indexing="xy")
        sx, sy = env.get("source", (0.5, 0.5))
        l1 = np.hypot(x - sx, y - sy)
        l2 = np.hypot(x - sx, y + sy)
        return PhasePriorSpec(paths=((1.0, l1), (1.0, l2)), kappa_ref=kref,
                              source=(sx, sy))
    raise UnknownDomain(str(domain))


def conditioning_features(domain: Domain, env: Mapping[str, Any], nu: float,
                          grid: int | None = None) -> PhaseBaseFeatures:
    """Convenience wrapper: build the prior and return its features."""
    return phase_base_features(build_prior(domain, env, nu, grid))
