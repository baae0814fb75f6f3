"""Heterogeneous frequency-domain Helmholtz benchmark on the unit square.

Media are smooth Gaussian random fields, the source is a localized complex
Gaussian with a directional phase ramp, and an imaginary sponge profile
damps the field near the boundary:

    -lap(u) - k^2 n (1 + i sigma_abs) u = s

discretized with the second-order 5-point stencil on corner-anchored nodes
``x_j = j / (g - 1)``.  The outer ring of nodes is held at zero (homogeneous
Dirichlet); reflections are suppressed by the sponge, not by the boundary
condition.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._threads import thread_map
from .dataio import Dataset
from .errors import DegenerateField, InvalidWavenumber, NoConvergence, SingularSystem
from .field import ComplexField, Domain

LF_WAVENUMBERS = (10.0, 15.0, 20.0, 25.0)
HF_WAVENUMBERS = (30.0, 37.5, 50.0)

SMOOTH_CELLS = 8.0        # Gaussian smoothing width, in grid cells
MEDIUM_SCALE = 0.25
MEDIUM_CLIP = (0.6, 1.4)

SOURCE_CENTER = (0.30, 0.50)
SOURCE_SIGMA = 0.03
SOURCE_BETA = np.pi / 6.0
SOURCE_DIR = (np.cos(np.pi / 4.0), np.sin(np.pi / 4.0))
SOURCE_AMP = 1.0

SPONGE_WIDTH = 0.15
SPONGE_STRENGTH = 1.5
SPONGE_POWER = 2


def grid_coords(grid: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Corner-anchored coordinate grids (X, Y) on [0, 1]^2."""
    t = np.linspace(0.0, 1.0, grid)
    return np.meshgrid(t, t, indexing="xy")


@dataclass(frozen=True)
class Medium:
    """Relative medium coefficient on the grid, clipped to [0.6, 1.4]."""

    n: np.ndarray
    seed: int

    def __post_init__(self):
        lo, hi = MEDIUM_CLIP
        if np.any(self.n < lo) or np.any(self.n > hi):
            raise ValueError("medium outside clip bounds")


def medium_from_noise(noise: np.ndarray, seed: int = -1) -> Medium:
    """Smooth, normalize, and clip a white-noise field into a medium.

    Raises
    ------
    DegenerateField
        If the smoothed field has (near-)zero standard deviation, which
        makes the normalization undefined.
    """
    smoothed = scipy.ndimage.gaussian_filter(np.asarray(noise, dtype=np.float64),
                                             sigma=SMOOTH_CELLS, mode="reflect",
                                             truncate=4.0)
    sd = float(smoothed.std())
    if sd < 1e-12:
        raise DegenerateField("smoothed noise has zero variance")
    g = (smoothed - smoothed.mean()) / sd
    n = np.clip(1.0 + MEDIUM_SCALE * g, *MEDIUM_CLIP)
    return Medium(n=n, seed=seed)


def sample_medium(seed: int, grid: int = 64) -> Medium:
    """Draw a smooth random medium from a seeded PCG64 stream."""
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((grid, grid))
    return medium_from_noise(noise, seed=seed)


@dataclass(frozen=True)
class SourceField:
    """Localized complex Gaussian source with a directional phase ramp."""

    s: np.ndarray  # complex grid
    center: tuple[float, float] = SOURCE_CENTER
    sigma: float = SOURCE_SIGMA
    beta: float = SOURCE_BETA
    direction: tuple[float, float] = SOURCE_DIR
    amplitude: float = SOURCE_AMP


def build_source(grid: int = 64) -> SourceField:
    """Evaluate the source on the grid.

    s(r) = A exp(-|r - r_s|^2 / (2 sigma^2)) exp(i beta (r - r_s).d / sigma)
    """
    x, y = grid_coords(grid)
    dx = x - SOURCE_CENTER[0]
    dy = y - SOURCE_CENTER[1]
    r2 = dx * dx + dy * dy
    ramp = (dx * SOURCE_DIR[0] + dy * SOURCE_DIR[1]) / SOURCE_SIGMA
    s = SOURCE_AMP * np.exp(-r2 / (2.0 * SOURCE_SIGMA**2)) * np.exp(1j * SOURCE_BETA * ramp)
    return SourceField(s=s)


@dataclass(frozen=True)
class SpongeProfile:
    """Imaginary damping profile, nonzero only within ``width`` of the boundary."""

    sigma: np.ndarray
    width: float = SPONGE_WIDTH
    strength: float = SPONGE_STRENGTH
    power: int = SPONGE_POWER


def build_sponge(grid: int = 64) -> SpongeProfile:
    """Quadratic boundary ramps measured to the continuous edges of [0,1]^2."""
    x, y = grid_coords(grid)
    d_x = np.minimum(x, 1.0 - x)
    d_y = np.minimum(y, 1.0 - y)
    w = SPONGE_WIDTH
    ramp_x = np.clip((w - d_x) / w, 0.0, None) ** SPONGE_POWER
    ramp_y = np.clip((w - d_y) / w, 0.0, None) ** SPONGE_POWER
    return SpongeProfile(sigma=SPONGE_STRENGTH * (ramp_x + ramp_y))


@dataclass(frozen=True)
class HelmholtzSystem:
    """Sparse interior system A u = b with embedding metadata."""

    matrix: sp.csc_matrix
    rhs: np.ndarray
    k: float
    grid_spacing: float
    grid: int


def assemble(medium: Medium, source: SourceField, sponge: SpongeProfile,
             k: float) -> HelmholtzSystem:
    """Assemble the 5-point interior system for wavenumber ``k``.

    Interior nodes are rows 1..g-2 in both directions; the outer ring is
    eliminated as homogeneous Dirichlet.  Diagonal entries are
    ``4/h^2 - k^2 n (1 + i sigma)``, off-diagonals ``-1/h^2``.

    Raises
    ------
    InvalidWavenumber
        If ``k`` is not positive.
    """
    if not k > 0:
        raise InvalidWavenumber(f"k must be positive, got {k}")
    g = medium.n.shape[0]
    if medium.n.shape != (g, g) or source.s.shape != (g, g) or sponge.sigma.shape != (g, g):
        raise ValueError("medium, source, and sponge must share the grid")
    h = 1.0 / (g - 1)
    ni = g - 2
    inv_h2 = 1.0 / (h * h)

    diag = (4.0 * inv_h2
            - k**2 * medium.n[1:-1, 1:-1] * (1.0 + 1j * sponge.sigma[1:-1, 1:-1])).ravel()
    n = ni * ni
    # horizontal couplings vanish across interior-row boundaries
    ex = np.full(n - 1, -inv_h2, dtype=np.complex128)
    ex[np.arange(1, n) % ni == 0] = 0.0
    ey = np.full(n - ni, -inv_h2, dtype=np.complex128)
    matrix = sp.diags([diag, ex, ex, ey, ey], [0, 1, -1, ni, -ni], format="csc")
    rhs = source.s[1:-1, 1:-1].ravel().astype(np.complex128)
    return HelmholtzSystem(matrix=matrix, rhs=rhs, k=float(k), grid_spacing=h, grid=g)


RESIDUAL_TOL = 1e-8


def _embed(system: HelmholtzSystem, interior: np.ndarray) -> np.ndarray:
    g = system.grid
    full = np.zeros((g, g), dtype=np.complex128)
    full[1:-1, 1:-1] = interior.reshape(g - 2, g - 2)
    return full


def _residual(system: HelmholtzSystem, x: np.ndarray) -> float:
    b_norm = np.linalg.norm(system.rhs)
    if b_norm == 0.0:
        return 0.0
    return float(np.linalg.norm(system.matrix @ x - system.rhs) / b_norm)


def solve_iterative(system: HelmholtzSystem, maxiter: int = 2000) -> np.ndarray:
    """ILU-preconditioned BiCGSTAB on the interior unknowns.

    Raises
    ------
    NoConvergence
        If the iteration cap is reached or the relative residual of the
        returned iterate exceeds the 1e-8 contract.
    """
    if np.linalg.norm(system.rhs) == 0.0:
        return np.zeros_like(system.rhs)
    try:
        ilu = spla.spilu(system.matrix, drop_tol=1e-5, fill_factor=20.0)
    except RuntimeError as exc:
        raise SingularSystem(f"ILU factorization failed: {exc}") from exc
    precond = spla.LinearOperator(system.matrix.shape, matvec=ilu.solve)
    x, info = spla.bicgstab(system.matrix, system.rhs, rtol=1e-10, atol=0.0,
                            maxiter=maxiter, M=precond)
    if info != 0 or _residual(system, x) > RESIDUAL_TOL:
        raise NoConvergence(f"BiCGSTAB stopped with info={info}, "
                            f"residual={_residual(system, x):.3e}")
    return x


def solve_direct(system: HelmholtzSystem) -> np.ndarray:
    """Sparse LU solve of the interior system."""
    try:
        lu = spla.splu(system.matrix)
        x = lu.solve(system.rhs)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    if _residual(system, x) > RESIDUAL_TOL:
        raise SingularSystem(f"direct solve residual {_residual(system, x):.3e} "
                             f"exceeds {RESIDUAL_TOL}")
    return x


def solve(system: HelmholtzSystem, medium: Medium | None = None,
          method: str = "auto") -> ComplexField:
    """Solve the assembled system and embed the result into the full grid.

    ``method`` is one of ``auto`` (iterative with direct fallback),
    ``iterative``, or ``direct``.  Every returned solution satisfies the
    relative-residual contract of 1e-8; the exterior ring is zero.
    """
    if method == "iterative":
        x = solve_iterative(system)
    elif method == "direct":
        x = solve_direct(system)
    elif method == "auto":
        try:
            x = solve_iterative(system)
        except NoConvergence:
            x = solve_direct(system)
    else:
        raise ValueError(f"unknown method {method!r}")
    full = _embed(system, x)
    env = {"n_mean": float(medium.n.mean())} if medium is not None else {}
    return ComplexField(re=full.real, im=full.imag, nu=system.k, env=env,
                        domain=Domain.HELMHOLTZ)


def generate_dataset(seed: int, ks=LF_WAVENUMBERS + HF_WAVENUMBERS,
                     n_per_k: int = 500, grid: int = 64,
                     method: str = "direct") -> Dataset:
    """Cross product of seeded random media with the requested wavenumbers.

    ``n_per_k`` media are drawn from sub-seeds spawned deterministically
    from ``seed`` and reused across all wavenumbers, so a common
    environment exists at every spectral value.  Source and sponge are
    shared by all samples.  Input channels are [n, k-broadcast]; the env
    scalar is the spatial mean of n.

    Solver failures propagate with the offending sample index attached.
    """
    ks = tuple(float(k) for k in ks)
    if any(k <= 0 for k in ks):
        raise InvalidWavenumber("all wavenumbers must be positive")
    child_seeds = np.random.SeedSequence(seed).spawn(n_per_k)
    media = [medium_from_noise(np.random.default_rng(cs).standard_normal((grid, grid)),
                               seed=seed) for cs in child_seeds]
    source = build_source(grid)
    sponge = build_sponge(grid)

    n_total = len(ks) * n_per_k
    nus = np.empty(n_total)
    env = np.empty((n_total, 1))
    inputs = np.empty((n_total, 2, grid, grid), dtype=np.float32)
    re = np.empty((n_total, grid, grid), dtype=np.float32)
    im = np.empty((n_total, grid, grid), dtype=np.float32)

    def solve_sample(job):
        i, k, m = job
        try:
            system = assemble(media[m], source, sponge, k)
            return solve(system, medium=media[m], method=method)
        except Exception as exc:
            raise type(exc)(f"sample {i} (k={k}, medium {m}): {exc}") from exc

    jobs = [(ki * n_per_k + m, k, m)
            for ki, k in enumerate(ks) for m in range(n_per_k)]
    fields = thread_map(solve_sample, jobs)
    for (i, k, m), u in zip(jobs, fields):
        nus[i] = k
        env[i, 0] = media[m].n.mean()
        inputs[i, 0] = media[m].n
        inputs[i, 1] = k
        re[i] = u.re
        im[i] = u.im
    return Dataset(domain=Domain.HELMHOLTZ, nus=nus, env=env,
                   inputs=inputs, re=re, im=im)
