"""States, density matrices and Wigner functions on a uniform grid.

Units: hbar = 1 and m*omega = 1, so position and momentum share one scale and
the x and p axes of every phase-space grid are the same `GridSpec`.

Wigner convention::

    W(x, p) = 1/(2 pi) * integral rho(x - u/2, x + u/2) exp(i p u) du

which gives a plane wave exp(i p0 x) a Wigner function concentrated at p = +p0.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import (
    GridMismatchError,
    MassLossWarning,
    SupportError,
    ValidationError,
)

log = logging.getLogger(__name__)

MIN_POINTS = 16
HERMITIAN_RTOL = 1e-10
NORM_TOL = 1e-9


def _frozen(arr, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GridSpec:
    """Symmetric uniform grid of `n_points` nodes on [-x_max, x_max].

    Any n_points >= 16 is accepted. Even sizes are the default throughout:
    the grid then has no node at 0 but is exactly mirror-symmetric, so a
    quarter-turn maps nodes onto nodes.
    """

    n_points: int
    x_max: float

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < MIN_POINTS:
            raise ValidationError(f"n_points must be an integer >= {MIN_POINTS}, got {self.n_points}")
        if not (np.isfinite(self.x_max) and self.x_max > 0):
            raise ValidationError(f"x_max must be positive, got {self.x_max}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def dx(self) -> float:
        return 2.0 * self.x_max / (self.n_points - 1)

    @property
    def span(self) -> float:
        """Total width covered by the n cells centred on the nodes."""
        return self.n_points * self.dx

    def points(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n_points)

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.span

    def frequencies(self) -> np.ndarray:
        """Conjugate grid k_a = (a - n//2) dk; contains k = 0 at index n//2.

        Together with `points()` this forms an exact DFT pair:
        sum_i exp(i (k_a - k_b) x_i) dx = 2 pi / dk * delta_ab.
        """
        n = self.n_points
        return (np.arange(n) - n // 2) * self.dk


@dataclass(frozen=True)
class WavefunctionGrid:
    grid: GridSpec
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes, complex)
        if amps.shape != (self.grid.n_points,):
            raise ValidationError(f"amplitudes must have shape ({self.grid.n_points},), got {amps.shape}")
        norm = float(np.sum(np.abs(amps) ** 2) * self.grid.dx)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValidationError(f"wavefunction not normalized: sum |psi|^2 dx = {norm!r}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, grid: GridSpec, amplitudes) -> "WavefunctionGrid":
        amps = np.asarray(amplitudes, dtype=complex)
        norm = np.sqrt(np.sum(np.abs(amps) ** 2) * grid.dx)
        if norm == 0 or not np.isfinite(norm):
            raise ValidationError("cannot normalize a zero or non-finite wavefunction")
        return cls(grid, amps / norm)

    def position_density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class DensityMatrix:
    """rho(x_i, x_j) sampled on the grid; the operator matrix is rho * dx."""

    grid: GridSpec
    elements: np.ndarray

    def __post_init__(self):
        el = _frozen(self.elements, complex)
        n = self.grid.n_points
        if el.shape != (n, n):
            raise ValidationError(f"density matrix must have shape ({n}, {n}), got {el.shape}")
        if not np.all(np.isfinite(el)):
            raise ValidationError("density matrix has non-finite entries")
        object.__setattr__(self, "elements", el)

    def operator(self) -> np.ndarray:
        return self.elements * self.grid.dx

    def trace(self) -> float:
        return float(np.real(np.trace(self.elements)) * self.grid.dx)

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.elements)).copy()

    def hermiticity_residual(self) -> float:
        """max |rho - rho^dagger| relative to max |rho|."""
        el = self.elements
        scale = np.max(np.abs(el))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(el - el.conj().T)) / scale)

    def hermitian_part(self) -> "DensityMatrix":
        return DensityMatrix(self.grid, 0.5 * (self.elements + self.elements.conj().T))


@dataclass(frozen=True)
class WignerGrid:
    x_grid: GridSpec
    p_grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values)
        if np.iscomplexobj(vals):
            raise ValidationError("Wigner values must be real")
        vals = _frozen(vals, float)
        shape = (self.x_grid.n_points, self.p_grid.n_points)
        if vals.shape != shape:
            raise ValidationError(f"Wigner values must have shape {shape}, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def grid(self) -> GridSpec:
        _require_square(self)
        return self.x_grid

    def mass(self) -> float:
        return float(np.sum(self.values) * self.x_grid.dx * self.p_grid.dx)

    def x_marginal(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.p_grid.dx

    def p_marginal(self) -> np.ndarray:
        return self.values.sum(axis=0) * self.x_grid.dx


@dataclass(frozen=True)
class MarginalDistribution:
    """Probability density along the detector axis at phase-space angle `theta`."""

    grid: GridSpec
    density: np.ndarray
    theta: float
    clipped_mass: float = 0.0

    def __post_init__(self):
        d = _frozen(self.density, float)
        if d.shape != (self.grid.n_points,):
            raise ValidationError(f"density must have shape ({self.grid.n_points},), got {d.shape}")
        if np.any(d < 0):
            raise ValidationError("marginal density must be non-negative")
        total = float(np.sum(d) * self.grid.dx)
        if abs(total - 1.0) > 1e-6:
            raise ValidationError(f"marginal not normalized: integral = {total!r}")
        object.__setattr__(self, "density", d)
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "clipped_mass", float(self.clipped_mass))


def _require_square(w: WignerGrid) -> None:
    if w.x_grid != w.p_grid:
        raise GridMismatchError(f"x and p grids differ: {w.x_grid} vs {w.p_grid}")


def _check_support(grid: GridSpec, lo: float, hi: float) -> None:
    if lo < -grid.x_max or hi > grid.x_max:
        raise SupportError(
            f"state support [{lo:g}, {hi:g}] exceeds grid [-{grid.x_max:g}, {grid.x_max:g}]"
        )


# --------------------------------------------------------------------- states


def make_gaussian(grid: GridSpec, center: float, sigma: float, momentum: float = 0.0) -> WavefunctionGrid:
    """Gaussian packet psi ~ exp(-(x-center)^2 / 4 sigma^2) exp(i momentum x).

    `sigma` is the position standard deviation; sigma = 1/sqrt(2) is the
    oscillator ground state.
    """
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    _check_support(grid, center - 5 * sigma, center + 5 * sigma)
    x = grid.points()
    amps = np.exp(-((x - center) ** 2) / (4 * sigma**2) + 1j * momentum * x)
    return WavefunctionGrid.normalized(grid, amps)


def make_double_slit(grid: GridSpec, separation_sigmas: float, sigma: float) -> WavefunctionGrid:
    """Equal-weight coherent sum of two Gaussians at +/- separation_sigmas*sigma/2."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    if separation_sigmas < 0:
        raise ValidationError(f"separation_sigmas must be >= 0, got {separation_sigmas}")
    half = 0.5 * separation_sigmas * sigma
    _check_support(grid, -half - 5 * sigma, half + 5 * sigma)
    x = grid.points()
    amps = np.exp(-((x - half) ** 2) / (4 * sigma**2)) + np.exp(-((x + half) ** 2) / (4 * sigma**2))
    return WavefunctionGrid.normalized(grid, amps)


def density_from_wavefunction(psi: WavefunctionGrid) -> DensityMatrix:
    if not isinstance(psi, WavefunctionGrid):
        raise TypeError(f"expected a pure state (WavefunctionGrid), got {type(psi).__name__}")
    a = psi.amplitudes
    return DensityMatrix(psi.grid, np.outer(a, a.conj()))


def mixture(states: Sequence[WavefunctionGrid | DensityMatrix], weights: Sequence[float]) -> DensityMatrix:
    """Convex combination of pure or mixed states on a common grid."""
    if len(states) == 0 or len(states) != len(weights):
        raise ValidationError("need one weight per state and at least one state")
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValidationError(f"weights must be non-negative and sum to 1, got {weights}")
    grid = states[0].grid
    acc = np.zeros((grid.n_points, grid.n_points), complex)
    for s, wi in zip(states, w):
        if s.grid != grid:
            raise GridMismatchError("all states of a mixture must share one grid")
        rho = density_from_wavefunction(s) if isinstance(s, WavefunctionGrid) else s
        acc += wi * rho.elements
    return DensityMatrix(grid, 0.5 * (acc + acc.conj().T))


# ------------------------------------------------------------ Wigner transform


def wigner_transform(elements: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Complex Wigner transform of a sampled rho on the (x, p) = (grid, grid) plane.

    The off-diagonal coordinate is sampled at u = 2 k dx so that
    x -/+ u/2 land on nodes; the u-integral is then an exact-weight
    trapezoid sum evaluated directly (no FFT grid constraints on p).
    """
    n = grid.n_points
    dx = grid.dx
    ks = np.arange(-(n - 1), n)
    i = np.arange(n)[:, None]
    a = i - ks[None, :]
    b = i + ks[None, :]
    ok = (a >= 0) & (a < n) & (b >= 0) & (b < n)
    band = np.zeros((n, 2 * n - 1), complex)
    band[ok] = elements[a[ok], b[ok]]
    p = grid.points()
    kernel = np.exp(2j * dx * np.outer(ks, p)) * (dx / np.pi)
    return band @ kernel


def wigner_from_density(rho: DensityMatrix) -> WignerGrid:
    if rho.hermiticity_residual() > HERMITIAN_RTOL:
        raise ValidationError(f"density matrix is not Hermitian (residual {rho.hermiticity_residual():.3g})")
    w = wigner_transform(rho.elements, rho.grid)
    return WignerGrid(rho.grid, rho.grid, np.real(w))


def _half_step_shift(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Band-limited interpolation of f (axis 0 on `grid`) at x_i + dx/2."""
    x = grid.points()
    k = grid.frequencies()
    fwd = np.exp(1j * np.outer(k, x)) * grid.dx
    back = np.exp(-1j * np.outer(x + 0.5 * grid.dx, k)) * (grid.dk / (2 * np.pi))
    return back @ (fwd @ f)


def _assemble_from_centre_offset(centre_rows: np.ndarray, half_rows: np.ndarray, n: int) -> np.ndarray:
    """Scatter F(x_c, u_m) samples into rho(x_a, x_b).

    Column m of both inputs holds u = (m - (n-1)) dx with rho(x_c - u/2, x_c + u/2);
    `centre_rows` is sampled at x_c = x_i and `half_rows` at x_c = x_i + dx/2.
    """
    ms = np.arange(-(n - 1), n)
    rho = np.zeros((n, n), complex)
    i = np.arange(n)[:, None]
    even = ms % 2 == 0
    for sel, src, off in ((even, centre_rows, 0), (~even, half_rows, 1)):
        mm = ms[sel][None, :]
        a = i - (mm - off) // 2
        b = i + (mm + off) // 2
        ok = (a >= 0) & (a < n) & (b >= 0) & (b < n)
        rho[a[ok], b[ok]] = src[:, sel][ok]
    return rho


def density_from_wigner(w: WignerGrid) -> DensityMatrix:
    """Inverse Wigner transform: rho(x - u/2, x + u/2) = integral W(x, p) exp(-i p u) dp."""
    _require_square(w)
    grid = w.x_grid
    n = grid.n_points
    u = np.arange(-(n - 1), n) * grid.dx
    centre = w.values @ (np.exp(-1j * np.outer(grid.points(), u)) * grid.dx)
    half = _half_step_shift(centre, grid)
    return DensityMatrix(grid, _assemble_from_centre_offset(centre, half, n))


# ------------------------------------------------------------ phase-space maps


def _sample(values: np.ndarray, grid: GridSpec, xs: np.ndarray, ps: np.ndarray) -> np.ndarray:
    ci = (xs + grid.x_max) / grid.dx
    cj = (ps + grid.x_max) / grid.dx
    return ndimage.map_coordinates(values, [ci, cj], order=3, mode="constant", cval=0.0)


def _reduce_angle(theta: float) -> float:
    t = float(np.mod(theta + np.pi, 2 * np.pi) - np.pi)
    return np.pi if t == -np.pi else t


def rotate_wigner(w: WignerGrid, theta: float) -> WignerGrid:
    """Harmonic evolution by phase angle theta (bicubic spline; off-grid reads 0).

    output(x, p) = input(x cos t - p sin t, x sin t + p cos t)
    """
    _require_square(w)
    grid = w.x_grid
    t = _reduce_angle(theta)
    x = grid.points()
    X, P = np.meshgrid(x, x, indexing="ij")
    c, s = np.cos(t), np.sin(t)
    out = _sample(w.values, grid, X * c - P * s, X * s + P * c)
    return WignerGrid(grid, grid, out)


def shear_wigner(w: WignerGrid, time: float) -> WignerGrid:
    """Free-particle evolution: output(x, p) = input(x - p t, p)."""
    _require_square(w)
    grid = w.x_grid
    x = grid.points()
    X, P = np.meshgrid(x, x, indexing="ij")
    out = WignerGrid(grid, grid, _sample(w.values, grid, X - P * time, P))
    before = w.mass()
    if before > 0 and out.mass() / before < 0.999:
        warnings.warn(
            f"shear by t={time:g} moved {1 - out.mass() / before:.2%} of the mass off-grid",
            MassLossWarning,
            stacklevel=2,
        )
    return out


def marginal(w: WignerGrid, theta: float) -> MarginalDistribution:
    """Detector distribution at angle theta: integral of the rotated W over p.

    Interpolation can leave small negative values; they are clipped, the
    density is renormalized, and the clipped mass is kept on the result.
    """
    grid = w.grid
    dens = rotate_wigner(w, theta).values.sum(axis=1) * grid.dx
    clipped = float(-np.sum(np.minimum(dens, 0.0)) * grid.dx)
    if clipped > 0:
        log.debug("marginal at theta=%g: clipped %.3g negative mass", theta, clipped)
    dens = np.maximum(dens, 0.0)
    total = np.sum(dens) * grid.dx
    if total <= 0:
        raise ValidationError("marginal has no positive mass")
    return MarginalDistribution(grid, dens / total, theta, clipped)


def momentum_density(psi: WavefunctionGrid, p: np.ndarray | None = None) -> np.ndarray:
    """|psi(p)|^2 by direct quadrature of (2 pi)^-1/2 integral psi(x) exp(-i p x) dx."""
    x = psi.grid.points()
    p = x if p is None else np.asarray(p, dtype=float)
    amp = np.exp(-1j * np.outer(p, x)) @ psi.amplitudes * psi.grid.dx / np.sqrt(2 * np.pi)
    return np.abs(amp) ** 2


# ----------------------------------------------------------------- decoherence


def decohere(rho: DensityMatrix, lam: float, observable: str = "which_side", width: float = 1.0) -> DensityMatrix:
    """Damp coherences: rho'(x, x') = rho(x, x') exp(-lam (A(x) - A(x'))^2).

    The environment continuously monitors an observable A:

    * ``"which_side"`` (default): A(x) = tanh(x / width) / 2, a smoothed record
      of which side of x = 0 the particle is on (which slit, for the
      double-slit state). Opposite-side coherences decay as exp(-lam) while
      short-range coherence inside each lobe survives.
    * ``"position"``: A(x) = x, the Gaussian kernel exp(-lam (x - x')^2).

    The diagonal is untouched, so trace and the position marginal are exact.
    """
    if not lam >= 0:
        raise ValidationError(f"decoherence rate must be >= 0, got {lam}")
    x = rho.grid.points()
    if observable == "which_side":
        if not width > 0:
            raise ValidationError(f"width must be positive, got {width}")
        a = 0.5 * np.tanh(x / width)
    elif observable == "position":
        a = x
    else:
        raise ValidationError(f"unknown observable {observable!r}")
    kernel = np.exp(-lam * (a[:, None] - a[None, :]) ** 2)
    return DensityMatrix(rho.grid, rho.elements * kernel)


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2) with the dx^2 quadrature weight."""
    el = rho.elements
    return float(np.real(np.sum(el * el.T)) * rho.grid.dx**2)


def purity_from_wigner(w: WignerGrid) -> float:
    """2 pi * integral W^2 dx dp; equals Tr(rho^2) for the matching state."""
    return float(2 * np.pi * np.sum(w.values**2) * w.x_grid.dx * w.p_grid.dx)
