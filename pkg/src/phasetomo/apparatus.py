"""The measurement box: angle map, voltage budget, detector resolution and counting noise.

SI quantities (volts, metres, coulombs, kilograms) appear only in
`ApparatusConfig` and in `omega`/`theta_max`. Everything the detector
produces lives in natural units (hbar = m*omega = 1); the conversion from
detector metres to natural units is the config scalar `detector_span`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants
from scipy.ndimage import gaussian_filter1d

from .errors import CoverageError, NearCoverageWarning, ValidationError
from .phase_space import GridSpec, MarginalDistribution

ELECTRON_CHARGE = constants.e
ELECTRON_MASS = constants.m_e

# theta_max may fall short of pi/2 by this relative amount and still count as
# full coverage (the classic sinh(theta_max) = 2.3 box is 3.3e-4 short).
COVERAGE_RTOL = 1e-3
MIN_ANGLES = 8


@dataclass(frozen=True)
class ApparatusConfig:
    v0: float  # plate potential scale, V
    box_half_length: float  # L, m
    accel_potential: float  # beam acceleration potential, V
    particle_charge_mag: float  # |q|, C
    particle_mass: float  # kg
    n_detector_bins: int
    total_counts_per_angle: int  # N hits per detector position
    detector_pitch: float  # intrinsic resolution, natural units
    detector_span: float  # detector width mapped to natural units
    full_coverage: bool = True

    def __post_init__(self):
        for name in ("v0", "box_half_length", "accel_potential", "particle_charge_mag",
                     "particle_mass", "detector_pitch", "detector_span"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValidationError(f"{name} must be positive, got {val!r}")
        for name in ("n_detector_bins", "total_counts_per_angle"):
            val = getattr(self, name)
            if int(val) != val or val < 1:
                raise ValidationError(f"{name} must be a positive integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        if self.full_coverage:
            require_coverage(self)


def omega(config: ApparatusConfig) -> float:
    """Oscillation frequency sqrt(2 V0 |q| / (L^2 m)) in rad/s."""
    c = config
    return math.sqrt(2 * c.v0 * c.particle_charge_mag / (c.box_half_length**2 * c.particle_mass))


def theta_max(config: ApparatusConfig) -> float:
    """Phase angle reached at the box end, asinh(sqrt(2 V0 |q| m) / p_y0).

    With p_y0 from the acceleration potential this equals
    asinh(sqrt(V0 / V_accel)).
    """
    c = config
    p_y0 = math.sqrt(2 * c.particle_mass * c.particle_charge_mag * c.accel_potential)
    return math.asinh(math.sqrt(2 * c.v0 * c.particle_charge_mag * c.particle_mass) / p_y0)


def coverage_voltage_ratio(theta: float = math.pi / 2) -> float:
    """V0 / V_accel needed for theta_max = theta."""
    return math.sinh(theta) ** 2


def require_coverage(config: ApparatusConfig) -> None:
    tm = theta_max(config)
    half_pi = math.pi / 2
    if tm < half_pi * (1 - COVERAGE_RTOL):
        raise CoverageError(
            f"theta_max = {tm:.6f} < pi/2: V0/V_accel = {config.v0 / config.accel_potential:.4g}"
            f" must be at least {coverage_voltage_ratio():.4g}"
        )
    if tm < half_pi:
        warnings.warn(
            f"theta_max = {tm:.6f} is below pi/2 by {half_pi - tm:.2e}; accepted within tolerance",
            NearCoverageWarning,
            stacklevel=3,
        )


def theta_of_y(y_over_L, config: ApparatusConfig):
    """Phase angle seen by a detector at y: asinh((y/L) sinh(theta_max))."""
    y = np.asarray(y_over_L, dtype=float)
    if np.any(np.abs(y) > 1):
        raise ValidationError(f"detector position |y/L| must be <= 1, got {y_over_L}")
    out = np.arcsinh(y * math.sinh(theta_max(config)))
    return float(out) if out.ndim == 0 else out


def y_of_theta(theta, config: ApparatusConfig):
    """Inverse of `theta_of_y` (not range-checked)."""
    out = np.sinh(np.asarray(theta, dtype=float)) / math.sinh(theta_max(config))
    return float(out) if out.ndim == 0 else out


def classical_trajectory(y_over_L, config: ApparatusConfig):
    """Normalized transverse centroid x/x_amp = cos(theta(y)) of a beam entering at amplitude 1."""
    return np.cos(theta_of_y(y_over_L, config))


def resolution(config: ApparatusConfig) -> float:
    """Delta x = max(shot-noise scale span/N, intrinsic detector pitch), natural units."""
    n = config.total_counts_per_angle
    if n == 1:
        warnings.warn("a single count per angle gives a resolution of the whole detector", UserWarning,
                      stacklevel=2)
    return max(config.detector_span / n, config.detector_pitch)


def detector_grid(config: ApparatusConfig) -> GridSpec:
    """Bin centres of the detector; n bins of width span/n."""
    n = config.n_detector_bins
    return GridSpec(n, 0.5 * config.detector_span * (n - 1) / n)


@dataclass(frozen=True)
class AnglePlan:
    thetas: np.ndarray
    y_positions: np.ndarray  # units of L

    def __post_init__(self):
        th = np.array(self.thetas, dtype=float)
        y = np.array(self.y_positions, dtype=float)
        if th.shape != y.shape or th.ndim != 1:
            raise ValidationError("thetas and y_positions must be 1-D and equally long")
        if np.any(np.diff(th) <= 0):
            raise ValidationError("thetas must be strictly increasing")
        if np.any(np.abs(y) > 1):
            raise ValidationError("detector positions must stay inside the box")
        th.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "y_positions", y)

    def __len__(self):
        return len(self.thetas)


def plan_angles(config: ApparatusConfig, n_angles: int | None = None) -> AnglePlan:
    """Detector positions uniform in theta over [-pi/2, pi/2].

    The count follows n ~ span / Delta x (angular and radial resolution of
    the characteristic function balanced at the cutoff), never below 8.
    """
    require_coverage(config)
    if n_angles is None:
        n_angles = math.ceil(config.detector_span / resolution(config) - 1e-9)
    n = max(MIN_ANGLES, int(n_angles))
    thetas = np.linspace(-math.pi / 2, math.pi / 2, n)
    y = np.sinh(thetas) / math.sinh(theta_max(config))
    over = np.abs(y) > 1
    if np.any(over):
        if np.max(np.abs(y)) > 1 + 2 * COVERAGE_RTOL:
            raise CoverageError("planned detector positions leave the box")
        warnings.warn(
            f"end positions |y/L| = {np.max(np.abs(y)):.6f} clipped to the box wall",
            NearCoverageWarning,
            stacklevel=2,
        )
        y = np.clip(y, -1.0, 1.0)
    return AnglePlan(thetas, y)


@dataclass(frozen=True)
class CountHistogram:
    grid: GridSpec
    counts: np.ndarray
    theta: float
    total: int

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.shape != (self.grid.n_points,):
            raise ValidationError(f"counts must have shape ({self.grid.n_points},), got {c.shape}")
        if np.any(c < 0):
            raise ValidationError("counts must be non-negative")
        if int(c.sum()) != int(self.total):
            raise ValidationError(f"counts sum to {int(c.sum())}, expected total {self.total}")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "total", int(self.total))
        object.__setattr__(self, "theta", float(self.theta))


def bin_probabilities(marginal: MarginalDistribution, config: ApparatusConfig,
                      grid: GridSpec | None = None) -> np.ndarray:
    """Hit probability per detector bin; `grid` overrides the bins implied by the config."""
    grid = detector_grid(config) if grid is None else grid
    if marginal.grid == grid:
        p = marginal.density * grid.dx
    else:
        p = np.interp(grid.points(), marginal.grid.points(), marginal.density, left=0.0, right=0.0) * grid.dx
    total = p.sum()
    if not total > 0:
        raise ValidationError("marginal has zero probability on every detector bin")
    return p / total


def measure(marginal: MarginalDistribution, config: ApparatusConfig, seed: int, stream: int = 0,
            grid: GridSpec | None = None) -> CountHistogram:
    """Register N hits drawn from the binned marginal (multinomial, fixed total).

    The generator is seeded from (seed, stream); use the angle index as the
    stream so angles can be simulated independently and in any order.
    """
    grid = detector_grid(config) if grid is None else grid
    p = bin_probabilities(marginal, config, grid)
    rng = np.random.default_rng([int(seed), int(stream)])
    n = config.total_counts_per_angle
    return CountHistogram(grid, rng.multinomial(n, p), marginal.theta, n)


def smooth_histogram(hist: CountHistogram, config: ApparatusConfig) -> MarginalDistribution:
    """Density estimate from counts: Gaussian kernel of std Delta x / 2, renormalized."""
    if hist.total <= 0:
        raise ValidationError("histogram has no counts")
    grid = hist.grid
    dens = hist.counts / (hist.total * grid.dx)
    sigma_bins = 0.5 * resolution(config) / grid.dx
    if sigma_bins > 1e-3:
        dens = gaussian_filter1d(dens, sigma_bins, mode="constant", cval=0.0, truncate=4.0)
    dens = np.maximum(dens, 0.0)
    return MarginalDistribution(grid, dens / (dens.sum() * grid.dx), hist.theta)
