"""Inverse problem: detector marginals -> characteristic function -> W and rho.

Transform conventions (matching `phase_space`):

    characteristic   C(kx, kp) = integral exp(i (kx x + kp p)) W(x, p) dx dp
    strip            s_theta(r) = integral exp(i r x) m_theta(x) dx = C(r cos theta, r sin theta)
    direct density   rho(x, x') = 1/(2 pi) integral C(k, x - x') exp(-i k (x + x')/2) dk

The last line is the kernel that is consistent with the Wigner convention
exp(+i p u); with the opposite sign of the 2-D transform it reads
rho(x, x') = 1/(2 pi) integral C(k, x' - x) exp(+i k (x + x')/2) dk.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from .errors import CoverageError, GridMismatchError, ValidationError
from .phase_space import (
    DensityMatrix,
    GridSpec,
    MarginalDistribution,
    WignerGrid,
    _assemble_from_centre_offset,
    density_from_wigner,
)

log = logging.getLogger(__name__)

MIN_DIRECTIONS = 8
TAPER_FRACTION = 0.1
DEFAULT_OVERSAMPLE = 8
_PAD = 12  # spline padding, polar samples


# ----------------------------------------------------------------------- types


@dataclass(frozen=True)
class Sinogram:
    """Ordered detector records, one normalized marginal per angle.

    `counts_per_angle` is 0 for exact (noiseless) marginals.
    """

    records: tuple
    counts_per_angle: int = 0
    seed: int | None = None

    def __post_init__(self):
        recs = tuple(self.records)
        object.__setattr__(self, "records", recs)
        if not recs:
            return
        grid = recs[0].grid
        for r in recs:
            if not isinstance(r, MarginalDistribution):
                raise ValidationError(f"sinogram records must be MarginalDistribution, got {type(r).__name__}")
            if r.grid != grid:
                raise GridMismatchError("all sinogram records must share one detector grid")
        th = np.array([r.theta for r in recs])
        if np.any(np.diff(th) <= 0):
            raise ValidationError("sinogram angles must be strictly increasing")

    def __len__(self):
        return len(self.records)

    @property
    def grid(self) -> GridSpec:
        if not self.records:
            raise CoverageError("empty sinogram")
        return self.records[0].grid

    @property
    def thetas(self) -> np.ndarray:
        return np.array([r.theta for r in self.records])

    @property
    def clipped_mass(self) -> float:
        return float(sum(r.clipped_mass for r in self.records))

    def angular_gap(self) -> float:
        """Largest gap between measured directions on the half circle."""
        return _directions(self.thetas)[1]


@dataclass(frozen=True)
class RadialStrip:
    """Samples of the characteristic function along direction theta at signed radii r."""

    theta: float
    r: np.ndarray
    values: np.ndarray
    grid: GridSpec  # detector grid the strip was taken from


@dataclass(frozen=True)
class CharacteristicGrid:
    """C(kx, kp) on the Cartesian grid conjugate to `grid` (both axes `grid.frequencies()`).

    `weight` is the local fill density of polar samples relative to the
    Cartesian cell size (1 = at least one strip sample per cell; smaller
    means angular undersampling), zeroed outside the cutoff.
    """

    grid: GridSpec
    values: np.ndarray
    weight: np.ndarray
    cutoff_radius: float
    hermitian_residual: float = 0.0

    @property
    def k(self) -> np.ndarray:
        return self.grid.frequencies()

    def origin_value(self) -> complex:
        c = self.grid.n_points // 2
        return complex(self.values[c, c])


@dataclass(frozen=True)
class QualityReport:
    hermiticity_residual: float  # rho before symmetrization, relative
    trace_deviation: float
    negative_eigenvalue_mass: float
    clipped_marginal_mass: float
    origin_deviation: float  # |C(0) - 1|
    path_agreement: float  # max |rho_direct - rho_via_W|
    characteristic_hermitian_residual: float
    cutoff_radius: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


# --------------------------------------------------------------- Radon oracle


def radon_profile(w: WignerGrid, theta: float, bins: GridSpec) -> np.ndarray:
    """Line integrals of W along n(theta).r = s for every bin centre s.

    Brute-force quadrature: W is evaluated by cubic-spline interpolation at
    points s n + t n_perp and summed over t with the grid step.
    """
    grid = w.grid
    dt = grid.dx
    t_max = np.sqrt(2.0) * grid.x_max + 2 * dt
    t = np.arange(-np.ceil(t_max / dt), np.ceil(t_max / dt) + 1) * dt
    s = bins.points()
    c, sn = np.cos(theta), np.sin(theta)
    xs = s[:, None] * c - t[None, :] * sn
    ps = s[:, None] * sn + t[None, :] * c
    vals = ndimage.map_coordinates(
        w.values, [(xs + grid.x_max) / grid.dx, (ps + grid.x_max) / grid.dx],
        order=3, mode="constant", cval=0.0,
    )
    return vals.sum(axis=1) * dt


def radon_oracle(w: WignerGrid, thetas: Sequence[float], bins: GridSpec) -> Sinogram:
    records = []
    for th in thetas:
        prof = radon_profile(w, th, bins)
        clipped = float(-np.sum(np.minimum(prof, 0.0)) * bins.dx)
        prof = np.maximum(prof, 0.0)
        records.append(MarginalDistribution(bins, prof / (prof.sum() * bins.dx), th, clipped))
    return Sinogram(tuple(records))


# --------------------------------------------------------------------- strips


def strip_radii(grid: GridSpec, oversample: int = DEFAULT_OVERSAMPLE, r_max: float | None = None) -> np.ndarray:
    """Symmetric radial grid with step 2 pi / (span * oversample)."""
    dr = grid.dk / oversample
    if r_max is None:
        r_max = np.sqrt(2.0) * (grid.n_points // 2 + 1) * grid.dk
    j = int(np.ceil(r_max / dr)) + _PAD
    return np.arange(-j, j + 1) * dr


def _strip_values(densities: np.ndarray, grid: GridSpec, r: np.ndarray) -> np.ndarray:
    """s(r) for each row of `densities`, computed for r >= 0 and mirrored."""
    mid = len(r) // 2
    rp = r[mid:]
    pos = densities @ np.exp(1j * np.outer(grid.points(), rp)) * grid.dx
    pos = pos / pos[..., :1].real
    return np.concatenate([np.conj(pos[..., :0:-1]), pos], axis=-1)


def slice_from_marginal(m: MarginalDistribution, oversample: int = DEFAULT_OVERSAMPLE,
                        r_max: float | None = None) -> RadialStrip:
    """One radial strip of the characteristic function from a detector marginal."""
    r = strip_radii(m.grid, oversample, r_max)
    vals = _strip_values(m.density[None, :], m.grid, r)[0]
    return RadialStrip(m.theta, r, vals, m.grid)


# ------------------------------------------------------------------- assembly


def _directions(thetas: np.ndarray) -> tuple[np.ndarray, float]:
    """Fold angles to [-pi/2, pi/2) and return the sorted distinct directions and the largest gap."""
    folded = np.mod(np.asarray(thetas, dtype=float) + np.pi / 2, np.pi) - np.pi / 2
    u = np.unique(np.round(folded, 12))
    if len(u) == 0:
        return u, np.inf
    gaps = np.diff(np.concatenate([u, [u[0] + np.pi]]))
    return u, float(gaps.max())


def _fold_strips(strips: Sequence[RadialStrip]) -> tuple[np.ndarray, np.ndarray]:
    """Map strips to directions in [-pi/2, pi/2); duplicates are averaged.

    s(theta + pi, r) = conj(s(theta, r)) because W is real.
    """
    acc: dict[float, list] = {}
    for s in strips:
        turns = np.floor((s.theta + np.pi / 2) / np.pi)
        phi = round(float(s.theta - turns * np.pi), 12)
        if phi >= np.pi / 2:
            phi -= np.pi
            turns += 1
        vals = s.values if int(turns) % 2 == 0 else np.conj(s.values)
        acc.setdefault(phi, []).append(vals)
    phis = np.array(sorted(acc))
    data = np.array([np.mean(acc[p], axis=0) for p in phis])
    return phis, data


def _validate_strips(strips: Sequence[RadialStrip]) -> tuple[GridSpec, np.ndarray]:
    if len(strips) == 0:
        raise CoverageError("no strips: sinogram is empty")
    grid, r = strips[0].grid, strips[0].r
    for s in strips:
        if s.grid != grid or len(s.r) != len(r) or not np.allclose(s.r, r, rtol=0, atol=1e-12):
            raise GridMismatchError("all strips must share one detector grid and radial grid")
    dirs, gap = _directions(np.array([s.theta for s in strips]))
    if len(dirs) < MIN_DIRECTIONS:
        raise CoverageError(f"need at least {MIN_DIRECTIONS} distinct directions, got {len(dirs)}")
    nominal = np.pi / len(dirs)
    if gap > 2 * nominal + 1e-12:
        raise CoverageError(f"angular gap {gap:.4f} rad exceeds twice the nominal spacing {nominal:.4f}")
    return grid, r


def _apodize(values: np.ndarray, rad: np.ndarray, cutoff: float) -> np.ndarray:
    start = (1 - TAPER_FRACTION) * cutoff
    taper = np.ones_like(rad)
    band = (rad > start) & (rad <= cutoff)
    taper[band] = 0.5 * (1 + np.cos(np.pi * (rad[band] - start) / (cutoff - start)))
    taper[rad > cutoff] = 0.0
    return values * taper


def _hermitian_pairs(n: int) -> np.ndarray:
    """Index of -k for each k on the frequencies() grid (-1 where unpaired)."""
    a = np.arange(n)
    partner = 2 * (n // 2) - a
    partner[(partner < 0) | (partner >= n)] = -1
    return partner


def _enforce_hermitian(values: np.ndarray) -> tuple[np.ndarray, float]:
    n = values.shape[0]
    pr = _hermitian_pairs(n)
    ok = pr >= 0
    out = values.copy()
    sub = values[np.ix_(ok, ok)]
    mirror = np.conj(values[np.ix_(pr[ok], pr[ok])])
    residual = float(np.max(np.abs(sub - mirror))) if sub.size else 0.0
    out[np.ix_(ok, ok)] = 0.5 * (sub + mirror)
    return out, residual


def _polar_coordinates(grid: GridSpec):
    k = grid.frequencies()
    KX, KP = np.meshgrid(k, k, indexing="ij")
    return KX, KP, np.hypot(KX, KP), np.arctan2(KP, KX)


def _assemble_cubic(phis, data, r, grid, KX, KP, rad, ang):
    m = len(phis)
    step = np.pi / m
    uniform = np.linspace(phis[0], phis[0] + np.pi, m, endpoint=False)
    full = np.concatenate([data, np.conj(data)], axis=0)  # directions phi, phi + pi
    if not np.allclose(phis, uniform, rtol=0, atol=1e-9):
        knots = np.concatenate([phis, phis + np.pi, [phis[0] + 2 * np.pi]])
        periodic = np.concatenate([full, full[:1]], axis=0)
        targets = np.concatenate([uniform, uniform + np.pi])
        full = CubicSpline(knots, periodic.real, axis=0, bc_type="periodic")(targets) \
            + 1j * CubicSpline(knots, periodic.imag, axis=0, bc_type="periodic")(targets)
    dr = r[1] - r[0]
    i0 = len(r) // 2 - _PAD  # keep _PAD samples of negative radius
    polar = full[:, i0:]
    polar = np.concatenate([polar[-_PAD:], polar, polar[:_PAD]], axis=0)
    ca = np.mod(ang - phis[0], 2 * np.pi) / step + _PAD
    cr = (rad - r[i0]) / dr
    re = ndimage.map_coordinates(polar.real, [ca, cr], order=3, mode="nearest")
    im = ndimage.map_coordinates(polar.imag, [ca, cr], order=3, mode="nearest")
    return re + 1j * im


def _assemble_idw(phis, data, r, grid, KX, KP, rad, ang, oversample, power=2.0):
    """Inverse-distance weighting over the 4 nearest polar samples (bracketing angles x radii)."""
    step = max(1, int(oversample))
    mid = len(r) // 2
    r_n = r[mid % step::step]  # native-step radii, still contains r = 0
    data = data[:, mid % step::step]
    m = len(phis)
    dirs = np.concatenate([phis, phis + np.pi, [phis[0] + 2 * np.pi]])
    vals = np.concatenate([data, np.conj(data), data[:1]], axis=0)
    a = np.mod(ang - phis[0], 2 * np.pi) + phis[0]
    ia = np.clip(np.searchsorted(dirs, a, side="right") - 1, 0, 2 * m - 1)
    dr = r_n[1] - r_n[0]
    ir = np.clip(np.floor((rad - r_n[0]) / dr).astype(int), 0, len(r_n) - 2)
    num = np.zeros(rad.shape, complex)
    den = np.zeros(rad.shape)
    for da in (0, 1):
        for dj in (0, 1):
            th = dirs[ia + da]
            rr = r_n[ir + dj]
            d = np.hypot(KX - rr * np.cos(th), KP - rr * np.sin(th))
            wgt = 1.0 / np.maximum(d, 1e-12) ** power
            num += wgt * vals[ia + da, ir + dj]
            den += wgt
    return num / den


def assemble_characteristic(strips: Sequence[RadialStrip], cutoff: float, method: str = "cubic") -> CharacteristicGrid:
    """Fill the Cartesian characteristic grid from radial strips.

    ``method="cubic"`` (default) interpolates the polar samples with cubic
    splines in angle and radius; ``"idw"`` uses inverse-distance weighting
    of the 4 nearest polar samples. Values beyond `cutoff` are zero, with a
    raised-cosine taper over the outer 10 %, and C(-k) = conj C(k) is
    enforced by averaging.
    """
    grid, r = _validate_strips(strips)
    if not cutoff > 0:
        raise ValidationError(f"cutoff must be positive, got {cutoff}")
    cutoff = min(cutoff, (grid.n_points // 2) * grid.dk)
    phis, data = _fold_strips(strips)
    KX, KP, rad, ang = _polar_coordinates(grid)
    if method == "cubic":
        vals = _assemble_cubic(phis, data, r, grid, KX, KP, rad, ang)
    elif method == "idw":
        oversample = int(round(grid.dk / (r[1] - r[0])))
        vals = _assemble_idw(phis, data, r, grid, KX, KP, rad, ang, oversample)
    else:
        raise ValidationError(f"unknown assembly method {method!r}")
    vals = _apodize(vals, rad, cutoff)
    vals, residual = _enforce_hermitian(vals)
    arc = np.maximum(rad, grid.dk) * (np.pi / len(phis))
    weight = np.minimum(1.0, grid.dk / arc) * (rad <= cutoff)
    return CharacteristicGrid(grid, vals, weight, float(cutoff), residual)


# ------------------------------------------------------------------ inversion


def _inverse_kernel(grid: GridSpec) -> np.ndarray:
    return np.exp(-1j * np.outer(grid.frequencies(), grid.points()))


def wigner_from_characteristic(c: CharacteristicGrid) -> WignerGrid:
    """2-D inverse transform W = (2 pi)^-2 sum C exp(-i k.r) dk^2 on the phase-space grid."""
    grid = c.grid
    e = _inverse_kernel(grid)
    w = e.T @ c.values @ e * (grid.dk**2 / (4 * np.pi**2))
    scale = np.max(np.abs(w))
    if scale > 0 and np.max(np.abs(w.imag)) > 1e-6 * scale:
        log.warning("inverse transform has imaginary residue %.3g", np.max(np.abs(w.imag)) / scale)
    return WignerGrid(grid, grid, np.real(w))


def _density_from_characteristic_raw(c: CharacteristicGrid) -> np.ndarray:
    grid = c.grid
    n = grid.n_points
    x = grid.points()
    k = grid.frequencies()
    # continue C(k, q) in its second argument to q = x - x' = m dx
    partial = c.values @ _inverse_kernel(grid) * (grid.dk / (2 * np.pi))  # C(k, p_j) -> (k, p)
    q = np.arange(-(n - 1), n) * grid.dx
    cq = partial @ np.exp(1j * np.outer(x, q)) * grid.dx  # C(k, q_m)
    # rho(x_s, x_t) = dk/2pi sum_k C(k, x_s - x_t) exp(-i k (x_s + x_t)/2)
    centre = np.exp(-1j * np.outer(x, k)) @ cq * (grid.dk / (2 * np.pi))
    half = np.exp(-1j * np.outer(x + 0.5 * grid.dx, k)) @ cq * (grid.dk / (2 * np.pi))
    # column m holds q = x_s - x_t; the scatter helper expects u = x_t - x_s
    return _assemble_from_centre_offset(centre[:, ::-1], half[:, ::-1], n)


def density_from_characteristic(c: CharacteristicGrid) -> DensityMatrix:
    """Density matrix straight from the characteristic grid (Hermitian part)."""
    return DensityMatrix(c.grid, _density_from_characteristic_raw(c)).hermitian_part()


def characteristic_from_wigner(w: WignerGrid) -> np.ndarray:
    """Direct 2-D transform of W onto the Cartesian characteristic grid."""
    grid = w.grid
    e = np.exp(1j * np.outer(grid.points(), grid.frequencies()))
    return e.T @ w.values @ e * grid.dx**2


def characteristic_at(w: WignerGrid, kx: np.ndarray, kp: np.ndarray) -> np.ndarray:
    """Brute-force C(kx, kp) = sum W exp(i (kx x + kp p)) dx dp at arbitrary points."""
    grid = w.grid
    x = grid.points()
    kx = np.atleast_1d(np.asarray(kx, dtype=float))
    kp = np.atleast_1d(np.asarray(kp, dtype=float))
    ex = np.exp(1j * np.outer(kx, x))
    ep = np.exp(1j * np.outer(kp, x))
    return np.sum((ex @ w.values) * ep, axis=1) * grid.dx**2


# ------------------------------------------------------------------- pipeline


def strips_from_sinogram(sinogram: Sinogram, oversample: int = DEFAULT_OVERSAMPLE) -> list[RadialStrip]:
    if len(sinogram) == 0:
        raise CoverageError("empty sinogram")
    grid = sinogram.grid
    r = strip_radii(grid, oversample)
    dens = np.array([rec.density for rec in sinogram.records])
    vals = _strip_values(dens, grid, r)
    return [RadialStrip(rec.theta, r, v, grid) for rec, v in zip(sinogram.records, vals)]


def cutoff_for(resolution: float) -> float:
    """Characteristic-function cutoff for detector resolution dx: pi / dx."""
    if not resolution > 0:
        raise ValidationError(f"resolution must be positive, got {resolution}")
    return np.pi / resolution


def assemble_from_sinogram(sinogram: Sinogram, resolution: float, method: str = "cubic",
                           oversample: int = DEFAULT_OVERSAMPLE) -> CharacteristicGrid:
    if len(sinogram) == 0:
        raise CoverageError("empty sinogram")
    return assemble_characteristic(strips_from_sinogram(sinogram, oversample), cutoff_for(resolution), method)


def negative_eigenvalue_mass(rho: DensityMatrix) -> float:
    ev = np.linalg.eigvalsh(rho.hermitian_part().operator())
    return float(-np.sum(ev[ev < 0]))


def invert_characteristic(c: CharacteristicGrid, clipped_marginal_mass: float = 0.0):
    """Both inversion routes plus the quality report: (W, rho, QualityReport)."""
    w = wigner_from_characteristic(c)
    raw = DensityMatrix(c.grid, _density_from_characteristic_raw(c))
    rho = raw.hermitian_part()
    via_w = density_from_wigner(w)
    report = QualityReport(
        hermiticity_residual=raw.hermiticity_residual(),
        trace_deviation=abs(rho.trace() - 1.0),
        negative_eigenvalue_mass=negative_eigenvalue_mass(rho),
        clipped_marginal_mass=float(clipped_marginal_mass),
        origin_deviation=abs(c.origin_value() - 1.0),
        path_agreement=float(np.max(np.abs(raw.elements - via_w.elements))),
        characteristic_hermitian_residual=c.hermitian_residual,
        cutoff_radius=c.cutoff_radius,
    )
    return w, rho, report


def reconstruct(sinogram: Sinogram, resolution: float, method: str = "cubic",
                oversample: int = DEFAULT_OVERSAMPLE):
    """Sinogram -> (WignerGrid, DensityMatrix, QualityReport)."""
    c = assemble_from_sinogram(sinogram, resolution, method, oversample)
    return invert_characteristic(c, sinogram.clipped_mass)


# -------------------------------------------------------------------- metrics


def _psd_root(op: np.ndarray) -> tuple[np.ndarray, float]:
    """Square root of the trace-normalized PSD part of a Hermitian operator."""
    ev, vec = np.linalg.eigh(0.5 * (op + op.conj().T))
    clipped = float(-np.sum(ev[ev < 0]))
    tol = len(ev) * np.finfo(float).eps * max(np.max(np.abs(ev)), 1e-300)
    ev = np.where(ev > tol, ev, 0.0)
    total = ev.sum()
    if total <= 0:
        raise ValidationError("state has no positive spectrum")
    ev = ev / total
    return (vec * np.sqrt(ev)) @ vec.conj().T, clipped


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(a) b sqrt(a)))^2.

    Negative eigenvalues are clipped and both states renormalized to unit
    trace first. Evaluated as the squared nuclear norm of sqrt(a) sqrt(b),
    which is symmetric in its arguments and avoids square roots of
    rounding-level eigenvalues.
    """
    if a.grid != b.grid:
        raise GridMismatchError("fidelity needs states on the same grid")
    for s in (a, b):
        if s.hermiticity_residual() > 1e-8:
            raise ValidationError(f"fidelity needs Hermitian input (residual {s.hermiticity_residual():.3g})")
    ra, _ = _psd_root(a.operator())
    rb, _ = _psd_root(b.operator())
    sv = np.linalg.svd(ra @ rb, compute_uv=False)
    return float(np.sum(sv) ** 2)


def wigner_l2_error(w: WignerGrid, reference: WignerGrid) -> float:
    """Root-mean-square difference over the phase-space grid, relative to max |reference|."""
    if w.x_grid != reference.x_grid or w.p_grid != reference.p_grid:
        raise GridMismatchError("Wigner grids differ")
    return float(np.sqrt(np.mean((w.values - reference.values) ** 2)) / np.max(np.abs(reference.values)))


def fringe_visibility(m: MarginalDistribution, separation: float) -> float:
    """Contrast of the two-path fringe term at frequency `separation`.

    For a pattern env(x) (1 + V cos(separation x + phase)) with a smooth
    envelope this returns V, i.e. (max - min) / (max + min) of the fringe
    modulation with the envelope divided out.
    """
    x = m.grid.points()
    dx = m.grid.dx
    total = np.sum(m.density) * dx
    return float(2 * np.abs(np.sum(m.density * np.exp(1j * separation * x)) * dx) / total)


def fringe_period(m: MarginalDistribution) -> float:
    """Period 2 pi / u* of the dominant fringe, u* the strongest non-central peak of |M(u)|.

    M(u) = integral m(x) exp(i u x) dx. A smooth envelope only widens the
    peak at the fringe frequency, it does not move it, so this is unbiased
    where locating maxima or minima of m itself is pulled by the envelope.
    """
    from scipy.optimize import minimize_scalar

    x = m.grid.points()
    dx = m.grid.dx

    def mag(u):
        return np.abs(np.sum(m.density * np.exp(1j * u * x)) * dx)

    u = np.linspace(0.0, np.pi / dx, 16 * m.grid.n_points)
    a = np.abs(np.exp(1j * np.outer(u, x)) @ m.density) * dx
    rising = np.nonzero(np.diff(a) > 0)[0]
    if len(rising) == 0:
        raise ValidationError("no fringe component: |M(u)| decreases monotonically")
    start = rising[0]
    j = start + int(np.argmax(a[start:]))
    if j >= len(u) - 1 or a[j] < 1e-6:
        raise ValidationError("no resolvable fringe component")
    res = minimize_scalar(lambda v: -mag(v), bounds=(u[j - 1], u[j + 1]), method="bounded",
                          options={"xatol": 1e-12})
    return float(2 * np.pi / res.x)
