"""Orchestration: simulate -> measure -> reconstruct -> compare, with file output.

Artifact tree written under ``config.out``::

    truth_wigner.grid  truth_rho_re.grid  truth_rho_im.grid
    sinogram.txt
    recon_wigner.grid  recon_rho_re.grid  recon_rho_im.grid
    characteristic_re.grid  characteristic_im.grid  characteristic_weight.grid
    report.txt
    plots/marginal_NNN.dat  plots/truth_wigner.dat  plots/recon_wigner.dat
    timings.txt        (wall-clock only; the one file that differs between runs)
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import formats
from .apparatus import measure, plan_angles, require_coverage, resolution, smooth_histogram
from .config import ExperimentConfig, StateSpec, config_sections
from .errors import GridMismatchError, ValidationError
from .phase_space import (
    DensityMatrix,
    GridSpec,
    WignerGrid,
    decohere,
    density_from_wavefunction,
    make_double_slit,
    make_gaussian,
    marginal,
    purity,
    wigner_from_density,
)
from .tomography import (
    QualityReport,
    Sinogram,
    assemble_from_sinogram,
    fidelity,
    fringe_visibility,
    invert_characteristic,
    wigner_l2_error,
)

TRUTH_WIGNER = "truth_wigner.grid"
TRUTH_RHO = "truth_rho"
RECON_WIGNER = "recon_wigner.grid"
RECON_RHO = "recon_rho"
SINOGRAM = "sinogram.txt"
REPORT = "report.txt"
TIMINGS = "timings.txt"

THRESHOLD_KEYS = ("min_fidelity", "max_wigner_l2_error", "max_purity_excess")


def build_state(spec: StateSpec, grid: GridSpec) -> DensityMatrix:
    if spec.kind == "gaussian":
        return density_from_wavefunction(make_gaussian(grid, spec.center, spec.sigma, spec.momentum))
    rho = density_from_wavefunction(make_double_slit(grid, spec.separation_sigmas, spec.sigma))
    if spec.kind == "decohered_double_slit":
        rho = decohere(rho, spec.lam, spec.observable, spec.width)
    return rho


@dataclass
class Timer:
    stages: dict = field(default_factory=dict)

    def __call__(self, name):
        timer = self

        class _Stage:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.stages[name] = time.perf_counter() - self.t0

        return _Stage()


@dataclass
class RunReport:
    config: dict
    metrics: dict
    quality: QualityReport | None = None
    timings: dict = field(default_factory=dict)

    def sections(self) -> dict[str, dict]:
        out = {f"config.{k}": v for k, v in self.config.items()}
        if self.quality is not None:
            out["quality"] = self.quality.as_dict()
        out["metrics"] = self.metrics
        return out

    def write(self, directory: Path) -> None:
        formats.write_report(directory / REPORT, self.sections())
        if self.timings:
            lines = [f"{k}: {v:.6f} s" for k, v in self.timings.items()]
            formats.atomic_write_text(directory / TIMINGS, "\n".join(lines) + "\n")

    def summary(self) -> str:
        rows = [f"{k:>24s}  {v!r}" for k, v in self.metrics.items()]
        return "\n".join(rows)


@dataclass
class SimulationResult:
    sinogram: Sinogram
    truth: DensityMatrix
    truth_wigner: WignerGrid
    timings: dict


def _effective_resolution(cfg: ExperimentConfig) -> float:
    """Ideal detector (grid Nyquist) for exact marginals, else max(span/N, pitch, bin)."""
    if cfg.noiseless:
        return cfg.grid.dx
    return max(resolution(cfg.apparatus), cfg.grid.dx)


def acquire(cfg: ExperimentConfig, truth_wigner: WignerGrid) -> Sinogram:
    """One record per planned angle; angle i draws from RNG stream (seed, i)."""
    plan = plan_angles(cfg.apparatus, cfg.n_angles)

    def record(item):
        i, theta = item
        m = marginal(truth_wigner, float(theta))
        if cfg.noiseless:
            return m
        hist = measure(m, cfg.apparatus, cfg.seed, stream=i, grid=cfg.grid)
        return smooth_histogram(hist, cfg.apparatus)

    items = list(enumerate(plan.thetas))
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(record, items))
    else:
        records = [record(it) for it in items]
    counts = 0 if cfg.noiseless else cfg.apparatus.total_counts_per_angle
    return Sinogram(tuple(records), counts, cfg.seed)


def run_simulate(cfg: ExperimentConfig, write_plots: bool = True) -> SimulationResult:
    require_coverage(cfg.apparatus)  # fail before any computation
    timer = Timer()
    out = cfg.out
    with timer("truth"):
        truth = build_state(cfg.state, cfg.grid)
        w = wigner_from_density(truth)
    with timer("acquire"):
        sino = acquire(cfg, w)
    with timer("write_simulation"):
        formats.write_wigner(out / TRUTH_WIGNER, w, cfg.seed)
        formats.write_density(out / TRUTH_RHO, truth, cfg.seed)
        formats.write_sinogram(out / SINOGRAM, sino)
        if write_plots:
            for i, rec in enumerate(sino.records):
                formats.write_marginal_columns(out / "plots" / f"marginal_{i:03d}.dat", rec, cfg.seed)
            formats.write_wigner_columns(out / "plots" / "truth_wigner.dat", w, cfg.seed)
    formats.atomic_write_text(out / TIMINGS, "".join(f"{k}: {v:.6f} s\n" for k, v in timer.stages.items()))
    return SimulationResult(sino, truth, w, timer.stages)


def state_metrics(truth: DensityMatrix, truth_w: WignerGrid, rho: DensityMatrix, w: WignerGrid,
                  separation: float | None = None) -> dict:
    metrics = {
        "fidelity": fidelity(rho, truth),
        "purity_true": purity(truth),
        "purity_reconstructed": purity(rho),
        "wigner_l2_error": wigner_l2_error(w, truth_w),
    }
    if separation is not None:
        metrics["fringe_visibility_true"] = fringe_visibility(marginal(truth_w, math.pi / 2), separation)
        metrics["fringe_visibility"] = fringe_visibility(marginal(w, math.pi / 2), separation)
    for k, v in metrics.items():
        if not np.isfinite(v):
            raise ValidationError(f"metric {k} is not finite")
    return metrics


def run_reconstruct(cfg: ExperimentConfig, sinogram_path: Path | None = None,
                    write_plots: bool = True, prior_timings: dict | None = None) -> RunReport:
    timer = Timer(dict(prior_timings or {}))
    out = cfg.out
    with timer("read_sinogram"):
        sino = formats.read_sinogram(sinogram_path or out / SINOGRAM)
    if sino.grid != cfg.grid:
        raise GridMismatchError("sinogram grid does not match the configured grid")
    with timer("assemble"):
        c = assemble_from_sinogram(sino, _effective_resolution(cfg))
    with timer("invert"):
        w, rho, quality = invert_characteristic(c, sino.clipped_mass)
    with timer("regenerate_truth"):
        truth = build_state(cfg.state, cfg.grid)
        truth_w = wigner_from_density(truth)
    with timer("metrics"):
        metrics = state_metrics(truth, truth_w, rho, w, cfg.state.separation)
    with timer("write_reconstruction"):
        seed = sino.seed
        axes = (cfg.grid, cfg.grid)
        formats.write_wigner(out / RECON_WIGNER, w, seed)
        formats.write_density(out / RECON_RHO, rho, seed)
        formats.write_grid(out / "characteristic_re.grid", "characteristic_real", c.values.real, axes, seed)
        formats.write_grid(out / "characteristic_im.grid", "characteristic_imag", c.values.imag, axes, seed)
        formats.write_grid(out / "characteristic_weight.grid", "characteristic_weight", c.weight, axes, seed)
        if write_plots:
            formats.write_wigner_columns(out / "plots" / "recon_wigner.dat", w, seed)
    report = RunReport(config_sections(cfg), metrics, quality, timer.stages)
    report.write(out)
    return report


def read_thresholds(path) -> dict[str, float]:
    """``key: value`` lines; keys from THRESHOLD_KEYS."""
    path = Path(path)
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition(":")
        key = key.strip()
        if not sep or key not in THRESHOLD_KEYS:
            raise ValidationError(f"{path}:{lineno}: expected one of {', '.join(THRESHOLD_KEYS)} as 'key: value'")
        try:
            out[key] = float(val)
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: cannot parse {val.strip()!r} as a number") from None
    return out


def threshold_breaches(metrics: dict, thresholds: dict[str, float]) -> list[str]:
    breaches = []
    if "min_fidelity" in thresholds and metrics["fidelity"] < thresholds["min_fidelity"]:
        breaches.append(f"fidelity {metrics['fidelity']:.6g} < {thresholds['min_fidelity']}")
    if "max_wigner_l2_error" in thresholds and metrics["wigner_l2_error"] > thresholds["max_wigner_l2_error"]:
        breaches.append(f"wigner_l2_error {metrics['wigner_l2_error']:.6g} > {thresholds['max_wigner_l2_error']}")
    if "max_purity_excess" in thresholds:
        excess = metrics["purity_reconstructed"] - metrics["purity_true"]
        if excess > thresholds["max_purity_excess"]:
            breaches.append(f"purity excess {excess:.6g} > {thresholds['max_purity_excess']}")
    return breaches


def run_compare(truth_dir: Path, recon_dir: Path, thresholds: dict | None = None) -> tuple[RunReport, list[str]]:
    """Metrics of recon_dir's state against truth_dir's; accepts either naming (truth_* or recon_*)."""

    def load(directory: Path, prefer: str):
        directory = Path(directory)
        order = ("truth", "recon") if prefer == "truth" else ("recon", "truth")
        for tag in order:
            wpath = directory / f"{tag}_wigner.grid"
            if wpath.exists():
                return formats.read_density(directory / f"{tag}_rho"), formats.read_wigner(wpath)
        raise FileNotFoundError(f"no truth_* or recon_* grids in {directory}")

    timer = Timer()
    with timer("read"):
        truth, truth_w = load(truth_dir, "truth")
        rho, w = load(recon_dir, "recon")
    if truth.grid != rho.grid:
        raise GridMismatchError(f"grids differ: {truth.grid} vs {rho.grid}")
    with timer("metrics"):
        metrics = state_metrics(truth, truth_w, rho.hermitian_part(), w)
    report = RunReport({"compare": {"truth": str(truth_dir), "reconstruction": str(recon_dir)}}, metrics,
                       timings=timer.stages)
    return report, threshold_breaches(metrics, thresholds or {})
