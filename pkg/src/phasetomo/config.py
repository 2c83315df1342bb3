"""Experiment configuration: dataclasses and the sectioned INI reader.

Every dimensional value carries its unit after the number (``v0 = 2650 V``,
``x_max = 12 nat``); dimensionless values carry none. Unknown sections or
keys are errors, reported with file, line and field.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .apparatus import ELECTRON_CHARGE, ELECTRON_MASS, ApparatusConfig, detector_grid
from .errors import ValidationError
from .phase_space import GridSpec

STATE_KINDS = ("gaussian", "double_slit", "decohered_double_slit")
OBSERVABLES = ("which_side", "position")


class ConfigError(ValidationError):
    def __init__(self, message: str, source: str = "<config>", line: int | None = None, key: str | None = None):
        where = source if line is None else f"{source}:{line}"
        field_txt = f" [{key}]" if key else ""
        super().__init__(f"{where}{field_txt}: {message}")
        self.source, self.line, self.key = source, line, key


@dataclass(frozen=True)
class StateSpec:
    kind: str
    sigma: float
    center: float = 0.0
    momentum: float = 0.0
    separation_sigmas: float | None = None
    lam: float | None = None
    observable: str = "which_side"
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in STATE_KINDS:
            raise ValidationError(f"unknown state kind {self.kind!r}; choose from {', '.join(STATE_KINDS)}")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if self.kind != "gaussian" and self.separation_sigmas is None:
            raise ValidationError(f"state kind {self.kind!r} requires separation_sigmas")
        if self.kind == "decohered_double_slit" and self.lam is None:
            raise ValidationError("state kind 'decohered_double_slit' requires lam")
        if self.observable not in OBSERVABLES:
            raise ValidationError(f"unknown observable {self.observable!r}")

    @property
    def separation(self) -> float | None:
        """Lobe separation in natural units (None for a single Gaussian)."""
        return None if self.separation_sigmas is None else self.separation_sigmas * self.sigma


@dataclass(frozen=True)
class ExperimentConfig:
    state: StateSpec
    apparatus: ApparatusConfig
    grid: GridSpec
    seed: int
    out: Path
    n_angles: int | None = None
    noiseless: bool = False
    workers: int = 1
    source: str = field(default="<memory>", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "out", Path(self.out))
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValidationError(f"seed must be a non-negative integer, got {self.seed}")
        if self.n_angles is not None and self.n_angles < 8:
            raise ValidationError(f"n_angles must be at least 8, got {self.n_angles}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        det = detector_grid(self.apparatus)
        if det.n_points != self.grid.n_points or not math.isclose(det.x_max, self.grid.x_max, rel_tol=1e-12):
            raise ValidationError(
                f"detector bins ({det.n_points} over span {self.apparatus.detector_span!r}) must coincide "
                f"with the phase-space grid ({self.grid.n_points} points, span {self.grid.span!r})"
            )

    def with_overrides(self, *, seed=None, out=None, n_angles=None, counts=None, noiseless=None):
        cfg = self
        if counts is not None:
            cfg = replace(cfg, apparatus=replace(cfg.apparatus, total_counts_per_angle=counts))
        changes = {k: v for k, v in dict(seed=seed, out=out, n_angles=n_angles, noiseless=noiseless).items()
                   if v is not None}
        return replace(cfg, **changes) if changes else cfg


# ------------------------------------------------------------------ INI schema

# key -> (unit or None for dimensionless, type, required)
_SCHEMA = {
    "state": {
        "kind": ("str", str, True),
        "sigma": ("nat", float, True),
        "center": ("nat", float, False),
        "momentum": ("nat", float, False),
        "separation_sigmas": (None, float, False),
        "lam": (None, float, False),
        "observable": ("str", str, False),
        "width": ("nat", float, False),
    },
    "apparatus": {
        "v0": ("V", float, True),
        "box_half_length": ("m", float, True),
        "accel_potential": ("V", float, True),
        "particle_charge_mag": ("C", float, False),
        "particle_mass": ("kg", float, False),
        "n_detector_bins": (None, int, False),
        "total_counts_per_angle": (None, int, True),
        "detector_pitch": ("nat", float, True),
        "detector_span": ("nat", float, False),
    },
    "grid": {
        "n_points": (None, int, True),
        "x_max": ("nat", float, True),
    },
    "run": {
        "seed": (None, int, True),
        "out": ("str", str, False),
        "n_angles": (None, int, False),
        "noiseless": ("bool", bool, False),
        "workers": (None, int, False),
    },
}


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> 1-based line number, for diagnostics."""
    index: dict[tuple[str, str], int] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            index[(section, "")] = lineno
        elif line and line[0] not in "#;" and ("=" in line or ":" in line):
            key = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            index[(section, key)] = lineno
    return index


def _convert(raw: str, unit, typ, err):
    raw = raw.strip()
    if unit == "str":
        if not raw:
            err("empty value")
        return raw
    if unit == "bool":
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        err(f"expected a boolean, got {raw!r}")
    parts = raw.split()
    if unit is None:
        if len(parts) != 1:
            err(f"dimensionless value expected, got {raw!r}")
        number = parts[0]
    else:
        if len(parts) != 2:
            err(f"value must carry its unit, e.g. '{parts[0] if parts else '1.0'} {unit}'")
        if parts[1] != unit:
            err(f"unit must be {unit!r}, got {parts[1]!r}")
        number = parts[0]
    try:
        if typ is int:
            val = float(number)
            if val != int(val):
                raise ValueError
            return int(val)
        return float(number)
    except ValueError:
        err(f"cannot parse {number!r} as {typ.__name__}")


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " "), source) from None
    lines = _line_index(text)
    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]", source, lines.get((section, "")))
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError("unknown key", source, lines.get((section, key)), f"{section}.{key}")
            unit, typ, _ = _SCHEMA[section][key]

            def err(msg, _k=key, _s=section):
                raise ConfigError(msg, source, lines.get((_s, _k)), f"{_s}.{_k}")

            values[section][key] = _convert(raw, unit, typ, err)
    for section, keys in _SCHEMA.items():
        if section not in values:
            raise ConfigError(f"missing section [{section}]", source)
        for key, (_, _, required) in keys.items():
            if required and key not in values[section]:
                raise ConfigError("required key missing", source, lines.get((section, "")), f"{section}.{key}")

    def build(section, factory):
        try:
            return factory()
        except ValidationError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), source, lines.get((section, "")), section) from None

    st = values["state"]
    state = build("state", lambda: StateSpec(**st))
    gr = values["grid"]
    grid = build("grid", lambda: GridSpec(gr["n_points"], gr["x_max"]))
    ap = dict(values["apparatus"])
    ap.setdefault("particle_charge_mag", ELECTRON_CHARGE)
    ap.setdefault("particle_mass", ELECTRON_MASS)
    ap.setdefault("n_detector_bins", grid.n_points)
    ap.setdefault("detector_span", grid.span)
    apparatus = build("apparatus", lambda: ApparatusConfig(**ap))
    run = dict(values["run"])
    out = Path(run.pop("out", "out"))
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out
    return build("run", lambda: ExperimentConfig(state, apparatus, grid, out=out, source=source, **run))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"not UTF-8 text ({exc})", str(path)) from None
    return parse_config(text, str(path))


def config_sections(cfg: ExperimentConfig) -> dict[str, dict]:
    """Config echo as report sections (values with their units)."""
    s, a, g = cfg.state, cfg.apparatus, cfg.grid
    state = {"kind": s.kind, "sigma": f"{s.sigma!r} nat", "center": f"{s.center!r} nat",
             "momentum": f"{s.momentum!r} nat"}
    if s.separation_sigmas is not None:
        state["separation_sigmas"] = repr(float(s.separation_sigmas))
    if s.lam is not None:
        state.update(lam=repr(float(s.lam)), observable=s.observable, width=f"{s.width!r} nat")
    return {
        "state": state,
        "apparatus": {
            "v0": f"{a.v0!r} V", "box_half_length": f"{a.box_half_length!r} m",
            "accel_potential": f"{a.accel_potential!r} V",
            "particle_charge_mag": f"{a.particle_charge_mag!r} C", "particle_mass": f"{a.particle_mass!r} kg",
            "n_detector_bins": a.n_detector_bins, "total_counts_per_angle": a.total_counts_per_angle,
            "detector_pitch": f"{a.detector_pitch!r} nat", "detector_span": f"{a.detector_span!r} nat",
        },
        "grid": {"n_points": g.n_points, "x_max": f"{g.x_max!r} nat"},
        "run": {"seed": cfg.seed, "n_angles": "auto" if cfg.n_angles is None else cfg.n_angles,
                "noiseless": cfg.noiseless},
    }
