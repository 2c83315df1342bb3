"""On-disk formats.

Grid files (`.grid`)
    ASCII header lines, terminated by a line ``END``, followed by the raw
    payload: little-endian IEEE-754 doubles, row-major (C order)::

        PHASETOMO-GRID
        version: 1
        kind: wigner
        dtype: <f8
        shape: 256 256
        axis0: 256 12.0
        axis1: 256 12.0
        seed: 7
        END
        <8 * 256 * 256 bytes>

    ``axisK`` lines give (n_points, x_max) of the axis, floats in repr form so
    they round-trip exactly. ``seed`` is ``none`` for seedless data. Complex
    arrays are stored as two files (real and imaginary part).

Sinogram and report files (`.txt`)
    Plain ``key: value`` lines. Sinograms carry a global block followed by
    one ``[record i]`` section per angle; arrays are single lines of
    space-separated repr floats.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .phase_space import DensityMatrix, GridSpec, MarginalDistribution, WignerGrid

GRID_MAGIC = "PHASETOMO-GRID"
SINOGRAM_MAGIC = "PHASETOMO-SINOGRAM"
REPORT_MAGIC = "PHASETOMO-REPORT"
FORMAT_VERSION = 1
DTYPE_TAG = "<f8"


# --------------------------------------------------------------- atomic I/O


def atomic_write_bytes(path, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _fmt(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split()], dtype=float)


# --------------------------------------------------------------- grid files


@dataclass(frozen=True)
class GridFile:
    kind: str
    values: np.ndarray
    axes: tuple
    seed: int | None = None


def encode_grid(kind: str, values: np.ndarray, axes, seed: int | None = None) -> bytes:
    values = np.asarray(values)
    if values.dtype.kind not in "fiu":
        raise FormatError(f"grid payload must be real, got dtype {values.dtype}")
    if values.ndim != len(axes):
        raise FormatError(f"{values.ndim}-D payload but {len(axes)} axes")
    if kind.strip() != kind or not kind or any(c.isspace() for c in kind):
        raise FormatError(f"invalid kind tag {kind!r}")
    lines = [
        GRID_MAGIC,
        f"version: {FORMAT_VERSION}",
        f"kind: {kind}",
        f"dtype: {DTYPE_TAG}",
        "shape: " + " ".join(str(s) for s in values.shape),
    ]
    for i, (ax, s) in enumerate(zip(axes, values.shape)):
        if ax.n_points != s:
            raise FormatError(f"axis {i} has {ax.n_points} points but payload has {s}")
        lines.append(f"axis{i}: {ax.n_points} {ax.x_max!r}")
    lines += [f"seed: {_fmt(seed)}", "END", ""]
    header = "\n".join(lines).encode("ascii")
    return header + np.ascontiguousarray(values, dtype=DTYPE_TAG).tobytes(order="C")


def decode_grid(data: bytes, source: str = "<bytes>") -> GridFile:
    pos = 0
    meta: dict[str, str] = {}
    first = True
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise FormatError(f"{source}: header not terminated by END")
        line = data[pos:end].decode("ascii", errors="replace")
        pos = end + 1
        if first:
            if line != GRID_MAGIC:
                raise FormatError(f"{source}: bad magic {line!r}")
            first = False
            continue
        if line == "END":
            break
        key, sep, val = line.partition(":")
        if not sep:
            raise FormatError(f"{source}: malformed header line {line!r}")
        meta[key.strip()] = val.strip()
    try:
        version = int(meta["version"])
        kind = meta["kind"]
        dtype = meta["dtype"]
        shape = tuple(int(s) for s in meta["shape"].split())
        seed_txt = meta["seed"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{source}: missing or invalid header field ({exc})") from None
    if version != FORMAT_VERSION:
        raise FormatError(f"{source}: unsupported version {version}")
    if dtype != DTYPE_TAG:
        raise FormatError(f"{source}: unsupported dtype {dtype!r}")
    axes = []
    for i in range(len(shape)):
        try:
            n_txt, xm_txt = meta[f"axis{i}"].split()
            axes.append(GridSpec(int(n_txt), float(xm_txt)))
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{source}: bad axis{i} line ({exc})") from None
    expected = 8 * int(np.prod(shape))
    payload = data[pos:]
    if len(payload) != expected:
        raise FormatError(f"{source}: payload has {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype=DTYPE_TAG).reshape(shape).astype(float)
    seed = None if seed_txt == "none" else int(seed_txt)
    return GridFile(kind, values, tuple(axes), seed)


def write_grid(path, kind: str, values: np.ndarray, axes, seed: int | None = None) -> None:
    atomic_write_bytes(path, encode_grid(kind, values, axes, seed))


def read_grid(path) -> GridFile:
    path = Path(path)
    return decode_grid(path.read_bytes(), str(path))


def write_wigner(path, w: WignerGrid, seed: int | None = None) -> None:
    write_grid(path, "wigner", w.values, (w.x_grid, w.p_grid), seed)


def read_wigner(path) -> WignerGrid:
    g = read_grid(path)
    if g.kind != "wigner" or len(g.axes) != 2:
        raise FormatError(f"{path}: expected a 2-D wigner grid, found kind {g.kind!r}")
    return WignerGrid(g.axes[0], g.axes[1], g.values)


def density_paths(stem) -> tuple[Path, Path]:
    stem = Path(stem)
    return stem.with_name(stem.name + "_re.grid"), stem.with_name(stem.name + "_im.grid")


def write_density(stem, rho: DensityMatrix, seed: int | None = None) -> None:
    """Write rho as ``<stem>_re.grid`` and ``<stem>_im.grid``."""
    re_path, im_path = density_paths(stem)
    axes = (rho.grid, rho.grid)
    write_grid(re_path, "rho_real", rho.elements.real, axes, seed)
    write_grid(im_path, "rho_imag", rho.elements.imag, axes, seed)


def read_density(stem) -> DensityMatrix:
    re_path, im_path = density_paths(stem)
    re, im = read_grid(re_path), read_grid(im_path)
    if re.kind != "rho_real" or im.kind != "rho_imag":
        raise FormatError(f"{stem}: unexpected kinds {re.kind!r}/{im.kind!r}")
    if re.axes != im.axes or re.axes[0] != re.axes[1]:
        raise FormatError(f"{stem}: real and imaginary parts disagree on the grid")
    return DensityMatrix(re.axes[0], re.values + 1j * im.values)


# -------------------------------------------------------------- key-value text


def _parse_kv_sections(text: str, source: str) -> tuple[dict, list[tuple[str, dict, int]]]:
    """Split into a head dict and a list of (section name, dict, line number)."""
    head: dict[str, str] = {}
    sections: list[tuple[str, dict, int]] = []
    current = head
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = {}
            sections.append((line[1:-1].strip(), current, lineno))
            continue
        key, sep, val = line.partition(":")
        if not sep:
            raise FormatError(f"{source}:{lineno}: expected 'key: value', got {raw!r}")
        current[key.strip()] = val.strip()
    return head, sections


# ------------------------------------------------------------------ sinogram


def encode_sinogram(sino) -> str:
    grid = sino.grid
    lines = [
        SINOGRAM_MAGIC,
        f"version: {FORMAT_VERSION}",
        f"seed: {_fmt(sino.seed)}",
        f"counts_per_angle: {sino.counts_per_angle}",
        f"grid: {grid.n_points} {grid.x_max!r}",
        f"n_records: {len(sino)}",
    ]
    for i, rec in enumerate(sino.records):
        lines += [
            "",
            f"[record {i}]",
            f"theta: {rec.theta!r}",
            f"clipped_mass: {rec.clipped_mass!r}",
            "density: " + " ".join(repr(float(v)) for v in rec.density),
        ]
    return "\n".join(lines) + "\n"


def decode_sinogram(text: str, source: str = "<text>"):
    from .tomography import Sinogram

    lines = text.splitlines()
    if not lines or lines[0].strip() != SINOGRAM_MAGIC:
        raise FormatError(f"{source}: not a sinogram file (bad magic)")
    head, sections = _parse_kv_sections("\n".join(lines[1:]), source)
    try:
        if int(head["version"]) != FORMAT_VERSION:
            raise FormatError(f"{source}: unsupported version {head['version']}")
        n_txt, xm_txt = head["grid"].split()
        grid = GridSpec(int(n_txt), float(xm_txt))
        n_records = int(head["n_records"])
        counts = int(head["counts_per_angle"])
        seed = None if head["seed"] == "none" else int(head["seed"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{source}: missing or invalid header field ({exc})") from None
    records = []
    for idx in range(n_records):
        if idx >= len(sections):
            raise FormatError(f"{source}: record {idx} missing (file truncated after {len(sections)} records)")
        name, body, lineno = sections[idx]
        if name != f"record {idx}":
            raise FormatError(f"{source}:{lineno}: expected [record {idx}], found [{name}]")
        try:
            theta = float(body["theta"])
            clipped = float(body["clipped_mass"])
            dens = _floats(body["density"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"{source}: record {idx} is incomplete or malformed ({exc})") from None
        if dens.shape != (grid.n_points,):
            raise FormatError(
                f"{source}: record {idx} has {dens.size} density values, expected {grid.n_points}"
            )
        records.append(MarginalDistribution(grid, dens, theta, clipped))
    if len(sections) > n_records:
        raise FormatError(f"{source}: {len(sections)} records present but header says {n_records}")
    return Sinogram(tuple(records), counts, seed)


def write_sinogram(path, sino) -> None:
    atomic_write_text(path, encode_sinogram(sino))


def read_sinogram(path):
    path = Path(path)
    return decode_sinogram(path.read_text(encoding="utf-8"), str(path))


# -------------------------------------------------------------------- report


REPORT_SCHEMA = 1


def encode_report(sections: dict[str, dict]) -> str:
    """Sectioned key-value report; section and key order are preserved."""
    lines = [REPORT_MAGIC, f"schema: {REPORT_SCHEMA}"]
    for name, body in sections.items():
        lines += ["", f"[{name}]"]
        lines += [f"{k}: {_fmt(v)}" for k, v in body.items()]
    return "\n".join(lines) + "\n"


def decode_report(text: str, source: str = "<text>") -> dict[str, dict[str, str]]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != REPORT_MAGIC:
        raise FormatError(f"{source}: not a report file (bad magic)")
    head, sections = _parse_kv_sections("\n".join(lines[1:]), source)
    if head.get("schema") != str(REPORT_SCHEMA):
        raise FormatError(f"{source}: unsupported report schema {head.get('schema')!r}")
    return {name: body for name, body, _ in sections}


def write_report(path, sections: dict[str, dict]) -> None:
    atomic_write_text(path, encode_report(sections))


def read_report(path) -> dict[str, dict[str, str]]:
    path = Path(path)
    return decode_report(path.read_text(encoding="utf-8"), str(path))


# ---------------------------------------------------------------- plot columns


def write_columns(path, header: str, columns) -> None:
    """Whitespace-separated numeric columns, one comment header line."""
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    rows = "\n".join(" ".join(repr(float(v)) for v in row) for row in zip(*cols))
    atomic_write_text(path, f"# {header}\n{rows}\n")


def write_marginal_columns(path, m: MarginalDistribution, seed: int | None = None) -> None:
    write_columns(path, f"x density  theta={m.theta!r} seed={_fmt(seed)}", [m.grid.points(), m.density])


def write_wigner_columns(path, w: WignerGrid, seed: int | None = None) -> None:
    X, P = np.meshgrid(w.x_grid.points(), w.p_grid.points(), indexing="ij")
    write_columns(path, f"x p W  seed={_fmt(seed)}", [X, P, w.values])
