"""Command line entry point: ``phasetomo {simulate,reconstruct,compare,demo}``.

Exit codes: 0 success, 1 invalid input or configuration, 2 a quality
threshold was breached, 3 I/O or file-format failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from importlib import resources
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, load_config, parse_config
from .errors import FormatError, PhaseTomoError, ValidationError
from .experiment import read_thresholds, run_compare, run_reconstruct, run_simulate

EXIT_OK, EXIT_INVALID, EXIT_THRESHOLD, EXIT_IO = 0, 1, 2, 3
DEMOS = ("gaussian", "double_slit", "decohered_double_slit")

log = logging.getLogger("phasetomo")


def demo_config_text(name: str) -> str:
    if name not in DEMOS:
        raise ValidationError(f"unknown demo {name!r}; choose from {', '.join(DEMOS)}")
    return resources.files("phasetomo").joinpath("demos", f"{name}.ini").read_text(encoding="utf-8")


def _add_run_flags(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    if config_required:
        p.add_argument("--config", required=True, type=Path, help="experiment INI file")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--out", type=Path, help="override [run] out directory")
    p.add_argument("--angles", type=int, help="override the number of detector positions")
    p.add_argument("--counts", type=int, help="override counts per angle N")
    p.add_argument("--noiseless", action="store_true", default=None,
                   help="use exact marginals (no counting noise, ideal detector)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phasetomo", description="Phase-space tomography simulator and reconstructor.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write truth grids and the sinogram")
    _add_run_flags(p)
    p = sub.add_parser("reconstruct", help="reconstruct W and rho from <out>/sinogram.txt")
    _add_run_flags(p)
    p.add_argument("--sinogram", type=Path, help="sinogram file (default <out>/sinogram.txt)")
    p.add_argument("--threshold-file", type=Path)
    p = sub.add_parser("compare", help="metrics of a reconstruction against a truth directory")
    p.add_argument("truth", type=Path)
    p.add_argument("reconstruction", type=Path)
    p.add_argument("--threshold-file", type=Path)
    p = sub.add_parser("demo", help="simulate and reconstruct a bundled scenario")
    p.add_argument("name", choices=DEMOS)
    _add_run_flags(p, config_required=False)
    p.add_argument("--threshold-file", type=Path)
    return parser


def _resolve(args) -> ExperimentConfig:
    if getattr(args, "config", None) is not None:
        cfg = load_config(args.config)
    else:
        cfg = parse_config(demo_config_text(args.name), f"<demo {args.name}>")
        if args.out is None:
            args.out = Path(f"demo_{args.name}")
    return cfg.with_overrides(seed=args.seed, out=args.out, n_angles=args.angles, counts=args.counts,
                              noiseless=args.noiseless)


def _finish(report, thresholds_path) -> int:
    print(report.summary())
    if thresholds_path is None:
        return EXIT_OK
    from .experiment import threshold_breaches

    breaches = threshold_breaches(report.metrics, read_thresholds(thresholds_path))
    for b in breaches:
        print(f"threshold breached: {b}", file=sys.stderr)
    return EXIT_THRESHOLD if breaches else EXIT_OK


def _dispatch(args) -> int:
    if args.command == "compare":
        thresholds = read_thresholds(args.threshold_file) if args.threshold_file else None
        report, breaches = run_compare(args.truth, args.reconstruction, thresholds)
        print(report.summary())
        for b in breaches:
            print(f"threshold breached: {b}", file=sys.stderr)
        return EXIT_THRESHOLD if breaches else EXIT_OK
    cfg = _resolve(args)
    if args.command == "simulate":
        sim = run_simulate(cfg)
        print(f"wrote {len(sim.sinogram)} records to {cfg.out}")
        return EXIT_OK
    if args.command == "reconstruct":
        return _finish(run_reconstruct(cfg, args.sinogram), args.threshold_file)
    sim = run_simulate(cfg)
    return _finish(run_reconstruct(cfg, prior_timings=sim.timings), args.threshold_file)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    warnings.simplefilter("default")
    try:
        return _dispatch(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PhaseTomoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
