"""Command-line entry points: `fadefree run` and `fadefree sweep`.

Exit codes: 0 success, 1 configuration error, 2 runtime stage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, FadefreeError
from .pipeline import run_pipeline, sweep
from .reporting import (format_ber_row, svg_line_plot, write_ber_csv,
                        write_failures_csv, SWEEP_HEADER)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fadefree",
        description="IM/DD receiver chain simulation: equalize, whiten, detect")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "single operating point"),
                            ("sweep", "Cartesian sweep over M/L/SNR axes")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None,
                       help="experiment config file (key = value, [section]s)")
        p.add_argument("--out", type=Path, default=Path("out"),
                       help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--detector", action="append", default=None,
                       metavar="KIND", help="mlse | logmap | fixed:<M>")
        p.add_argument("--min-bits", type=float, default=None)
        p.add_argument("--set", action="append", default=[], dest="overrides",
                       metavar="KEY=VALUE", help="override a config key")
        p.add_argument("--paper-scale", action="store_true",
                       help="start from the experimental operating point")
        p.add_argument("--workers", type=int, default=None,
                       help="sweep worker processes (FADEFREE_THREADS caps)")
    return parser


def _configure(args):
    overrides = list(args.overrides)
    if args.paper_scale:
        overrides.insert(0, "run.paper_scale=true")
    cfg, axes = load_config(args.config, overrides)
    if args.seed is not None:
        cfg = cfg.with_(seed=args.seed)
    if args.detector:
        cfg = cfg.with_(detectors=tuple(args.detector))
    if args.min_bits is not None:
        cfg = cfg.with_(min_bits=int(args.min_bits))
    cfg.detector_specs()  # validate --detector values early
    return cfg, axes


def _cmd_run(args) -> int:
    cfg, _ = _configure(args)
    report = run_pipeline(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    write_ber_csv(report.points, args.out / "report.csv")
    print(SWEEP_HEADER)
    for point in report.points:
        print(format_ber_row(point))
    return 0


def _cmd_sweep(args) -> int:
    cfg, axes = _configure(args)
    rows, failures = sweep(cfg, axes, workers=args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    points = [p for _, p in rows]
    write_ber_csv(points, args.out / "sweep.csv")
    if failures:
        write_failures_csv(failures, args.out / "failures.csv")
        print(f"{len(failures)} cell(s) failed; see failures.csv",
              file=sys.stderr)
    _sweep_plots(rows, axes, args.out)
    print(f"wrote {len(points)} rows to {args.out / 'sweep.csv'}")
    return 0


def _sweep_plots(rows, axes, out_dir: Path) -> None:
    for axis, coord_idx in (("m", 2), ("l", 1), ("snr_db", 3)):
        if not getattr(axes, axis):
            continue
        series: dict = {}
        for coord, p in rows:
            x = coord[coord_idx]
            if x is None:
                continue
            series.setdefault(p.detector, []).append((float(x), p.ber))
        series = {k: sorted(v) for k, v in series.items() if v}
        if series:
            svg_line_plot(series, out_dir / f"ber_vs_{axis}.svg",
                          xlabel=axis, ylabel="BER", logy=True)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map bad invocations to 1
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FadefreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
