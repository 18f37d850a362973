"""Command-line front end: ``tactmap {generate,run,bench,render}``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

import numpy as np

from tactmap import fileio, plotting
from tactmap.domain import Raster, Workspace, ground_truth, save_layout
from tactmap.experiment import (
    ExperimentConfig,
    _coerce,
    compare_policies,
    load_config,
    metrics_csv,
    read_metrics_csv,
    run_experiment,
)

log = logging.getLogger("tactmap")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One ``--field-name`` flag per ExperimentConfig field; unset flags keep the config value."""
    group = parser.add_argument_group("experiment parameters")
    group.add_argument("--config", help="flat key = value file applied before the flags below")
    for f in dataclasses.fields(ExperimentConfig):
        default = f.default
        flag = "--" + f.name.replace("_", "-")
        if isinstance(default, tuple):
            group.add_argument(flag, nargs="+", default=None, metavar=f.name.upper(),
                               help=f"default: {' '.join(map(str, default))}")
        else:
            group.add_argument(flag, default=None, metavar=type(default).__name__.upper(),
                               help=f"default: {default}")


def _config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(args, f.name, None)
        if value is None:
            continue
        like = getattr(cfg, f.name)
        if isinstance(like, tuple):
            value = tuple(value)
        else:
            value = _coerce(str(value), like)
        updates[f.name] = value
    return dataclasses.replace(cfg, **updates)


def _write_run_artifacts(results, outdir: Path, figures: bool) -> None:
    for res in results:
        stem = f"{res.policy}_seed{res.seed}"
        fileio.write_raster_csv(res.field.prob, outdir / f"{stem}_prob.csv")
        fileio.write_heatmap_pgm(res.field.prob, outdir / f"{stem}_prob.pgm", 0.0, 1.0)
        fileio.write_raster_csv(res.height.cells, outdir / f"{stem}_height.csv")
        fileio.write_depth_pgm(res.height.cells, outdir / f"{stem}_height.pgm")
        np.savetxt(outdir / f"{stem}_locations.csv", res.locations, delimiter=",", header="x,y", comments="",
                   fmt="%.6g")
        if figures:
            plotting.render_run(res, outdir, stem)


def _write_summary(results, outdir: Path, figures: bool):
    summary = compare_policies(results)
    (outdir / "summary.csv").write_text(summary.to_csv())
    if figures:
        plotting.plot_metric(summary, "ce", outdir / "ce.png", title="presence map cross-entropy")
        plotting.plot_metric(summary, "mse", outdir / "mse.png", title="height reconstruction error")
        plotting.plot_uncertainty(summary, outdir / "uncertainty.png", title="predictive variance")
    return summary


def _execute(cfg: ExperimentConfig, outdir: Path, figures: bool) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    results = run_experiment(cfg)
    (outdir / "metrics.csv").write_text(metrics_csv(results))
    _write_run_artifacts(results, outdir, figures)
    summary = _write_summary(results, outdir, figures)
    elapsed = time.perf_counter() - t0
    k = min(cfg.n_explore, int(summary.sample_index[-1]))
    for policy in sorted(summary.n_runs):
        print(f"{policy:>9}: CE@{k} {summary.at(policy, 'ce', k):.4f}  "
              f"MSE@end {summary.mean[(policy, 'mse')][-1]:.4f}  runs {summary.n_runs[policy]}")
    print(f"wrote {outdir} in {elapsed:.1f} s")
    return 0


def cmd_generate(args) -> int:
    cfg = _config_from_args(args)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for seed in cfg.seeds:
        layout = cfg.layout(seed)
        path = outdir / f"layout_seed{seed}.txt"
        save_layout(layout, path)
        truth = ground_truth(layout, cfg.workspace, cfg.eval_pitch_mm)
        fileio.write_depth_pgm(truth.height, outdir / f"layout_seed{seed}_truth.pgm")
        if args.figures:
            plotting.render_raster(truth.height, truth.raster, outdir / f"layout_seed{seed}.png",
                                   f"layout seed {seed}: {len(layout)} beads", label="mm")
        print(f"{path}: {len(layout)} beads")
    return 0


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    return _execute(cfg, Path(args.outdir), args.figures)


def cmd_bench(args) -> int:
    cfg = _config_from_args(args)
    if args.layouts is not None:
        cfg = dataclasses.replace(cfg, seeds=tuple(range(1, args.layouts + 1)))
    return _execute(cfg, Path(args.outdir), args.figures)


def cmd_render(args) -> int:
    if args.metrics:
        rows = read_metrics_csv(args.metrics)
        outdir = Path(args.outdir or Path(args.metrics).parent)
        outdir.mkdir(parents=True, exist_ok=True)
        summary = compare_policies(rows)
        (outdir / "summary.csv").write_text(summary.to_csv())
        for metric in ("ce", "mse"):
            plotting.plot_metric(summary, metric, outdir / f"{metric}.png")
        plotting.plot_uncertainty(summary, outdir / "uncertainty.png")
        print(f"wrote figures for {sum(summary.n_runs.values())} runs to {outdir}")
        return 0
    values = fileio.read_raster_csv(args.raster)
    out = Path(args.output or Path(args.raster).with_suffix(".pgm"))
    fileio.write_heatmap_pgm(values, out, args.lo, args.hi)
    if args.png:
        ny, nx = values.shape
        raster = Raster(Workspace(nx * args.pitch, ny * args.pitch), args.pitch)
        plotting.render_raster(values, raster, args.png, Path(args.raster).stem, vmin=args.lo, vmax=args.hi)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tactmap", description="Active tactile mapping of embedded objects.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write bead layout files and their ground-truth height maps")
    p.add_argument("-o", "--outdir", default="layouts")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="one experiment (one seed unless --seeds is given)")
    p.add_argument("-o", "--outdir", default="run")
    p.add_argument("--seed", type=int, default=None, help="shorthand for --seeds SEED")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="proposed vs random over several generated layouts")
    p.add_argument("-o", "--outdir", default="bench")
    p.add_argument("--layouts", type=int, default=10, help="use seeds 1..N (ignored when --seeds is given)")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", help="PGM/PNG of a raster CSV, or curves from a metrics CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--raster", help="raster CSV written by run/bench")
    src.add_argument("--metrics", help="metrics.csv written by run/bench")
    p.add_argument("-o", "--output", help="PGM path for --raster (default: alongside the input)")
    p.add_argument("--outdir", help="figure directory for --metrics (default: alongside the input)")
    p.add_argument("--png", help="also draw the raster to this PNG")
    p.add_argument("--lo", type=float, default=None, help="value mapped to the light end")
    p.add_argument("--hi", type=float, default=None, help="value mapped to the dark end")
    p.add_argument("--pitch", type=float, default=0.5, help="raster pitch in mm for the PNG axes")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and args.seeds is not None:
        args.layouts = None
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"tactmap: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
