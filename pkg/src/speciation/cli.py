"""Command-line entry point: ``speciation run|recipes|verify|plot``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import svg
from .core import ConfigError, DomainError
from .harness import (EXIT_CONFIG, read_csv, recipe_names, resolve_config, run_experiment,
                      verify_experiment)


def _parser():
    ap = argparse.ArgumentParser(prog="speciation", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a config file or recipe name")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--replicas", type=int)
    run.add_argument("--out")
    run.add_argument("--workers", type=int)
    run.add_argument("--no-timestamp", action="store_true")

    rec = sub.add_parser("recipes", help="list or show shipped recipes")
    rec_sub = rec.add_subparsers(dest="action", required=True)
    rec_sub.add_parser("list")
    show = rec_sub.add_parser("show")
    show.add_argument("name")

    ver = sub.add_parser("verify", help="run only the assertion suites for a config")
    ver.add_argument("config")
    ver.add_argument("--out")
    ver.add_argument("--seed", type=int)

    plot = sub.add_parser("plot", help="render an SVG from an output CSV")
    plot.add_argument("csv")
    plot.add_argument("--kind", choices=("lines", "heatmap", "scatter"), required=True)
    plot.add_argument("--out")
    plot.add_argument("--column", help="value column (default: last column)")
    plot.add_argument("--no-timestamp", action="store_true")
    return ap


def _plot(args) -> int:
    meta, cols, rows = read_csv(args.csv)
    if not rows:
        print(f"error: {args.csv} has no data rows", file=sys.stderr)
        return EXIT_CONFIG
    vcol = args.column or cols[-1]
    if vcol not in cols:
        print(f"error: column {vcol!r} not in {cols}", file=sys.stderr)
        return EXIT_CONFIG
    ts = not args.no_timestamp
    title = Path(args.csv).stem
    val = np.array([float(r[cols.index(vcol)] or "nan") for r in rows])
    if args.kind in ("lines", "heatmap"):
        tcol = next((c for c in ("t", "sample_index", "cluster") if c in cols), None)
        if tcol is None or "x" not in cols:
            print("error: lines/heatmap need a time column and an x column", file=sys.stderr)
            return EXIT_CONFIG
        sel = [r for r in rows if "replica" not in cols or r[cols.index("replica")] == "0"]
        t = np.array([float(r[cols.index(tcol)]) for r in sel])
        x = np.array([float(r[cols.index("x")]) for r in sel])
        v = np.array([float(r[cols.index(vcol)]) for r in sel])
        times, sites = np.unique(t), np.unique(x)
        Z = np.zeros((times.size, sites.size))
        Z[np.searchsorted(times, t), np.searchsorted(sites, x)] = v
        if args.kind == "heatmap":
            text = svg.heatmap(Z, times, sites, title=title, timestamp=ts)
        else:
            pick = np.unique(np.linspace(0, times.size - 1, min(6, times.size)).astype(int))
            text = svg.line_plot(sites, Z[pick], [f"{tcol}={times[i]:g}" for i in pick],
                                 title=title, xlabel="phenotype", ylabel=vcol, timestamp=ts)
    else:
        xcol = "mu" if "mu" in cols else cols[0]
        x = np.array([float(r[cols.index(xcol)]) for r in rows])
        ok = np.isfinite(val)
        means = [(u, float(val[ok & (x == u)].mean())) for u in np.unique(x[ok])]
        text = svg.scatter_plot(x, val, means, title=title, xlabel=xcol, ylabel=vcol,
                                timestamp=ts)
    out = Path(args.out or Path(args.csv).with_suffix(f".{args.kind}.svg"))
    out.write_text(text)
    print(out)
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "recipes":
            if args.action == "list":
                for name in recipe_names():
                    cfg = resolve_config(name)
                    print(f"{name:12s} {cfg.model}")
            else:
                print(json.dumps(resolve_config(args.name).to_dict(), indent=2))
            return 0
        if args.command == "plot":
            return _plot(args)
        if args.command == "verify":
            cfg = resolve_config(args.config)
            if args.seed is not None:
                d = cfg.to_dict()
                d["seed"] = args.seed
                cfg = type(cfg).from_dict(d)
            res = verify_experiment(cfg, out=args.out)
        else:
            res = run_experiment(args.config, out=args.out, timestamp=not args.no_timestamp,
                                 workers=args.workers, seed=args.seed, replicas=args.replicas)
            for f in res.files:
                print(f)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for k, v in res.summary.items():
        print(f"{k}: {v}")
    for f in res.failures:
        print(f"failure: {f}", file=sys.stderr)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
