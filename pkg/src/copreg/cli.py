"""Command-line interface.

Subcommands: eval (pointwise values on a grid), bounds (inequality report),
metric (Phi / D_{A,p} / quantile identity), convergence (simulation study),
density (figure-reproduction files).  Exit codes: 0 success, 1 usage error,
2 config error, 3 I/O error.

convergence and density accept --config pointing at a JSON file mirroring
their flags; explicit flags win over the COPREG_SEED environment variable,
which wins over the config file.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import families, metrics, simulate
from . import regression as reg
from .errors import ConfigError, DomainError, EvaluationError, \
    FamilyParseError, PreconditionError, UsageError
from .numerics import QuadratureSpec, midpoints

__all__ = ["cli_main", "main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise UsageError(message)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _floats(text: str) -> list:
    return [float(t) for t in text.split(",") if t]


def _build_parser() -> _Parser:
    parser = _Parser(prog="copreg",
                     description="Copula mean/quantile regression toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", parents=[], help="evaluate regression/"
                            "quantile/kernel values on a covariate grid")
    p_eval.add_argument("--family", required=True, help="family spec, e.g. "
                        "'mo alpha=0.35 beta=0.65'")
    p_eval.add_argument("--what", required=True,
                        choices=["regression", "quantile", "kernel"])
    p_eval.add_argument("--grid", type=int, default=101,
                        help="number of covariate midpoints per axis")
    p_eval.add_argument("--tau", type=float, help="level for --what quantile")
    p_eval.add_argument("--y", type=float, help="response cut for --what kernel")
    p_eval.add_argument("--cells", type=int, default=4096)
    p_eval.add_argument("-o", "--out", help="output CSV (default stdout)")

    p_bounds = sub.add_parser("bounds", help="verify sharp bounds, JSON report")
    p_bounds.add_argument("--family", required=True)
    p_bounds.add_argument("--family2", help="second model for pair checks")
    p_bounds.add_argument("--check", required=True,
                          help="comma list of tags: " +
                          ",".join(metrics.SINGLE_TAGS + metrics.PAIR_TAGS))
    p_bounds.add_argument("--p", type=_floats, default=[1.0, 2.0])
    p_bounds.add_argument("--tau", type=_floats,
                          default=[0.1, 0.3, 0.5, 0.7, 0.9])
    p_bounds.add_argument("--a", type=_floats, help="thresholds for mbar")
    p_bounds.add_argument("--y", type=_floats, help="cuts for phi_bound")
    p_bounds.add_argument("--cells", type=int, default=4096)
    p_bounds.add_argument("--tol", type=float, default=1e-6)
    p_bounds.add_argument("-o", "--out", help="output JSON (default stdout)")

    p_metric = sub.add_parser("metric", help="Phi curve, D_{A,p}, or the "
                              "quantile-metric identity")
    p_metric.add_argument("--family1", required=True)
    p_metric.add_argument("--family2", required=True)
    p_metric.add_argument("--what", required=True,
                          choices=["phi", "dmetric", "identity"])
    p_metric.add_argument("--p", type=float, default=1.0)
    p_metric.add_argument("--ygrid", type=int, default=101,
                          help="points of the phi y-grid")
    p_metric.add_argument("--cells", type=int, default=4096)
    p_metric.add_argument("-o", "--out", help="output file (default stdout)")

    p_conv = sub.add_parser("convergence", help="empirical-checkerboard "
                            "convergence study (errors.csv + boxplot.csv)")
    p_conv.add_argument("--config", help="JSON file mirroring the flags")
    p_conv.add_argument("--family")
    p_conv.add_argument("--sizes", help="comma list of sample sizes")
    p_conv.add_argument("--reps", type=int)
    p_conv.add_argument("--s", type=float)
    p_conv.add_argument("--tau", help="comma list of quantile levels")
    p_conv.add_argument("--seed", type=int)
    p_conv.add_argument("--cells", type=int)
    p_conv.add_argument("--jobs", type=int)
    p_conv.add_argument("--timing", action="store_true", default=None,
                        help="write measured wall times (breaks byte "
                        "determinism of outputs)")
    p_conv.add_argument("--data", help="two-column CSV sample (reps must be 1)")
    p_conv.add_argument("--out", help="output directory")

    p_dens = sub.add_parser("density", help="empirical checkerboard density "
                            "and regression/quantile curves for one sample")
    p_dens.add_argument("--config", help="JSON file mirroring the flags")
    p_dens.add_argument("--family")
    p_dens.add_argument("--n", type=int)
    p_dens.add_argument("--s", type=float)
    p_dens.add_argument("--tau", type=float)
    p_dens.add_argument("--seed", type=int)
    p_dens.add_argument("--resolution", type=int,
                        help="explicit N, overriding floor(n^s)")
    p_dens.add_argument("--data", help="two-column CSV sample")
    p_dens.add_argument("--cells", type=int)
    p_dens.add_argument("--out", help="output directory")
    return parser


def _merged(args, config_keys, defaults):
    """flag > COPREG_SEED env (seed only) > --config JSON > default."""
    merged = {}
    file_cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(config_keys)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    env_seed = os.environ.get("COPREG_SEED")
    for key in config_keys:
        val = getattr(args, key, None)
        if val is None and key == "seed" and env_seed is not None:
            try:
                val = int(env_seed)
            except ValueError as exc:
                raise ConfigError(f"COPREG_SEED must be an integer: {env_seed!r}") from exc
        if val is None:
            val = file_cfg.get(key)
        if val is None:
            val = defaults.get(key)
        merged[key] = val
    return merged


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _cmd_eval(args) -> int:
    model = families.parse_family(args.family)
    if args.grid < 1:
        raise UsageError(f"--grid must be >= 1, got {args.grid}")
    quad = QuadratureSpec(args.cells)
    xs = midpoints(args.grid)
    if model.covariate_dim == 1:
        pts = xs
        header = ["x", "value"]
        coords = [(_fmt(x),) for x in xs]
    else:
        x1, x2 = np.meshgrid(xs, xs, indexing="ij")
        pts = (x1.ravel(), x2.ravel())
        header = ["x1", "x2", "value"]
        coords = [(_fmt(a), _fmt(b)) for a, b in zip(x1.ravel(), x2.ravel())]
    if args.what == "regression":
        vals = np.asarray(reg.regression_values(model, pts, quad))
    elif args.what == "quantile":
        if args.tau is None:
            raise UsageError("--what quantile needs --tau")
        vals = np.asarray(reg.quantile_values(model, pts, args.tau))
    else:
        if args.y is None:
            raise UsageError("--what kernel needs --y")
        if not 0.0 <= args.y <= 1.0:
            raise UsageError(f"--y must lie in [0,1], got {args.y}")
        vals = np.asarray(model.kernel_cdf(pts, args.y))
    fh = _open_out(args.out)
    try:
        writer = csv.writer(fh)
        writer.writerow(header)
        for coord, v in zip(coords, vals.ravel()):
            writer.writerow([*coord, _fmt(v)])
    finally:
        if args.out:
            fh.close()
    return 0


def _cmd_bounds(args) -> int:
    model = families.parse_family(args.family)
    second = families.parse_family(args.family2) if args.family2 else None
    tags = [t.strip() for t in args.check.split(",") if t.strip()]
    if not tags:
        raise UsageError("--check needs at least one tag")
    report = metrics.verify_bounds(
        model, tags, second=second, p_list=args.p, tau_list=args.tau,
        a_grid=args.a, y_grid=args.y, quad=QuadratureSpec(args.cells),
        tol=args.tol)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_metric(args) -> int:
    c1 = families.parse_family(args.family1)
    c2 = families.parse_family(args.family2)
    quad = QuadratureSpec(args.cells)
    if args.what == "phi":
        ys = np.linspace(0.0, 1.0, args.ygrid)
        fh = _open_out(args.out)
        try:
            writer = csv.writer(fh)
            writer.writerow(["y", "phi"])
            for y in ys:
                writer.writerow([_fmt(y), _fmt(metrics.phi(c1, c2, float(y),
                                                           args.p, quad))])
        finally:
            if args.out:
                fh.close()
        return 0
    if args.what == "dmetric":
        payload = {"p": args.p, "value": metrics.d_metric(c1, c2, args.p, quad)}
    else:
        lhs, rhs = metrics.quantile_metric_identity(c1, c2, quad)
        payload = {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs), "bound": 0.5}
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_convergence(args) -> int:
    keys = ["family", "sizes", "reps", "s", "tau", "seed", "cells", "jobs",
            "timing", "out", "data"]
    defaults = {"s": 0.4, "tau": "0.2", "seed": 42, "cells": 4096, "jobs": 1,
                "timing": False}
    cfg = _merged(args, keys, defaults)
    for required in ("family", "sizes", "reps", "out"):
        if cfg[required] is None:
            raise UsageError(f"convergence needs --{required} (flag or config)")
    sizes = [int(v) for v in str(cfg["sizes"]).split(",") if v]
    taus = [float(v) for v in str(cfg["tau"]).split(",") if v]
    config = simulate.ExperimentConfig(
        family=cfg["family"], sizes=tuple(sizes), reps=int(cfg["reps"]),
        s=float(cfg["s"]), tau_list=tuple(taus), seed=int(cfg["seed"]),
        cells=int(cfg["cells"]), jobs=int(cfg["jobs"]),
        timing=bool(cfg["timing"]))
    data = simulate.load_sample_csv(cfg["data"]) if cfg["data"] else None
    table = simulate.run_convergence(config, data=data)
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    simulate.write_errors_csv(table, out_dir / "errors.csv",
                              timing=config.timing)
    simulate.write_boxplot_csv(simulate.summarize_boxplot(table),
                               out_dir / "boxplot.csv")
    print(f"wrote {out_dir / 'errors.csv'} and {out_dir / 'boxplot.csv'}")
    return 0


def _cmd_density(args) -> int:
    keys = ["family", "n", "s", "tau", "seed", "resolution", "data", "cells",
            "out"]
    defaults = {"n": 10000, "s": 0.4, "tau": 0.2, "seed": 42, "cells": 4096}
    cfg = _merged(args, keys, defaults)
    for required in ("family", "out"):
        if cfg[required] is None:
            raise UsageError(f"density needs --{required} (flag or config)")
    data = simulate.load_sample_csv(cfg["data"]) if cfg["data"] else None
    paths = simulate.emit_density(
        cfg["family"], int(cfg["n"]), float(cfg["s"]), float(cfg["tau"]),
        int(cfg["seed"]), cfg["out"],
        resolution=None if cfg["resolution"] is None else int(cfg["resolution"]),
        data=data, cells=int(cfg["cells"]))
    print("\n".join(f"{k}: {v}" for k, v in sorted(paths.items())))
    return 0


_COMMANDS = {
    "eval": _cmd_eval,
    "bounds": _cmd_bounds,
    "metric": _cmd_metric,
    "convergence": _cmd_convergence,
    "density": _cmd_density,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse --help
        return int(exc.code or 0)
    except (UsageError, FamilyParseError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, PreconditionError, DomainError, EvaluationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
