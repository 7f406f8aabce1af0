"""``econfit`` command line interface.

Exit codes: 0 success, 1 validation/usage error, 2 data error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .econometrics import GrowthPanel, build_growth_panel, ols_robust, rankings_from_panel
from .exceptions import ConfigError, DataError, EconfitError
from .fitness import FitnessConfig, FitnessResult, SweepTrace, compute_fitness, rank_countries, triangular_order
from .ingest import ExportMatrix, build_export_matrix, parse_macro_panel, parse_trade_flows, write_trade_flows
from .kernelmap import build_colormap
from .pipeline import (
    PipelineConfig,
    PipelineError,
    run_pipeline,
    validate_config,
    write_complexity_csv,
    write_diagnostics,
    write_fitness_csv,
)
from .rca import BinaryMatrix, RcaMatrix, binarize, compute_rca, prune
from .synthetic import generate_nested, generate_study, generate_tripartite

log = logging.getLogger("econfit")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _out(args, path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    if args.out_dir is not None and not p.is_absolute():
        p = Path(args.out_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def cmd_ingest(args) -> int:
    flows, rejected = parse_trade_flows(Path(args.trade))
    for r in rejected:
        log.warning("line %d rejected: %s", r.line, r.reason)
    x = build_export_matrix(flows, args.year)
    x.to_csv(_out(args, args.out))
    print(f"{len(flows)} flows accepted, {len(rejected)} rejected; matrix {x.shape[0]}x{x.shape[1]}")
    return 0


def cmd_rca(args) -> int:
    x = ExportMatrix.from_csv(Path(args.inp))
    compute_rca(x).to_csv(_out(args, args.out))
    return 0


def cmd_binarize(args) -> int:
    r = RcaMatrix.from_csv(Path(args.inp))
    m = binarize(r, args.threshold)
    if args.prune:
        m, report = prune(m)
        if not report.empty:
            print(f"pruned {len(report.removed_countries)} countries, {len(report.removed_products)} products")
    m.to_csv(_out(args, args.out))
    return 0


def cmd_fitness(args) -> int:
    m = BinaryMatrix.from_csv(Path(args.inp))
    cfg = FitnessConfig(
        max_iterations=args.max_iter,
        value_tolerance=args.tol,
        rank_stability_window=args.rank_window,
        initial_q=args.initial_q,
        update=args.update,
    )
    res = compute_fitness(m, cfg)
    ranking = rank_countries(res)
    write_fitness_csv(_out(args, args.out), ranking)
    complexity_out = args.complexity_out or str(Path(args.out).with_name("complexity.csv"))
    write_complexity_csv(_out(args, complexity_out), res)
    if args.diagnostics:
        write_diagnostics(_out(args, args.diagnostics), res)
    if args.ordered_out:
        triangular_order(m, res).to_csv(_out(args, args.ordered_out))
    print(f"{res.iterations_run} sweeps, stopped by {res.converged_by}" + (" (rank ties)" if ranking.tied else ""))
    return 0


def _seed(args) -> int:
    return args.seed if args.seed is not None else 0


def cmd_synth(args) -> int:
    if args.kind == "nested":
        generate_nested(args.nc, args.np, _seed(args)).to_csv(_out(args, args.out))
    elif args.kind == "tripartite":
        model, m = generate_tripartite(args.nc, args.nk, args.np, args.cdensity, args.pdensity, _seed(args))
        m.to_csv(_out(args, args.out))
        if args.model:
            model.to_json(_out(args, args.model))
    else:
        study = generate_study(args.nc, args.nk, args.np, args.years, horizon=args.horizon,
                               country_density=args.cdensity, product_density=args.pdensity, seed=_seed(args))
        write_trade_flows(_out(args, args.trade_out), study.flows)
        study.panel.to_csv(_out(args, args.panel_out))
    return 0


def cmd_panel(args) -> int:
    macro, rejected = parse_macro_panel(Path(args.macro))
    for r in rejected:
        log.warning("panel line %d rejected: %s", r.line, r.reason)
    if args.fitness:
        rankings = {}
        for item in args.fitness:
            year, _, path = item.partition("=")
            if not path:
                raise ConfigError(f"--fitness expects YEAR=PATH, got {item!r}")
            rows = list(csv.DictReader(Path(path).read_text(encoding="utf-8").splitlines()))
            res = FitnessResult(
                countries=tuple(r["country"] for r in rows), products=(),
                fitness=np.array([float(r["fitness"]) for r in rows]), complexity=np.empty(0),
                iterations_run=0, converged_by="value", trace=SweepTrace(),
            )
            rankings[int(year)] = rank_countries(res)
    else:
        rankings = rankings_from_panel(macro)
    growth = build_growth_panel(macro, rankings, args.horizon, args.lag, args.stride, args.rank)
    growth.to_csv(_out(args, args.out))
    print(f"{len(growth)} observations; attrition {dict(growth.attrition)}")
    return 0


def cmd_colormap(args) -> int:
    growth = GrowthPanel.from_csv(Path(args.panel))
    try:
        surface = build_colormap(
            growth, args.x, args.y, args.target, args.nx, args.ny,
            x_range=tuple(args.x_range) if args.x_range else None,
            y_range=tuple(args.y_range) if args.y_range else None,
            bandwidth=np.array(args.bandwidth) if args.bandwidth else "scott",
        )
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from exc
    surface.to_csv(_out(args, args.out))
    return 0


def cmd_regress(args) -> int:
    growth = GrowthPanel.from_csv(Path(args.panel))
    result = ols_robust(growth, args.with_fitness, args.fixed_effects, args.robust.upper())
    if args.out:
        result.to_json(_out(args, args.out))
    if args.text or not args.out:
        print(result.to_text())
    return 0


def cmd_run(args) -> int:
    cfg = PipelineConfig.load(args.config)
    overrides = {}
    if args.out_dir is not None:
        overrides["output_dir"] = str(Path(args.out_dir).resolve())
    if args.threads is not None:
        overrides["threads"] = args.threads
    if overrides:
        cfg = PipelineConfig.from_dict({**cfg.raw, **overrides}, base=Path(args.config).parent)
    try:
        manifest = run_pipeline(cfg)
    except PipelineError as exc:
        print(json.dumps(exc.manifest, indent=2, default=str), file=sys.stderr)
        raise
    print(f"wrote {len(manifest['artifacts'])} artifacts to {cfg.output_dir}")
    return 0


def cmd_validate(args) -> int:
    problems = validate_config(args.config)
    for p in problems:
        print(p)
    return 1 if problems else 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="econfit", description="Fitness-Complexity and growth-regression tools for export data.")
    p.add_argument("--seed", type=int, default=None, help="seed for synthetic generators")
    p.add_argument("--threads", type=int, default=None, help="worker threads for per-year fitness runs")
    p.add_argument("--out-dir", default=None, help="directory for relative output paths")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="aggregate a trade CSV into one year's export matrix")
    s.add_argument("--trade", required=True)
    s.add_argument("--year", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("rca", help="Balassa RCA of an export matrix")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_rca)

    s = sub.add_parser("binarize", help="threshold an RCA matrix to 0/1")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--threshold", type=float, default=1.0)
    s.add_argument("--prune", action=argparse.BooleanOptionalAction, default=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_binarize)

    s = sub.add_parser("fitness", help="Fitness-Complexity fixed point of a binary matrix")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--max-iter", type=int, default=1000)
    s.add_argument("--rank-window", type=int, default=10, help="0 disables the rank-stability stop")
    s.add_argument("--initial-q", choices=("uniform", "unit_sum"), default="uniform")
    s.add_argument("--update", choices=("sequential", "synchronous"), default="sequential")
    s.add_argument("--out", required=True)
    s.add_argument("--complexity-out", default=None)
    s.add_argument("--diagnostics", default=None)
    s.add_argument("--ordered-out", default=None, help="write the matrix sorted by fitness and complexity")
    s.set_defaults(func=cmd_fitness)

    s = sub.add_parser("synth", help="synthetic matrices and datasets")
    kinds = s.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    k = kinds.add_parser("nested")
    k.add_argument("--nc", type=int, required=True)
    k.add_argument("--np", type=int, required=True)
    k.add_argument("--out", required=True)
    k = kinds.add_parser("tripartite")
    k.add_argument("--nc", type=int, required=True)
    k.add_argument("--nk", type=int, required=True)
    k.add_argument("--np", type=int, required=True)
    k.add_argument("--cdensity", type=float, default=0.5)
    k.add_argument("--pdensity", type=float, default=0.2)
    k.add_argument("--out", required=True)
    k.add_argument("--model", default=None)
    k = kinds.add_parser("study", help="trade.csv and panel.csv driven by a capability model")
    k.add_argument("--nc", type=int, default=20)
    k.add_argument("--nk", type=int, default=10)
    k.add_argument("--np", type=int, default=50)
    k.add_argument("--years", type=int, nargs="+", default=[1990, 1995, 2000])
    k.add_argument("--horizon", type=int, default=10)
    k.add_argument("--cdensity", type=float, default=0.5)
    k.add_argument("--pdensity", type=float, default=0.2)
    k.add_argument("--trade-out", default="trade.csv")
    k.add_argument("--panel-out", default="panel.csv")
    for k in kinds.choices.values():
        k.add_argument("--seed", type=int, default=None, dest="seed_local")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("panel", help="build the growth panel")
    s.add_argument("--macro", required=True)
    s.add_argument("--fitness", action="append", metavar="YEAR=PATH",
                   help="fitness.csv for a year; repeatable. Defaults to the panel's fitness column")
    s.add_argument("--horizon", type=int, default=5)
    s.add_argument("--lag", type=int, default=5)
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--rank", choices=("normalized", "raw", "log_fitness"), default="normalized")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_panel)

    s = sub.add_parser("colormap", help="Nadaraya-Watson growth surface")
    s.add_argument("--panel", required=True)
    s.add_argument("--x", required=True)
    s.add_argument("--y", required=True)
    s.add_argument("--target", default="growth")
    s.add_argument("--nx", type=int, default=100)
    s.add_argument("--ny", type=int, default=100)
    s.add_argument("--x-range", type=float, nargs=2, default=None)
    s.add_argument("--y-range", type=float, nargs=2, default=None)
    s.add_argument("--bandwidth", type=float, nargs=2, default=None, help="override Scott's rule")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_colormap)

    s = sub.add_parser("regress", help="growth regression with robust standard errors")
    s.add_argument("--panel", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--with-fitness", dest="with_fitness", action="store_true", default=True)
    g.add_argument("--without-fitness", dest="with_fitness", action="store_false")
    s.add_argument("--robust", choices=("hc1", "hc0"), default="hc1")
    s.add_argument("--fixed-effects", action="store_true")
    s.add_argument("--out", default=None)
    s.add_argument("--text", action="store_true", help="print a coefficient table")
    s.set_defaults(func=cmd_regress)

    s = sub.add_parser("run", help="run a full pipeline from a YAML config")
    s.add_argument("config")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("validate", help="check a pipeline config")
    s.add_argument("config")
    s.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed_local", None) is not None:
        args.seed = args.seed_local
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except EconfitError as exc:
        print(f"econfit: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"econfit: {exc}", file=sys.stderr)
        return DataError.exit_code
    except ValueError as exc:
        print(f"econfit: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
