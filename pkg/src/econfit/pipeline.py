"""Configuration-driven end-to-end runs.

A run goes ingest -> RCA -> fitness (per year) -> growth panel -> colour maps
-> regressions. Every artifact is written as CSV/JSON and listed with its
SHA-256 in ``manifest.json``.
"""
from __future__ import annotations

import difflib
import json
import platform
import time
from contextlib import contextmanager
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from ._io import format_float, sha256_file, write_csv
from .econometrics import DRIVERS, FITNESS_REGRESSOR, LEVEL_COLUMNS, build_growth_panel, ols_robust
from .exceptions import ConfigError, EconfitError
from .fitness import FitnessConfig, compute_fitness, rank_countries, rank_products, triangular_order
from .ingest import build_export_matrix, parse_macro_panel, parse_trade_flows
from .kernelmap import build_colormap
from .rca import binarize, compute_rca, prune

TOP_LEVEL_KEYS = ("inputs", "years", "rca", "fitness", "panel", "colormaps", "regressions", "output_dir", "seed",
                  "threads")
FITNESS_KEYS = ("max_iterations", "value_tolerance", "rank_stability_window", "initial_q", "update")
PANEL_KEYS = ("horizon", "lag", "stride", "rank")
RANK_KINDS = ("normalized", "raw", "log_fitness")


def panel_variables() -> list[str]:
    """Every selector a colour map may name."""
    base = ["growth", *(d for d, _ in DRIVERS), FITNESS_REGRESSOR[0], "log_fitness", *LEVEL_COLUMNS]
    derived = [f"log_{n}" for n in LEVEL_COLUMNS if f"log_{n}" not in base]
    return [*base, *derived]


@dataclass(frozen=True)
class Violation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass(frozen=True)
class ColormapSpec:
    x: str
    y: str
    target: str = "growth"
    nx: int = 100
    ny: int = 100
    bandwidth: Any = "scott"


@dataclass(frozen=True)
class RegressionSpec:
    name: str
    with_fitness: bool = True
    fixed_effects: bool = False
    robust: str = "hc1"


@dataclass(frozen=True)
class PipelineConfig:
    trade_path: Path
    panel_path: Path
    years: tuple[int, ...]
    output_dir: Path
    rca_threshold: float = 1.0
    prune: bool = True
    fitness: FitnessConfig = field(default_factory=FitnessConfig)
    horizon: int = 5
    lag: int = 5
    stride: int = 1
    rank_kind: str = "normalized"
    colormaps: tuple[ColormapSpec, ...] = ()
    regressions: tuple[RegressionSpec, ...] = ()
    seed: int = 0
    threads: int = 1
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        raw = _read_yaml(path)
        problems = check_config(raw)
        if problems:
            raise ConfigError("invalid configuration:\n" + "\n".join(f"  {p}" for p in problems))
        return cls.from_dict(raw, base=path.parent)

    @classmethod
    def from_dict(cls, raw: dict, base: Path = Path(".")) -> "PipelineConfig":
        def resolve(p):
            p = Path(p)
            return p if p.is_absolute() else base / p

        fit = raw.get("fitness") or {}
        pan = raw.get("panel") or {}
        rca = raw.get("rca") or {}
        return cls(
            trade_path=resolve(raw["inputs"]["trade"]),
            panel_path=resolve(raw["inputs"]["panel"]),
            years=tuple(_years(raw["years"])),
            output_dir=resolve(raw["output_dir"]),
            rca_threshold=float(rca.get("threshold", 1.0)),
            prune=bool(rca.get("prune", True)),
            fitness=FitnessConfig(**{k: (float(v) if k == "value_tolerance" else v) for k, v in fit.items()}),
            horizon=int(pan.get("horizon", 5)),
            lag=int(pan.get("lag", 5)),
            stride=int(pan.get("stride", 1)),
            rank_kind=pan.get("rank", "normalized"),
            colormaps=tuple(ColormapSpec(**c) for c in raw.get("colormaps") or ()),
            regressions=tuple(RegressionSpec(**r) for r in raw.get("regressions") or ()),
            seed=int(raw.get("seed", 0)),
            threads=int(raw.get("threads", 1)),
            raw=raw,
        )


def _read_yaml(path: Path) -> dict:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return raw


def _years(spec) -> list[int]:
    if isinstance(spec, dict):
        return list(range(int(spec["start"]), int(spec["end"]) + 1, int(spec.get("step", 1))))
    return sorted(int(y) for y in spec)


def _suggest(name: str, valid) -> str:
    close = difflib.get_close_matches(str(name), list(valid), n=1, cutoff=0.0)
    return f" (did you mean {close[0]!r}?)" if close else ""


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def check_config(raw: dict) -> list[Violation]:
    """Return every constraint the raw config mapping violates."""
    out: list[Violation] = []
    for key in raw:
        if key not in TOP_LEVEL_KEYS:
            out.append(Violation(key, f"unknown key{_suggest(key, TOP_LEVEL_KEYS)}"))

    inputs = raw.get("inputs")
    paths = {}
    if not isinstance(inputs, dict):
        out.append(Violation("inputs", "required mapping with 'trade' and 'panel'"))
    else:
        for k in ("trade", "panel"):
            if not isinstance(inputs.get(k), str):
                out.append(Violation(f"inputs.{k}", "required path"))
            else:
                paths[f"inputs.{k}"] = inputs[k]
    if not isinstance(raw.get("output_dir"), str):
        out.append(Violation("output_dir", "required path"))
    else:
        paths["output_dir"] = raw["output_dir"]
    normalized = [str(Path(p)) for p in paths.values()]
    if len(set(normalized)) != len(normalized):
        out.append(Violation("inputs", "input and output paths must be distinct"))

    try:
        years = _years(raw.get("years"))
        if not years:
            out.append(Violation("years", "year range is empty"))
    except (TypeError, ValueError, KeyError):
        out.append(Violation("years", "must be a list of years or {start, end, step}"))

    rca = raw.get("rca") or {}
    if "threshold" in rca and not (_is_number(rca["threshold"]) and rca["threshold"] > 0):
        out.append(Violation("rca.threshold", "must be a positive number"))

    fit = raw.get("fitness") or {}
    for k in fit:
        if k not in FITNESS_KEYS:
            out.append(Violation(f"fitness.{k}", f"unknown key{_suggest(k, FITNESS_KEYS)}"))
    if "value_tolerance" in fit:
        tol = fit["value_tolerance"]
        try:
            tol = float(tol)
        except (TypeError, ValueError):
            tol = None
        if tol is None or not tol > 0:
            out.append(Violation("fitness.value_tolerance", "must be a positive number"))
    if "max_iterations" in fit and not (isinstance(fit["max_iterations"], int) and fit["max_iterations"] >= 1):
        out.append(Violation("fitness.max_iterations", "must be an integer >= 1"))
    win = fit.get("rank_stability_window")
    if win is not None and not (isinstance(win, int) and win >= 0):
        out.append(Violation("fitness.rank_stability_window", "must be a nonnegative integer or null"))
    if fit.get("update", "sequential") not in ("sequential", "synchronous"):
        out.append(Violation("fitness.update", "must be 'sequential' or 'synchronous'"))
    if fit.get("initial_q", "uniform") not in ("uniform", "unit_sum"):
        out.append(Violation("fitness.initial_q", "must be 'uniform' or 'unit_sum'"))

    pan = raw.get("panel") or {}
    for k in pan:
        if k not in PANEL_KEYS:
            out.append(Violation(f"panel.{k}", f"unknown key{_suggest(k, PANEL_KEYS)}"))
    for k, lo in (("horizon", 1), ("lag", 0), ("stride", 1)):
        if k in pan and not (isinstance(pan[k], int) and pan[k] >= lo):
            out.append(Violation(f"panel.{k}", f"must be an integer >= {lo}"))
    if pan.get("rank", "normalized") not in RANK_KINDS:
        out.append(Violation("panel.rank", f"must be one of {RANK_KINDS}"))

    valid_vars = panel_variables()
    for i, cm in enumerate(raw.get("colormaps") or []):
        if not isinstance(cm, dict):
            out.append(Violation(f"colormaps[{i}]", "must be a mapping"))
            continue
        for k in cm:
            if k not in ColormapSpec.__dataclass_fields__:
                out.append(Violation(f"colormaps[{i}].{k}", "unknown key"))
        for k in ("x", "y", "target"):
            if k in ("x", "y") and k not in cm:
                out.append(Violation(f"colormaps[{i}].{k}", "required variable name"))
            elif k in cm and cm[k] not in valid_vars:
                out.append(Violation(f"colormaps[{i}].{k}", f"unknown variable {cm[k]!r}{_suggest(cm[k], valid_vars)}"))
        for k in ("nx", "ny"):
            if k in cm and not (isinstance(cm[k], int) and cm[k] >= 2):
                out.append(Violation(f"colormaps[{i}].{k}", "must be an integer >= 2"))

    names = []
    for i, rs in enumerate(raw.get("regressions") or []):
        if not isinstance(rs, dict) or "name" not in rs:
            out.append(Violation(f"regressions[{i}]", "must be a mapping with a 'name'"))
            continue
        names.append(rs["name"])
        for k in rs:
            if k not in RegressionSpec.__dataclass_fields__:
                out.append(Violation(f"regressions[{i}].{k}", "unknown key"))
        if str(rs.get("robust", "hc1")).lower() not in ("hc1", "hc0"):
            out.append(Violation(f"regressions[{i}].robust", "must be 'hc1' or 'hc0'"))
    if len(set(names)) != len(names):
        out.append(Violation("regressions", "names must be unique"))

    if "seed" in raw and not isinstance(raw["seed"], int):
        out.append(Violation("seed", "must be an integer"))
    if "threads" in raw and not (isinstance(raw["threads"], int) and raw["threads"] >= 1):
        out.append(Violation("threads", "must be an integer >= 1"))
    return out


def validate_config(path: str | Path) -> list[Violation]:
    """Violations of the config file at ``path``; unreadable files raise :class:`ConfigError`."""
    return check_config(_read_yaml(Path(path)))


class PipelineError(EconfitError):
    def __init__(self, stage: str, cause: Exception, manifest: dict):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.manifest = manifest
        self.exit_code = getattr(cause, "exit_code", 2)


def write_fitness_csv(path, ranking) -> None:
    rows = [
        [c, format_float(f), int(p), format_float(r)]
        for c, f, p, r in zip(ranking.countries, ranking.fitness, ranking.position, ranking.norm_rank)
    ]
    write_csv(path, ["country", "fitness", "rank", "norm_rank"], rows)


def write_complexity_csv(path, res) -> None:
    pos = rank_products(res)
    rows = [[p, format_float(q), int(r)] for p, q, r in zip(res.products, res.complexity, pos)]
    write_csv(path, ["product", "complexity", "rank"], rows)


def write_diagnostics(path, res, extra: dict | None = None) -> None:
    doc = {
        "iterations_run": res.iterations_run,
        "converged_by": res.converged_by,
        **(extra or {}),
        "trace": res.trace.to_dict(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _fitness_for_year(flows, year, cfg: PipelineConfig):
    x = build_export_matrix(flows, year)
    m = binarize(compute_rca(x), cfg.rca_threshold)
    report = None
    if cfg.prune:
        m, report = prune(m)
    res = compute_fitness(m, cfg.fitness)
    return m, res, report


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Execute every stage and return the manifest (also written to ``manifest.json``)."""
    manifest: dict[str, Any] = {
        "econfit_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "config": cfg.raw,
        "stages_completed": [],
        "artifacts": [],
        "timings": {},
        "convergence": {},
    }
    out = cfg.output_dir
    artifacts: list[Path] = []

    @contextmanager
    def stage(name):
        t0 = time.perf_counter()
        try:
            yield
        except (EconfitError, OSError, ValueError, KeyError, ArithmeticError) as exc:
            manifest["failed_stage"] = name
            manifest["artifacts"] = _hashes(artifacts, out)
            raise PipelineError(name, exc, manifest) from exc
        finally:
            manifest["timings"][name] = time.perf_counter() - t0
        manifest["stages_completed"].append(name)

    with stage("ingest"):
        flows, trade_rejects = parse_trade_flows(cfg.trade_path)
        macro, panel_rejects = parse_macro_panel(cfg.panel_path)
        manifest["rejected_rows"] = {"trade": len(trade_rejects), "panel": len(panel_rejects)}

    out.mkdir(parents=True, exist_ok=True)

    with stage("fitness"):
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(lambda y: _fitness_for_year(flows, y, cfg), cfg.years))
        else:
            results = [_fitness_for_year(flows, y, cfg) for y in cfg.years]
        rankings = {}
        for year, (m, res, report) in zip(cfg.years, results):
            ranking = rank_countries(res)
            rankings[year] = ranking
            paths = {
                "matrix": out / f"m_{year}.csv",
                "fitness": out / f"fitness_{year}.csv",
                "complexity": out / f"complexity_{year}.csv",
                "diagnostics": out / f"diag_{year}.json",
            }
            triangular_order(m, res).to_csv(paths["matrix"])
            write_fitness_csv(paths["fitness"], ranking)
            write_complexity_csv(paths["complexity"], res)
            pruned = {} if report is None else {
                "removed_countries": list(report.removed_countries),
                "removed_products": list(report.removed_products),
            }
            write_diagnostics(paths["diagnostics"], res, {"year": year, "pruned": pruned})
            artifacts.extend(paths.values())
            manifest["convergence"][str(year)] = {
                "converged_by": res.converged_by,
                "iterations": res.iterations_run,
                "ties": ranking.tied,
                "shape": list(m.shape),
            }

    with stage("panel"):
        growth = build_growth_panel(macro, rankings, cfg.horizon, cfg.lag, cfg.stride, cfg.rank_kind)
        growth.to_csv(out / "growth.csv")
        artifacts.append(out / "growth.csv")
        manifest["panel"] = {"n_obs": len(growth), "attrition": dict(growth.attrition)}

    with stage("colormaps"):
        for i, spec in enumerate(cfg.colormaps):
            bw = spec.bandwidth if isinstance(spec.bandwidth, str) else np.asarray(spec.bandwidth, float)
            surface = build_colormap(growth, spec.x, spec.y, spec.target, spec.nx, spec.ny, bandwidth=bw)
            path = out / f"surface_{i}_{spec.x}__{spec.y}.csv"
            surface.to_csv(path)
            artifacts.append(path)

    with stage("regressions"):
        for spec in cfg.regressions:
            result = ols_robust(growth, spec.with_fitness, spec.fixed_effects, spec.robust.upper())
            path = out / f"report_{spec.name}.json"
            result.to_json(path)
            artifacts.append(path)

    manifest["artifacts"] = _hashes(artifacts, out)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")
    return manifest


def _hashes(paths, root: Path) -> list[dict]:
    return [
        {"path": str(p.relative_to(root)), "sha256": sha256_file(p), "bytes": p.stat().st_size}
        for p in paths
        if p.exists()
    ]
