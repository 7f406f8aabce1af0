"""Growth panel construction and OLS with heteroskedasticity-robust errors."""
from __future__ import annotations

import csv
import difflib
import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._io import Source, format_float, read_text, write_csv
from .exceptions import CollinearityError, DataError
from .fitness import CountryRanking, FitnessResult, SweepTrace, rank_countries
from .ingest import MISSING_TOKENS, MacroPanel

# (column, label) in the row order of the printed results table
DRIVERS = (
    ("log_gdp_pc", "log(GDPpc)"),
    ("log_k_emp", "log(K/EMP)"),
    ("log_emp", "log(EMP)"),
    ("log_tfp_gdp", "log(TFP/GDP)"),
    ("log_inv_life_exp", "log(1/LifeExp)"),
    ("log_school", "log(School)"),
)
FITNESS_REGRESSOR = ("fitness_rank", "Fitness Rank")
CONSTANT = "Constant"
LEVEL_COLUMNS = ("gdp_pc", "k_emp", "emp", "emp_pop", "tfp_gdp", "life_exp", "school", "fitness")


@dataclass(frozen=True, eq=False)
class GrowthPanel:
    """One row per (country, base year t).

    ``growth`` is annualized log growth of GDP per capita from t to t + horizon;
    every other column is measured at t - lag.
    """

    countries: tuple[str, ...]
    years: np.ndarray
    data: Mapping[str, np.ndarray]
    horizon: int = 5
    lag: int = 5
    attrition: Mapping[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.countries)

    @property
    def names(self) -> list[str]:
        return list(self.data)

    def available(self) -> list[str]:
        """Column names plus the ``log_<level>`` selectors derivable from them."""
        derived = [f"log_{n}" for n in self.data if f"log_{n}" not in self.data and n not in ("growth",)]
        return [*self.data, *derived]

    def column(self, name: str) -> np.ndarray:
        if name in self.data:
            return np.asarray(self.data[name], dtype=float)
        if name.startswith("log_") and name[4:] in self.data:
            base = np.asarray(self.data[name[4:]], dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(base > 0, np.log(np.where(base > 0, base, 1.0)), np.nan)
        raise KeyError(unknown_variable_message(name, self.available()))

    def to_csv(self, path: str | os.PathLike) -> None:
        names = list(self.data)
        rows = (
            [c, y, *(("NA" if math.isnan(self.data[n][i]) else format_float(self.data[n][i])) for n in names)]
            for i, (c, y) in enumerate(zip(self.countries, self.years.tolist()))
        )
        write_csv(path, ["country", "year", *names], rows)

    @classmethod
    def from_csv(cls, source: Source, horizon: int = 5, lag: int = 5) -> "GrowthPanel":
        rows = list(csv.reader(read_text(source).splitlines()))
        if not rows or rows[0][:2] != ["country", "year"]:
            raise DataError("growth panel CSV must start with 'country,year,...'")
        names = rows[0][2:]
        countries, years = [], []
        data = {n: [] for n in names}
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(names) + 2:
                raise DataError(f"line {lineno}: wrong number of fields")
            countries.append(row[0])
            years.append(int(row[1]))
            for n, v in zip(names, row[2:]):
                data[n].append(math.nan if v.strip().lower() in MISSING_TOKENS else float(v))
        return cls(tuple(countries), np.array(years, dtype=int), {n: np.array(v, float) for n, v in data.items()},
                   horizon, lag)


def unknown_variable_message(name: str, valid: Sequence[str]) -> str:
    close = difflib.get_close_matches(name, list(valid), n=1, cutoff=0.0)
    hint = f"; did you mean {close[0]!r}?" if close else ""
    return f"unknown variable {name!r}{hint}"


def rankings_from_panel(macro: MacroPanel) -> dict[int, CountryRanking]:
    """Per-year rankings built from the optional ``fitness`` column of a macro panel."""
    if "fitness" not in macro.columns:
        raise DataError("macro panel has no fitness column")
    out = {}
    fit = macro.columns["fitness"]
    for year in sorted(set(macro.years.tolist())):
        idx = [i for i in range(len(macro)) if macro.years[i] == year and fit[i] > 0]
        if not idx:
            continue
        res = FitnessResult(
            countries=tuple(macro.countries[i] for i in idx),
            products=(),
            fitness=fit[idx],
            complexity=np.empty(0),
            iterations_run=0,
            converged_by="value",
            trace=SweepTrace(),
        )
        out[year] = rank_countries(res)
    return out


def _log(v: float) -> float:
    return math.log(v) if v > 0 else math.nan


def build_growth_panel(
    macro: MacroPanel,
    fitness_by_year: Mapping[int, CountryRanking],
    horizon: int = 5,
    lag: int = 5,
    stride: int = 1,
    rank_kind: str = "normalized",
) -> GrowthPanel:
    """Pool every (country, t) with GDP at t and t + horizon and complete regressors at t - lag.

    ``stride`` keeps only base years ``t`` with ``(t - first_year) % stride == 0``;
    ``stride=horizon`` gives non-overlapping windows. Rows failing a filter are
    counted in ``attrition`` under the first filter they fail. ``rank_kind``
    picks the fitness regressor: normalized rank, raw rank or log fitness.
    """
    if horizon < 1 or lag < 0 or stride < 1:
        raise ValueError("horizon and stride must be >= 1, lag >= 0")
    rank_values = {
        year: dict(zip(r.countries, r.values(rank_kind).tolist())) for year, r in fitness_by_year.items()
    }
    raw_fitness = {year: dict(zip(r.countries, r.fitness.tolist())) for year, r in fitness_by_year.items()}
    first = int(macro.years.min()) if len(macro) else 0
    attrition: Counter = Counter()
    out_c: list[str] = []
    out_y: list[int] = []
    cols: dict[str, list[float]] = {n: [] for n in ("growth", *(d for d, _ in DRIVERS), FITNESS_REGRESSOR[0],
                                                   "log_fitness", *LEVEL_COLUMNS)}
    for country, t in zip(macro.countries, macro.years.tolist()):
        if (t - first) % stride:
            attrition["stride"] += 1
            continue
        g0 = macro.get(country, t, "gdp_pc")
        g1 = macro.get(country, t + horizon, "gdp_pc")
        if math.isnan(g0) or math.isnan(g1):
            attrition["missing_growth_window"] += 1
            continue
        s = t - lag
        lev = {n: macro.get(country, s, n) for n in ("gdp_pc", "k_emp", "emp", "pop", "tfp", "life_exp", "school")}
        drivers = {
            "log_gdp_pc": _log(lev["gdp_pc"]),
            "log_k_emp": _log(lev["k_emp"]),
            "log_emp": _log(lev["emp"]),
            "log_tfp_gdp": _log(lev["tfp"] / lev["gdp_pc"]) if lev["gdp_pc"] > 0 else math.nan,
            "log_inv_life_exp": _log(1.0 / lev["life_exp"]) if lev["life_exp"] > 0 else math.nan,
            "log_school": _log(lev["school"]),
        }
        if any(math.isnan(v) for v in drivers.values()):
            attrition["missing_lagged_regressor"] += 1
            continue
        rank = rank_values.get(s, {}).get(country, math.nan)
        if math.isnan(rank):
            attrition["missing_fitness"] += 1
            continue
        fit = raw_fitness[s][country]
        out_c.append(country)
        out_y.append(t)
        cols["growth"].append((math.log(g1) - math.log(g0)) / horizon)
        for n, v in drivers.items():
            cols[n].append(v)
        cols["fitness_rank"].append(rank)
        cols["log_fitness"].append(_log(fit))
        cols["gdp_pc"].append(lev["gdp_pc"])
        cols["k_emp"].append(lev["k_emp"])
        cols["emp"].append(lev["emp"])
        cols["emp_pop"].append(lev["emp"] / lev["pop"] if lev["pop"] > 0 else math.nan)
        cols["tfp_gdp"].append(lev["tfp"] / lev["gdp_pc"])
        cols["life_exp"].append(lev["life_exp"])
        cols["school"].append(lev["school"])
        cols["fitness"].append(fit)
    if not out_c:
        raise DataError(f"growth panel is empty; attrition by filter: {dict(attrition)}")
    return GrowthPanel(
        countries=tuple(out_c),
        years=np.array(out_y, dtype=int),
        data={n: np.array(v, dtype=float) for n, v in cols.items()},
        horizon=horizon,
        lag=lag,
        attrition=dict(attrition),
    )


@dataclass(frozen=True)
class WithinResult:
    X: np.ndarray
    y: np.ndarray
    groups: np.ndarray
    kept: np.ndarray
    n_dropped: int


def within_transform(X, y, groups) -> WithinResult:
    """Subtract group means from every column of ``X`` and from ``y``.

    Groups with a single observation carry no within variation and are
    dropped; ``kept`` is the boolean row mask into the inputs.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    groups = np.asarray(groups)
    labels, inverse, counts = np.unique(groups, return_inverse=True, return_counts=True)
    kept = counts[inverse] >= 2
    if not kept.any():
        raise DataError("every group has a single observation; fixed effects are not identified")
    Xk, yk, inv = X[kept], y[kept], inverse[kept]
    n_groups = len(labels)
    sizes = np.bincount(inv, minlength=n_groups).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        xmean = np.stack([np.bincount(inv, weights=Xk[:, j], minlength=n_groups) for j in range(X.shape[1])], axis=1)
        xmean /= sizes[:, None]
        ymean = np.bincount(inv, weights=yk, minlength=n_groups) / sizes
    return WithinResult(
        X=Xk - xmean[inv],
        y=yk - ymean[inv],
        groups=groups[kept],
        kept=kept,
        n_dropped=int((counts == 1).sum()),
    )


def _collinear_columns(X: np.ndarray) -> list[int]:
    """Columns that add no rank when scanned left to right."""
    bad, basis = [], np.empty((X.shape[0], 0))
    scale = max(1.0, float(np.abs(X).max())) if X.size else 1.0
    for j in range(X.shape[1]):
        cand = np.column_stack([basis, X[:, j]])
        if np.linalg.matrix_rank(cand, tol=1e-10 * scale * max(X.shape)) > basis.shape[1]:
            basis = cand
        else:
            bad.append(j)
    return bad


class RobustOLS(RegressorMixin, BaseEstimator):
    """Least squares with heteroskedasticity-consistent standard errors.

    Parameters
    ----------
    fit_intercept : bool, default=True
        Ignored (treated as False) when ``groups`` is passed to ``fit``.
    cov_type : {"HC1", "HC0"}, default="HC1"

    With ``groups`` the within (fixed-effects) estimator is used. The HC1
    small-sample factor is ``n / (n - k)`` where ``k`` counts the slope
    coefficients plus, under fixed effects, one absorbed mean per group.
    """

    def __init__(self, fit_intercept=True, cov_type="HC1"):
        self.fit_intercept = fit_intercept
        self.cov_type = cov_type

    def fit(self, X, y, groups=None, column_names=None):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if self.cov_type not in ("HC0", "HC1"):
            raise ValueError(f"unsupported cov_type {self.cov_type!r}")
        names = list(column_names) if column_names is not None else [f"x{j}" for j in range(X.shape[1])]
        n_absorbed = 0
        if groups is not None:
            w = within_transform(X, y, groups)
            Xd, yd = w.X, w.y
            n_absorbed = len(np.unique(w.groups))
            self.n_groups_dropped_ = w.n_dropped
            intercept = False
        else:
            Xd, yd = X, y
            intercept = self.fit_intercept
            if intercept:
                Xd = np.column_stack([np.ones(len(X)), X])
                names = [CONSTANT, *names]
        n, k = Xd.shape
        if n <= k + n_absorbed:
            raise DataError(f"{n} observations are too few for {k + n_absorbed} parameters")
        bad = _collinear_columns(Xd)
        if bad:
            raise CollinearityError(f"design matrix is rank deficient; collinear columns: {[names[j] for j in bad]}")
        beta, *_ = np.linalg.lstsq(Xd, yd, rcond=None)
        resid = yd - Xd @ beta
        bread = np.linalg.inv(Xd.T @ Xd)
        meat = (Xd * resid[:, None] ** 2).T @ Xd
        cov = bread @ meat @ bread
        if self.cov_type == "HC1":
            cov *= n / (n - k - n_absorbed)
        if intercept:
            self.intercept_ = float(beta[0])
            self.coef_ = beta[1:]
        else:
            self.intercept_ = 0.0
            self.coef_ = beta
        self.params_ = beta
        self.bse_ = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        self.cov_params_ = cov
        self.resid_ = resid
        self.param_names_ = names
        self.nobs_ = n
        sst = float(((yd - yd.mean()) ** 2).sum()) if intercept else float((yd ** 2).sum())
        self.rsquared_ = 1.0 - float((resid ** 2).sum()) / sst if sst > 0 else 1.0
        self.fixed_effects_ = groups is not None
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        return X @ self.coef_ + self.intercept_


@dataclass(frozen=True)
class RegressionResult:
    names: tuple[str, ...]
    coefficients: np.ndarray
    std_errors: np.ndarray
    n_obs: int
    n_countries: int
    fixed_effects: bool
    include_fitness: bool
    r_squared: float
    cov_type: str = "HC1"

    def coefficient(self, name: str) -> tuple[float, float]:
        i = self.names.index(name)
        return float(self.coefficients[i]), float(self.std_errors[i])

    def to_dict(self) -> dict:
        return {
            "coefficients": [
                {"name": n, "estimate": float(b), "std_error": float(s)}
                for n, b, s in zip(self.names, self.coefficients, self.std_errors)
            ],
            "n_obs": self.n_obs,
            "n_countries": self.n_countries,
            "r_squared": self.r_squared,
            "options": {
                "with_fitness": self.include_fitness,
                "fixed_effects": self.fixed_effects,
                "robust": self.cov_type.lower(),
            },
        }

    def to_json(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def to_text(self) -> str:
        width = max(len("Variable"), *(len(n) for n in self.names))
        lines = [f"{'Variable':<{width}} | {'Coefficient':>12} | {'Standard Error':>14}", "-" * (width + 33)]
        for n, b, s in zip(self.names, self.coefficients, self.std_errors):
            lines.append(f"{n:<{width}} | {b:>12.4g} | {s:>14.4g}")
        lines.append(f"N = {self.n_obs}, countries = {self.n_countries}, R^2 = {self.r_squared:.4f}"
                     + (", country fixed effects" if self.fixed_effects else ""))
        return "\n".join(lines)


def ols_robust(
    panel: GrowthPanel,
    include_fitness: bool = True,
    fixed_effects: bool = False,
    cov_type: str = "HC1",
) -> RegressionResult:
    """Regress ``growth`` on the lagged drivers (and optionally fitness rank)."""
    regs = list(DRIVERS) + ([FITNESS_REGRESSOR] if include_fitness else [])
    X = np.column_stack([panel.column(c) for c, _ in regs])
    y = panel.column("growth")
    keep = np.isfinite(X).all(axis=1) & np.isfinite(y)
    X, y = X[keep], y[keep]
    countries = np.asarray(panel.countries)[keep]
    if len(y) == 0:
        raise DataError("no complete observations to regress")
    model = RobustOLS(fit_intercept=True, cov_type=cov_type)
    model.fit(X, y, groups=countries if fixed_effects else None, column_names=[label for _, label in regs])
    n_countries = len(set(countries.tolist())) - getattr(model, "n_groups_dropped_", 0)
    return RegressionResult(
        names=tuple(model.param_names_),
        coefficients=np.array(model.params_),
        std_errors=np.array(model.bse_),
        n_obs=int(model.nobs_),
        n_countries=n_countries,
        fixed_effects=fixed_effects,
        include_fitness=include_fitness,
        r_squared=float(model.rsquared_),
        cov_type=cov_type,
    )
