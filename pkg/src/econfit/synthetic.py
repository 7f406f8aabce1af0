"""Seeded generators for matrices with known structure.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``; PCG64 is a
documented, portable generator, so a seed reproduces the same output on any
platform running the same numpy stream definitions.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import DataError
from .ingest import MacroPanel, TradeFlow
from .rca import BinaryMatrix, prune

MAX_RETRIES = 20


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _labels(prefix: str, n: int) -> tuple[str, ...]:
    width = max(3, len(str(n - 1)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


def generate_nested(nc: int, np_: int, seed: int, shuffle: bool = True) -> BinaryMatrix:
    """Perfectly nested matrix: a country of diversification ``d`` exports
    exactly the ``d`` most ubiquitous products.

    Diversifications are distinct when ``nc <= np_`` (drawn with replacement
    otherwise), and one country always exports every product so no column is
    empty. With ``shuffle`` the rows and columns are randomly permuted before
    labels ``C000...``/``P000...`` are attached.
    """
    if nc < 1 or np_ < 1:
        raise ValueError("nc and np_ must be >= 1")
    rng = make_rng(seed)
    if nc <= np_:
        rest = rng.choice(np.arange(1, np_), size=nc - 1, replace=False) if nc > 1 else np.array([], int)
    else:
        rest = rng.integers(1, np_ + 1, size=nc - 1)
    div = np.sort(np.concatenate([[np_], rest]))[::-1]
    values = (np.arange(np_)[None, :] < div[:, None]).astype(float)
    if shuffle:
        values = values[rng.permutation(nc)][:, rng.permutation(np_)]
    return BinaryMatrix(year=None, countries=_labels("C", nc), products=_labels("P", np_), values=values)


def is_nested(values) -> bool:
    """Rows can be ordered so each row's support contains the next one's."""
    A = np.asarray(values) != 0
    order = np.argsort(-A.sum(axis=1), kind="stable")
    A = A[order]
    return bool(np.all(A[1:] <= A[:-1])) if len(A) > 1 else True


@dataclass(frozen=True)
class CapabilityModel:
    """Tripartite country-capability-product model; capability ids are ``0..n_capabilities-1``."""

    countries: tuple[str, ...]
    products: tuple[str, ...]
    country_capabilities: tuple[frozenset[int], ...]
    product_requirements: tuple[frozenset[int], ...]
    n_capabilities: int
    seed: int
    country_density: float
    product_density: float

    def capability_counts(self) -> dict[str, int]:
        return {c: len(s) for c, s in zip(self.countries, self.country_capabilities)}

    def incidence(self) -> np.ndarray:
        """Full (unpruned) containment matrix."""
        cap = _set_matrix(self.country_capabilities, self.n_capabilities)
        req = _set_matrix(self.product_requirements, self.n_capabilities)
        return containment(cap, req)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_capabilities": self.n_capabilities,
            "country_density": self.country_density,
            "product_density": self.product_density,
            "countries": {c: sorted(s) for c, s in zip(self.countries, self.country_capabilities)},
            "products": {p: sorted(s) for p, s in zip(self.products, self.product_requirements)},
        }

    def to_json(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _set_matrix(sets: Sequence[frozenset[int]], k: int) -> np.ndarray:
    out = np.zeros((len(sets), k), dtype=bool)
    for i, s in enumerate(sets):
        out[i, list(s)] = True
    return out


def containment(cap: np.ndarray, req: np.ndarray) -> np.ndarray:
    """``M[c, p] = 1`` iff every capability required by ``p`` is held by ``c``."""
    cap = np.asarray(cap, dtype=bool)
    req = np.asarray(req, dtype=bool)
    missing = req[None, :, :] & ~cap[:, None, :]
    return (~missing.any(axis=2)).astype(float)


def _draw_capabilities(rng, nc, nk, density):
    cap = rng.random((nc, nk)) < density
    for i in range(nc):
        # countries without capabilities are redrawn
        while not cap[i].any():
            cap[i] = rng.random(nk) < density
    return cap


def generate_tripartite(
    nc: int,
    nk: int,
    np_: int,
    country_density: float = 0.5,
    product_density: float = 0.2,
    seed: int = 0,
) -> tuple[CapabilityModel, BinaryMatrix]:
    """Draw country and product capability sets, project to a pruned binary matrix.

    If pruning leaves nothing, the draw is repeated with a derived seed up to
    ``MAX_RETRIES`` times.
    """
    if min(nc, nk, np_) < 1:
        raise ValueError("nc, nk and np_ must be >= 1")
    for d in (country_density, product_density):
        if not 0 < d <= 1:
            raise ValueError("densities must lie in (0, 1]")
    seq = np.random.SeedSequence(seed)
    for attempt in range(MAX_RETRIES):
        rng = make_rng(seed) if attempt == 0 else np.random.Generator(np.random.PCG64(seq.spawn(1)[0]))
        cap = _draw_capabilities(rng, nc, nk, country_density)
        req = rng.random((np_, nk)) < product_density
        countries, products = _labels("C", nc), _labels("P", np_)
        model = CapabilityModel(
            countries=countries,
            products=products,
            country_capabilities=tuple(frozenset(np.flatnonzero(r).tolist()) for r in cap),
            product_requirements=tuple(frozenset(np.flatnonzero(r).tolist()) for r in req),
            n_capabilities=nk,
            seed=seed,
            country_density=country_density,
            product_density=product_density,
        )
        full = BinaryMatrix(year=None, countries=countries, products=products, values=containment(cap, req))
        try:
            pruned, _ = prune(full)
        except DataError:
            continue
        return model, pruned
    raise DataError(f"tripartite draw was empty after pruning in {MAX_RETRIES} attempts")


@dataclass(frozen=True)
class SyntheticStudy:
    flows: list[TradeFlow]
    panel: MacroPanel
    model: CapabilityModel
    capability_history: dict[int, dict[str, int]]


def generate_study(
    nc: int = 20,
    nk: int = 10,
    np_: int = 50,
    years: Sequence[int] = (1990, 1995, 2000),
    horizon: int = 10,
    country_density: float = 0.5,
    product_density: float = 0.2,
    gain_probability: float = 0.1,
    missing_rate: float = 0.02,
    seed: int = 0,
) -> SyntheticStudy:
    """Trade flows and an annual macro panel driven by a tripartite model.

    Countries acquire missing capabilities with ``gain_probability`` between
    consecutive trade years. Exports of products within reach are large, the
    rest small or absent, so RCA binarization roughly recovers the
    containment matrix. Annual GDP per capita growth rises with the share of
    capabilities held; the other macro series are noisy functions of the same
    share. About ``missing_rate`` of the schooling cells are left missing.
    The panel spans ``min(years)`` to ``max(years) + horizon``.
    """
    years = sorted(int(y) for y in years)
    rng = make_rng(seed)
    cap = _draw_capabilities(rng, nc, nk, country_density)
    req = rng.random((np_, nk)) < product_density
    countries, products = _labels("C", nc), _labels("P", np_)
    model = CapabilityModel(
        countries, products,
        tuple(frozenset(np.flatnonzero(r).tolist()) for r in cap),
        tuple(frozenset(np.flatnonzero(r).tolist()) for r in req),
        nk, seed, country_density, product_density,
    )

    flows: list[TradeFlow] = []
    share_by_year: dict[int, np.ndarray] = {}
    history: dict[int, dict[str, int]] = {}
    for k, year in enumerate(years):
        if k > 0:
            cap = cap | (rng.random(cap.shape) < gain_probability)
        share_by_year[year] = cap.sum(axis=1) / nk
        history[year] = dict(zip(countries, cap.sum(axis=1).tolist()))
        M = containment(cap, req)
        big = rng.lognormal(mean=3.0, sigma=1.0, size=M.shape) * 100.0
        small = rng.lognormal(mean=0.0, sigma=1.0, size=M.shape)
        present = rng.random(M.shape) < 0.5
        for i, c in enumerate(countries):
            for j, p in enumerate(products):
                if M[i, j]:
                    flows.append(TradeFlow(year, c, p, float(big[i, j])))
                elif present[i, j]:
                    flows.append(TradeFlow(year, c, p, float(small[i, j])))

    first, last = years[0], years[-1] + horizon
    span = np.arange(first, last + 1)
    base_gdp = np.exp(rng.normal(8.0, 0.8, nc))
    base_pop = np.exp(rng.normal(16.0, 1.0, nc))
    k_ratio = rng.uniform(2.0, 4.0, nc)
    emp_rate = rng.uniform(0.35, 0.6, nc)
    tfp_ratio = rng.uniform(0.002, 0.01, nc)

    rows_c, rows_y = [], []
    cols = {n: [] for n in ("gdp_pc", "k_emp", "emp", "pop", "tfp", "life_exp", "school")}
    for i, c in enumerate(countries):
        gdp = base_gdp[i]
        for t, year in enumerate(span):
            active = max([y for y in years if y <= year], default=years[0])
            share = share_by_year[active][i]
            if t > 0:
                gdp *= math.exp(0.005 + 0.03 * share + rng.normal(0.0, 0.01))
            pop = base_pop[i] * 1.01**t
            rows_c.append(c)
            rows_y.append(int(year))
            cols["gdp_pc"].append(gdp)
            cols["k_emp"].append(gdp * k_ratio[i] * math.exp(rng.normal(0.0, 0.05)))
            cols["pop"].append(pop)
            cols["emp"].append(pop * emp_rate[i] * math.exp(rng.normal(0.0, 0.02)))
            cols["tfp"].append(gdp * tfp_ratio[i] * math.exp(rng.normal(0.0, 0.05)))
            cols["life_exp"].append(float(np.clip(50.0 + 25.0 * share + rng.normal(0.0, 2.0), 20.0, 95.0)))
            school = 1.0 + 2.0 * share + abs(rng.normal(0.0, 0.2))
            cols["school"].append(math.nan if rng.random() < missing_rate else school)
    panel = MacroPanel(
        countries=tuple(rows_c),
        years=np.array(rows_y),
        columns={n: np.array(v) for n, v in cols.items()},
    )
    return SyntheticStudy(flows=flows, panel=panel, model=model, capability_history=history)
