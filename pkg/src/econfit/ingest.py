"""Parsing of trade-flow and macroeconomic panel CSV files.

Both parsers are lenient at the row level and strict at the file level: a
malformed header (or a duplicated panel key) aborts the parse, while bad data
rows are collected as :class:`RejectedRow` records so that
``len(accepted) + len(rejected)`` always equals the number of data rows.
"""
from __future__ import annotations

import csv
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._io import Source, format_float, read_text, write_csv
from ._matrix import LabeledMatrix
from .exceptions import DuplicateKeyError, EmptyYearError, ParseError

TRADE_FIELDS = ("year", "exporter", "product", "value")
MACRO_NUMERIC = ("gdp_pc", "k_emp", "emp", "pop", "tfp", "life_exp", "school")
MACRO_OPTIONAL = ("fitness",)
MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "..", "."})


@dataclass(frozen=True)
class TradeFlow:
    year: int
    exporter: str
    product: str
    value: float


@dataclass(frozen=True)
class RejectedRow:
    """A data row that failed validation. ``line`` is 1-based within the file."""

    line: int
    reason: str
    raw: tuple[str, ...] = ()


@dataclass(frozen=True)
class TradeSchema:
    """Maps canonical trade fields onto the column names of a particular file."""

    columns: Mapping[str, str] = field(default_factory=lambda: {f: f for f in TRADE_FIELDS})
    min_year: int | None = None
    max_year: int | None = None


@dataclass(frozen=True)
class PanelSchema:
    columns: Mapping[str, str] = field(
        default_factory=lambda: {f: f for f in ("country", "year", *MACRO_NUMERIC, *MACRO_OPTIONAL)}
    )


class ExportMatrix(LabeledMatrix):
    """Nonnegative country x product export values for one year."""


def _header_index(header: Sequence[str], columns: Mapping[str, str], required: Iterable[str]) -> dict[str, int]:
    stripped = [h.strip() for h in header]
    if len(set(stripped)) != len(stripped):
        raise ParseError(f"duplicate column names in header {stripped}")
    index = {}
    for name in required:
        col = columns.get(name, name)
        if col not in stripped:
            raise ParseError(f"header is missing column {col!r} (for field {name!r}); got {stripped}")
        index[name] = stripped.index(col)
    return index


def _rows(source: Source) -> tuple[list[str], list[tuple[int, list[str]]]]:
    text = read_text(source)
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: no header row") from None
    rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]
    return header, rows


def parse_trade_flows(
    source: Source, schema: TradeSchema | None = None
) -> tuple[list[TradeFlow], list[RejectedRow]]:
    """Parse a trade CSV into flows plus rejection records, preserving row order."""
    schema = schema or TradeSchema()
    header, rows = _rows(source)
    idx = _header_index(header, schema.columns, TRADE_FIELDS)
    flows: list[TradeFlow] = []
    rejected: list[RejectedRow] = []
    for lineno, row in rows:
        raw = tuple(row)
        if len(row) != len(header):
            rejected.append(RejectedRow(lineno, f"expected {len(header)} fields, got {len(row)}", raw))
            continue
        try:
            year = int(row[idx["year"]].strip())
        except ValueError:
            rejected.append(RejectedRow(lineno, f"unparseable year {row[idx['year']]!r}", raw))
            continue
        if (schema.min_year is not None and year < schema.min_year) or (
            schema.max_year is not None and year > schema.max_year
        ):
            rejected.append(RejectedRow(lineno, f"year {year} outside configured range", raw))
            continue
        exporter = row[idx["exporter"]].strip()
        product = row[idx["product"]].strip()
        if not exporter or not product:
            rejected.append(RejectedRow(lineno, "empty exporter or product code", raw))
            continue
        try:
            value = float(row[idx["value"]])
        except ValueError:
            rejected.append(RejectedRow(lineno, f"unparseable value {row[idx['value']]!r}", raw))
            continue
        if not math.isfinite(value):
            rejected.append(RejectedRow(lineno, "value must be finite", raw))
            continue
        if value < 0:
            rejected.append(RejectedRow(lineno, f"value must be nonnegative, got {value}", raw))
            continue
        flows.append(TradeFlow(year, exporter, product, value))
    return flows, rejected


def build_export_matrix(flows: Iterable[TradeFlow], year: int) -> ExportMatrix:
    """Aggregate flows of one year into a dense matrix with sorted labels.

    Cells are summed with :func:`math.fsum`, which is correctly rounded, so the
    result does not depend on the order of ``flows``.
    """
    cells: dict[tuple[str, str], list[float]] = defaultdict(list)
    for f in flows:
        if f.year == year:
            cells[(f.exporter, f.product)].append(f.value)
    if not cells:
        raise EmptyYearError(f"no trade flows for year {year}")
    countries = sorted({c for c, _ in cells})
    products = sorted({p for _, p in cells})
    ci = {c: i for i, c in enumerate(countries)}
    pi = {p: j for j, p in enumerate(products)}
    values = np.zeros((len(countries), len(products)))
    for (c, p), vals in cells.items():
        values[ci[c], pi[p]] = math.fsum(vals)
    return ExportMatrix(year=year, countries=tuple(countries), products=tuple(products), values=values)


def trade_years(flows: Iterable[TradeFlow]) -> list[int]:
    return sorted({f.year for f in flows})


def write_trade_flows(path: str | os.PathLike, flows: Iterable[TradeFlow]) -> None:
    write_csv(path, TRADE_FIELDS, ((f.year, f.exporter, f.product, format_float(f.value)) for f in flows))


@dataclass(frozen=True, eq=False)
class MacroPanel:
    """Country-year macro observations; ``NaN`` marks a missing cell.

    Rows are sorted by (country, year). ``columns`` maps every numeric field
    to a float array aligned with ``countries``/``years``.
    """

    countries: tuple[str, ...]
    years: np.ndarray
    columns: Mapping[str, np.ndarray]

    def __post_init__(self):
        years = np.asarray(self.years, dtype=int)
        n = len(self.countries)
        if years.shape != (n,):
            raise ParseError("years must align with countries")
        keys = list(zip(self.countries, years.tolist()))
        if len(set(keys)) != n:
            seen = set()
            dup = next(k for k in keys if k in seen or seen.add(k))
            raise DuplicateKeyError(f"duplicate (country, year) key {dup}")
        order = sorted(range(n), key=lambda i: keys[i])
        cols = {}
        for name, arr in self.columns.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (n,):
                raise ParseError(f"column {name!r} has wrong length")
            arr = arr[order]
            arr.setflags(write=False)
            cols[name] = arr
        years = years[order]
        years.setflags(write=False)
        object.__setattr__(self, "countries", tuple(self.countries[i] for i in order))
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "_index", {k: i for i, k in enumerate(zip(self.countries, years.tolist()))})

    def __len__(self) -> int:
        return len(self.countries)

    def get(self, country: str, year: int, column: str) -> float:
        """Value at (country, year); ``NaN`` when the row or the cell is missing."""
        i = self._index.get((country, int(year)))
        if i is None or column not in self.columns:
            return math.nan
        return float(self.columns[column][i])

    def has_row(self, country: str, year: int) -> bool:
        return (country, int(year)) in self._index

    def to_csv(self, path: str | os.PathLike) -> None:
        names = [c for c in (*MACRO_NUMERIC, *MACRO_OPTIONAL) if c in self.columns]

        def cell(v):
            return "NA" if math.isnan(v) else format_float(v)

        rows = (
            [c, y, *(cell(self.columns[n][i]) for n in names)]
            for i, (c, y) in enumerate(zip(self.countries, self.years.tolist()))
        )
        write_csv(path, ["country", "year", *names], rows)


def parse_macro_panel(source: Source, schema: PanelSchema | None = None) -> tuple[MacroPanel, list[RejectedRow]]:
    """Parse a panel CSV. Missing-value tokens such as ``NA`` become ``NaN``.

    Raises :class:`DuplicateKeyError` if a (country, year) key repeats.
    """
    schema = schema or PanelSchema()
    header, rows = _rows(source)
    idx = _header_index(header, schema.columns, ("country", "year", *MACRO_NUMERIC))
    stripped = [h.strip() for h in header]
    for opt in MACRO_OPTIONAL:
        col = schema.columns.get(opt, opt)
        if col in stripped:
            idx[opt] = stripped.index(col)
    numeric = [n for n in (*MACRO_NUMERIC, *MACRO_OPTIONAL) if n in idx]

    countries: list[str] = []
    years: list[int] = []
    data: dict[str, list[float]] = {n: [] for n in numeric}
    rejected: list[RejectedRow] = []
    seen: dict[tuple[str, int], int] = {}
    for lineno, row in rows:
        raw = tuple(row)
        if len(row) != len(header):
            rejected.append(RejectedRow(lineno, f"expected {len(header)} fields, got {len(row)}", raw))
            continue
        country = row[idx["country"]].strip()
        if not country:
            rejected.append(RejectedRow(lineno, "empty country code", raw))
            continue
        try:
            year = int(row[idx["year"]].strip())
        except ValueError:
            rejected.append(RejectedRow(lineno, f"unparseable year {row[idx['year']]!r}", raw))
            continue
        values, problem = {}, None
        for name in numeric:
            cell = row[idx[name]].strip()
            if cell.lower() in MISSING_TOKENS:
                values[name] = math.nan
                continue
            try:
                v = float(cell)
            except ValueError:
                problem = f"non-numeric cell {cell!r} in column {name!r}"
                break
            if not math.isfinite(v):
                problem = f"non-finite cell {cell!r} in column {name!r}"
                break
            values[name] = v
        if problem is None:
            if values.get("gdp_pc", 1.0) <= 0:
                problem = "gdp_pc must be positive"
            elif not math.isnan(values.get("life_exp", math.nan)) and not (0 < values["life_exp"] < 120):
                problem = "life_exp must lie in (0, 120)"
        if problem is not None:
            rejected.append(RejectedRow(lineno, problem, raw))
            continue
        key = (country, year)
        if key in seen:
            raise DuplicateKeyError(f"duplicate (country, year) key {key} on lines {seen[key]} and {lineno}")
        seen[key] = lineno
        countries.append(country)
        years.append(year)
        for name in numeric:
            data[name].append(values[name])
    panel = MacroPanel(
        countries=tuple(countries),
        years=np.array(years, dtype=int),
        columns={n: np.array(v, dtype=float) for n, v in data.items()},
    )
    return panel, rejected
