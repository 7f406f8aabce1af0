"""Labeled country x product matrices and their canonical wide CSV format.

The CSV layout is::

    #year=1998
    country,<product_1>,<product_2>,...
    <country_1>,<value>,<value>,...

The ``#year`` line is optional. Binary matrices are written with integer
0/1 cells, real matrices with round-trip float formatting.
"""
from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import ClassVar, Sequence

import numpy as np

from ._io import Source, format_float, read_text, write_csv
from .exceptions import DataError, ParseError


@dataclass(frozen=True, eq=False)
class LabeledMatrix:
    """Dense matrix with unique row (country) and column (product) labels."""

    year: int | None
    countries: tuple[str, ...]
    products: tuple[str, ...]
    values: np.ndarray

    integer_cells: ClassVar[bool] = False

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"matrix must be 2-D, got shape {values.shape}")
        object.__setattr__(self, "countries", tuple(str(c) for c in self.countries))
        object.__setattr__(self, "products", tuple(str(p) for p in self.products))
        if values.shape != (len(self.countries), len(self.products)):
            raise DataError(
                f"values shape {values.shape} does not match "
                f"{len(self.countries)} countries x {len(self.products)} products"
            )
        for kind, labels in (("country", self.countries), ("product", self.products)):
            if len(set(labels)) != len(labels):
                raise DataError(f"duplicate {kind} labels")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        self._check_values(values)

    def _check_values(self, values: np.ndarray) -> None:
        if not np.all(np.isfinite(values)):
            raise DataError("matrix contains non-finite entries")
        if np.any(values < 0):
            raise DataError("matrix contains negative entries")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return (
            self.year == other.year
            and self.countries == other.countries
            and self.products == other.products
            and np.array_equal(self.values, other.values)
        )

    def __getitem__(self, key: tuple[str, str]) -> float:
        c, p = key
        return float(self.values[self.countries.index(c), self.products.index(p)])

    def take(self, rows: Sequence[int] | np.ndarray, cols: Sequence[int] | np.ndarray):
        """Sub-matrix (or permutation) by integer row/column positions."""
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        return type(self)(
            year=self.year,
            countries=tuple(self.countries[i] for i in rows),
            products=tuple(self.products[j] for j in cols),
            values=self.values[np.ix_(rows, cols)],
        )

    def to_csv(self, path: str | os.PathLike) -> None:
        fmt = (lambda v: str(int(v))) if self.integer_cells else format_float
        header = ["country", *self.products]
        rows = [[c, *(fmt(v) for v in row)] for c, row in zip(self.countries, self.values)]
        if self.year is None:
            write_csv(path, header, rows)
            return
        buf = io.StringIO()
        buf.write(f"#year={self.year}\n")
        csv.writer(buf, lineterminator="\n").writerows([header, *rows])
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def from_csv(cls, source: Source):
        text = read_text(source)
        lines = text.splitlines()
        year = None
        if lines and lines[0].startswith("#"):
            key, _, val = lines[0][1:].partition("=")
            if key.strip() != "year":
                raise ParseError(f"unknown matrix metadata line {lines[0]!r}")
            try:
                year = int(val)
            except ValueError as exc:
                raise ParseError(f"bad year in metadata line {lines[0]!r}") from exc
            lines = lines[1:]
        rows = list(csv.reader(lines))
        if not rows or not rows[0] or rows[0][0] != "country":
            raise ParseError("matrix CSV must start with a 'country,<products...>' header")
        products = rows[0][1:]
        countries, values = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(products) + 1:
                raise ParseError(f"line {lineno}: expected {len(products) + 1} fields, got {len(row)}")
            countries.append(row[0])
            try:
                values.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
        arr = np.array(values, dtype=float).reshape(len(countries), len(products))
        return cls(year=year, countries=tuple(countries), products=tuple(products), values=arr)
