"""Balassa revealed comparative advantage and the binary country-product matrix."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array

from ._matrix import LabeledMatrix
from .exceptions import DataError
from .ingest import ExportMatrix


class RcaMatrix(LabeledMatrix):
    """Balassa index per (country, product)."""


class BinaryMatrix(LabeledMatrix):
    """0/1 country-product adjacency matrix."""

    integer_cells = True

    def _check_values(self, values):
        if not np.all((values == 0) | (values == 1)):
            raise DataError("binary matrix entries must be exactly 0 or 1")

    @property
    def diversification(self) -> np.ndarray:
        return self.values.sum(axis=1)

    @property
    def ubiquity(self) -> np.ndarray:
        return self.values.sum(axis=0)


def balassa_index(X) -> np.ndarray:
    """Array form of the Balassa index.

    ``RCA[c, p] = (X[c, p] / X[c, :].sum()) / (X[:, p].sum() / X.sum())``;
    rows whose total is zero are set to 0 instead of 0/0.
    """
    X = check_array(X, dtype=np.float64, ensure_all_finite=True)
    if np.any(X < 0):
        raise DataError("export values must be nonnegative")
    total = X.sum()
    if not total > 0:
        raise DataError("export matrix has no positive entry")
    row = X.sum(axis=1, keepdims=True)
    col = X.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        rca = (X / row) * (total / col)
    # 0/0 from zero rows, and 0*inf from zero columns
    rca[np.isnan(rca)] = 0.0
    return rca


def compute_rca(x: ExportMatrix) -> RcaMatrix:
    return RcaMatrix(year=x.year, countries=x.countries, products=x.products, values=balassa_index(x.values))


def binarize(r: RcaMatrix, threshold: float = 1.0) -> BinaryMatrix:
    """``M[c, p] = 1`` iff ``RCA[c, p] >= threshold`` (boundary inclusive)."""
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    return BinaryMatrix(
        year=r.year,
        countries=r.countries,
        products=r.products,
        values=(r.values >= threshold).astype(float),
    )


@dataclass(frozen=True)
class PruneReport:
    removed_countries: tuple[str, ...] = ()
    removed_products: tuple[str, ...] = ()
    passes: int = 0

    @property
    def empty(self) -> bool:
        return not self.removed_countries and not self.removed_products


def prune(m: BinaryMatrix) -> tuple[BinaryMatrix, PruneReport]:
    """Repeatedly drop all-zero rows and columns until none remain."""
    rows = np.arange(m.shape[0])
    cols = np.arange(m.shape[1])
    removed_c: list[str] = []
    removed_p: list[str] = []
    passes = 0
    while True:
        sub = m.values[np.ix_(rows, cols)]
        zero_r = sub.sum(axis=1) == 0
        if zero_r.any():
            removed_c.extend(m.countries[i] for i in rows[zero_r])
            rows = rows[~zero_r]
            passes += 1
            continue
        zero_c = sub.sum(axis=0) == 0
        if zero_c.any():
            removed_p.extend(m.products[j] for j in cols[zero_c])
            cols = cols[~zero_c]
            passes += 1
            continue
        break
    if rows.size == 0 or cols.size == 0:
        raise DataError("pruning removed every country or product")
    report = PruneReport(tuple(removed_c), tuple(removed_p), passes)
    if report.empty:
        return m, report
    return m.take(rows, cols), report


class RCATransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer: export values -> RCA, or -> 0/1 if ``threshold`` is set.

    Parameters
    ----------
    threshold : float or None, default=None
        When given, cells are binarized with ``RCA >= threshold``.
    """

    def __init__(self, threshold: float | None = None):
        self.threshold = threshold

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        rca = balassa_index(X)
        if self.threshold is None:
            return rca
        if not self.threshold > 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        return (rca >= self.threshold).astype(float)
