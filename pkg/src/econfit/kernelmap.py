"""Nadaraya-Watson surfaces of growth over a two-variable plane."""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._io import format_float, write_csv
from .exceptions import DataError

SUPPORT_CUTOFF = 1e-6
_CHUNK = 2048


def scott_bandwidth(X, names: Sequence[str] | None = None) -> np.ndarray:
    """Per-dimension Scott rule ``sigma_d * n ** (-1 / (d + 4))``."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    sigma = X.std(axis=0, ddof=1) if n > 1 else np.zeros(d)
    for k in range(d):
        if not sigma[k] > 0:
            name = names[k] if names is not None else f"dimension {k}"
            raise DataError(f"zero variance in {name}; cannot choose a bandwidth")
    return sigma * n ** (-1.0 / (d + 4))


def _kernel_sums(X: np.ndarray, y: np.ndarray, Q: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Estimates and total weights at each row of ``Q``; ``nan`` where the weight is zero."""
    num = np.empty(len(Q))
    den = np.empty(len(Q))
    Xs = X / h
    # responses are taken relative to y[0], so a constant response is returned exactly
    ref = y[0]
    dy = y - ref
    for start in range(0, len(Q), _CHUNK):
        q = Q[start:start + _CHUNK] / h
        sq = ((q[:, None, :] - Xs[None, :, :]) ** 2).sum(axis=2)
        w = np.exp(-0.5 * sq)
        num[start:start + _CHUNK] = w @ dy
        den[start:start + _CHUNK] = w.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        est = np.where(den > 0, ref + num / den, np.nan)
    return est, den


def nw_estimate(points, y, query, bandwidths) -> tuple[float, float]:
    """Gaussian product-kernel Nadaraya-Watson estimate at one query point.

    ``points`` has shape ``(n, d)``; a 1-D sequence is read as ``d = 1``.

    Returns ``(estimate, total_weight)``. If every weight underflows to zero
    the estimate is ``nan`` and the weight ``0.0``.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float)
    q = np.atleast_1d(np.asarray(query, dtype=float))
    if X.ndim != 2 or X.shape[1] != q.size or y.shape != (X.shape[0],):
        raise ValueError("points must be (n, d), y (n,) and query (d,)")
    h = np.broadcast_to(np.asarray(bandwidths, dtype=float), q.shape)
    if X.shape[0] < 1:
        raise ValueError("need at least one point")
    if not np.all(h > 0):
        raise ValueError("bandwidths must be positive")
    est, den = _kernel_sums(X, y, q[None, :], h)
    return float(est[0]), float(den[0])


class NadarayaWatsonRegressor(RegressorMixin, BaseEstimator):
    """Nadaraya-Watson regression with a Gaussian product kernel.

    Parameters
    ----------
    bandwidth : "scott", float or array-like of shape (n_features,)
        Per-dimension kernel widths; "scott" applies Scott's rule to the
        training inputs.
    """

    def __init__(self, bandwidth="scott"):
        self.bandwidth = bandwidth

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "scott":
                raise ValueError(f"unknown bandwidth rule {self.bandwidth!r}")
            h = scott_bandwidth(X)
        else:
            h = np.broadcast_to(np.asarray(self.bandwidth, dtype=float), (X.shape[1],)).copy()
            if not np.all(h > 0):
                raise ValueError("bandwidth must be positive")
        self.X_fit_ = X
        self.y_fit_ = y
        self.bandwidth_ = h
        self.n_features_in_ = X.shape[1]
        return self

    def predict_with_weight(self, X) -> tuple[np.ndarray, np.ndarray]:
        check_is_fitted(self, "X_fit_")
        Q = check_array(X, dtype=np.float64)
        return _kernel_sums(self.X_fit_, self.y_fit_, Q, self.bandwidth_)

    def predict(self, X):
        return self.predict_with_weight(X)[0]


@dataclass(frozen=True, eq=False)
class KernelSurface:
    """Estimates on an ``nx x ny`` grid; ``estimates[i, j]`` is at ``(x_axis[i], y_axis[j])``.

    ``supported`` is True where the total kernel weight reaches
    ``SUPPORT_CUTOFF * n_points``.
    """

    x_name: str
    y_name: str
    target: str
    x_axis: np.ndarray
    y_axis: np.ndarray
    estimates: np.ndarray
    weights: np.ndarray
    supported: np.ndarray
    bandwidths: np.ndarray
    n_points: int

    def to_csv(self, path: str | os.PathLike) -> None:
        rows = []
        for i, xv in enumerate(self.x_axis):
            for j, yv in enumerate(self.y_axis):
                e = self.estimates[i, j]
                rows.append([
                    format_float(xv), format_float(yv),
                    "" if np.isnan(e) else format_float(e),
                    format_float(self.weights[i, j]),
                    int(self.supported[i, j]),
                ])
        write_csv(path, ["x", "y", "estimate", "weight", "supported"], rows)


def evaluate_grid(X, y, x_axis, y_axis, bandwidths) -> tuple[np.ndarray, np.ndarray]:
    """Estimates and weights for every (x_axis[i], y_axis[j]) pair."""
    gx, gy = np.meshgrid(np.asarray(x_axis, float), np.asarray(y_axis, float), indexing="ij")
    model = NadarayaWatsonRegressor(bandwidth=bandwidths).fit(X, y)
    est, w = model.predict_with_weight(np.column_stack([gx.ravel(), gy.ravel()]))
    return est.reshape(gx.shape), w.reshape(gx.shape)


def build_colormap(
    panel,
    x_var: str,
    y_var: str,
    target: str = "growth",
    nx: int = 100,
    ny: int = 100,
    x_range: tuple[float, float] | None = None,
    y_range: tuple[float, float] | None = None,
    bandwidth="scott",
) -> KernelSurface:
    """Pool all rows of a growth panel and smooth ``target`` over ``(x_var, y_var)``.

    Variables are looked up with ``panel.column``, so ``log_<name>`` selects the
    log of a level column. Rows with a missing value in any of the three
    variables are dropped.
    """
    if nx < 2 or ny < 2:
        raise ValueError("grid needs at least 2 points per axis")
    xs = panel.column(x_var)
    ys = panel.column(y_var)
    t = panel.column(target)
    keep = np.isfinite(xs) & np.isfinite(ys) & np.isfinite(t)
    X = np.column_stack([xs[keep], ys[keep]])
    target_values = t[keep]
    if len(X) < 2:
        raise DataError(f"need at least 2 usable observations, got {len(X)}")
    if isinstance(bandwidth, str):
        if bandwidth != "scott":
            raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
        h = scott_bandwidth(X, names=(x_var, y_var))
    else:
        h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (2,)).copy()
        for k, name in enumerate((x_var, y_var)):
            if np.ptp(X[:, k]) == 0:
                raise DataError(f"zero variance in {name}")

    def axis(col, rng, n):
        lo, hi = rng if rng is not None else (col.min(), col.max())
        if not hi > lo:
            raise DataError("grid range must be strictly increasing")
        return np.linspace(lo, hi, n)

    x_axis = axis(X[:, 0], x_range, nx)
    y_axis = axis(X[:, 1], y_range, ny)
    est, w = evaluate_grid(X, target_values, x_axis, y_axis, h)
    supported = w >= SUPPORT_CUTOFF * len(X)
    return KernelSurface(
        x_name=x_var, y_name=y_var, target=target,
        x_axis=x_axis, y_axis=y_axis, estimates=est, weights=w,
        supported=supported, bandwidths=h, n_points=len(X),
    )
