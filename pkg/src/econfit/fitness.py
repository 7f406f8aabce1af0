"""Nonlinear Fitness-Complexity fixed-point iteration.

One sweep maps the current product complexities ``Q`` to new values::

    F~_c = sum_p M_cp Q_p            F = F~ / mean(F~)
    Q~_p = 1 / sum_c M_cp / F_c      Q = Q~ / mean(Q~)

In the default ``"sequential"`` update the Q step uses the F just computed in
the same sweep; ``"synchronous"`` uses the F of the previous sweep instead.

Reductions are done with ``np.add.reduce`` over explicit axes rather than BLAS
mat-vec products so that the summation order, and therefore every bit of the
result, does not depend on the BLAS build or thread count.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DataError, UnprunedMatrixError
from .rca import BinaryMatrix

FLOOR = 1e-300

UpdateRule = Literal["sequential", "synchronous"]


@dataclass(frozen=True)
class FitnessConfig:
    """Stopping rules and start vector for :func:`compute_fitness`.

    ``rank_stability_window`` set to ``None`` or 0 disables the rank criterion.
    ``initial_q`` is ``"uniform"`` (all ones), ``"unit_sum"`` (all ``1/P``), or
    an explicit strictly positive vector.
    """

    max_iterations: int = 1000
    value_tolerance: float = 1e-9
    rank_stability_window: int | None = 10
    initial_q: str | tuple[float, ...] | np.ndarray = "uniform"
    update: UpdateRule = "sequential"

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.value_tolerance > 0:
            raise ValueError("value_tolerance must be > 0")
        if self.rank_stability_window is not None and self.rank_stability_window < 0:
            raise ValueError("rank_stability_window must be >= 0")
        if self.update not in ("sequential", "synchronous"):
            raise ValueError(f"unknown update rule {self.update!r}")
        if isinstance(self.initial_q, str) and self.initial_q not in ("uniform", "unit_sum"):
            raise ValueError(f"unknown initial_q {self.initial_q!r}")

    def start_vector(self, n_products: int) -> np.ndarray:
        if isinstance(self.initial_q, str):
            fill = 1.0 if self.initial_q == "uniform" else 1.0 / n_products
            return np.full(n_products, fill)
        q = np.asarray(self.initial_q, dtype=float)
        if q.shape != (n_products,):
            raise ValueError(f"initial_q has shape {q.shape}, expected ({n_products},)")
        if not np.all(q > 0) or not np.all(np.isfinite(q)):
            raise ValueError("initial_q must be strictly positive and finite")
        return q.copy()


@dataclass
class SweepTrace:
    delta_fitness: list[float] = field(default_factory=list)
    delta_complexity: list[float] = field(default_factory=list)
    rank_hash: list[int] = field(default_factory=list)
    floored: int = 0

    def to_dict(self) -> dict:
        return {
            "delta_fitness": self.delta_fitness,
            "delta_complexity": self.delta_complexity,
            "rank_hash": self.rank_hash,
            "floored": self.floored,
        }


@dataclass(frozen=True, eq=False)
class FitnessResult:
    countries: tuple[str, ...]
    products: tuple[str, ...]
    fitness: np.ndarray
    complexity: np.ndarray
    iterations_run: int
    converged_by: Literal["value", "rank", "max_iterations"]
    trace: SweepTrace

    @property
    def converged(self) -> bool:
        return self.converged_by != "max_iterations"


def _check_pruned(M: np.ndarray) -> None:
    if M.size == 0:
        raise UnprunedMatrixError("matrix is empty")
    if np.any(np.add.reduce(M, axis=1) == 0):
        raise UnprunedMatrixError("unpruned matrix: a country row is all zero")
    if np.any(np.add.reduce(M, axis=0) == 0):
        raise UnprunedMatrixError("unpruned matrix: a product column is all zero")


def _as_values(m) -> np.ndarray:
    if isinstance(m, BinaryMatrix):
        return m.values
    M = check_array(m, dtype=np.float64)
    if not np.all((M == 0) | (M == 1)):
        raise DataError("matrix entries must be 0 or 1")
    return M


def _sweep(M: np.ndarray, f: np.ndarray, q: np.ndarray, update: UpdateRule) -> tuple[np.ndarray, np.ndarray, int]:
    f_new = np.add.reduce(M * q[None, :], axis=1)
    f_new = f_new / (np.add.reduce(f_new) / f_new.size)
    f_used = f_new if update == "sequential" else f
    low = f_used < FLOOR
    n_floor = int(np.count_nonzero(low))
    if n_floor:
        f_used = np.where(low, FLOOR, f_used)
    q_new = 1.0 / np.add.reduce(M * (1.0 / f_used)[:, None], axis=0)
    q_new = q_new / (np.add.reduce(q_new) / q_new.size)
    return f_new, q_new, n_floor


def iterate_once(m, f, q, update: UpdateRule = "sequential") -> tuple[np.ndarray, np.ndarray]:
    """One mean-normalized Fitness-Complexity sweep.

    Parameters
    ----------
    m : BinaryMatrix or array-like of shape (n_countries, n_products)
    f : array-like of shape (n_countries,)
        Fitness of the previous sweep. Only read by the synchronous update.
    q : array-like of shape (n_products,)
        Complexity of the previous sweep.

    Returns
    -------
    fitness, complexity : ndarray
    """
    M = _as_values(m)
    _check_pruned(M)
    f = np.asarray(f, dtype=float)
    q = np.asarray(q, dtype=float)
    if f.shape != (M.shape[0],) or q.shape != (M.shape[1],):
        raise ValueError("fitness/complexity vectors do not match the matrix shape")
    if not (np.all(f > 0) and np.all(q > 0)):
        raise ValueError("fitness and complexity must be strictly positive")
    f_new, q_new, _ = _sweep(M, f, q, update)
    return f_new, q_new


def _rank_signature(f: np.ndarray, q: np.ndarray) -> tuple[bytes, bytes]:
    return np.argsort(f, kind="stable").tobytes(), np.argsort(q, kind="stable").tobytes()


def _max_rel_change(new: np.ndarray, old: np.ndarray) -> float:
    return float(np.max(np.abs(new - old) / np.abs(old)))


def compute_fitness(m, cfg: FitnessConfig | None = None) -> FitnessResult:
    """Iterate sweeps from the configured start until a stopping rule fires.

    Stops when the max relative change of both F and Q falls below
    ``value_tolerance`` (``converged_by="value"``), when the rank order of
    F and Q has not changed for ``rank_stability_window`` consecutive sweeps
    (``"rank"``), or after ``max_iterations`` (``"max_iterations"``). The
    last case is not an error: some nested matrices only approach their
    fixed point asymptotically, with the weakest fitness values drifting
    toward zero while the ranking is long settled.
    """
    cfg = cfg or FitnessConfig()
    M = _as_values(m)
    _check_pruned(M)
    if isinstance(m, BinaryMatrix):
        countries, products = m.countries, m.products
    else:
        countries = tuple(str(i) for i in range(M.shape[0]))
        products = tuple(str(j) for j in range(M.shape[1]))

    q = cfg.start_vector(M.shape[1])
    f = np.ones(M.shape[0])
    trace = SweepTrace()
    window = cfg.rank_stability_window or 0
    prev_sig = None
    stable = 0
    converged_by = "max_iterations"
    n = 0
    for n in range(1, int(cfg.max_iterations) + 1):
        f_new, q_new, n_floor = _sweep(M, f, q, cfg.update)
        trace.floored += n_floor
        df = _max_rel_change(f_new, f)
        dq = _max_rel_change(q_new, q)
        sig = _rank_signature(f_new, q_new)
        trace.delta_fitness.append(df)
        trace.delta_complexity.append(dq)
        trace.rank_hash.append(zlib.crc32(sig[0] + sig[1]))
        stable = stable + 1 if sig == prev_sig else 0
        prev_sig = sig
        f, q = f_new, q_new
        if df <= cfg.value_tolerance and dq <= cfg.value_tolerance:
            converged_by = "value"
            break
        if window and stable >= window:
            converged_by = "rank"
            break
    f.setflags(write=False)
    q.setflags(write=False)
    return FitnessResult(countries, products, f, q, n, converged_by, trace)


@dataclass(frozen=True, eq=False)
class CountryRanking:
    """Countries ranked by descending fitness.

    ``position`` is 1-based (1 = fittest) and aligned with ``countries``;
    ``order`` lists the countries best first. Equal fitness values are
    ordered by country code and reported through ``tied``.
    """

    countries: tuple[str, ...]
    fitness: np.ndarray
    position: np.ndarray
    norm_rank: np.ndarray
    order: tuple[str, ...]
    tied: bool

    def values(self, kind: Literal["normalized", "raw", "log_fitness"] = "normalized") -> np.ndarray:
        if kind == "normalized":
            return self.norm_rank
        if kind == "raw":
            return self.position.astype(float)
        if kind == "log_fitness":
            return np.log(self.fitness)
        raise ValueError(f"unknown rank kind {kind!r}")

    def as_dict(self, kind: str = "normalized") -> dict[str, float]:
        return dict(zip(self.countries, self.values(kind).tolist()))


def rank_countries(res: FitnessResult) -> CountryRanking:
    F = np.asarray(res.fitness, dtype=float)
    n = F.size
    idx = sorted(range(n), key=lambda i: (-F[i], res.countries[i]))
    position = np.empty(n, dtype=int)
    position[idx] = np.arange(1, n + 1)
    if n == 1:
        norm = np.ones(1)
    else:
        norm = (n - position) / (n - 1)
    tied = bool(np.unique(F).size < n)
    return CountryRanking(
        countries=tuple(res.countries),
        fitness=F,
        position=position,
        norm_rank=norm.astype(float),
        order=tuple(res.countries[i] for i in idx),
        tied=tied,
    )


def rank_products(res: FitnessResult) -> np.ndarray:
    """1-based complexity rank (1 = most complex), ties by product code."""
    Q = np.asarray(res.complexity, dtype=float)
    idx = sorted(range(Q.size), key=lambda j: (-Q[j], res.products[j]))
    position = np.empty(Q.size, dtype=int)
    position[idx] = np.arange(1, Q.size + 1)
    return position


def triangular_order(m: BinaryMatrix, res: FitnessResult) -> BinaryMatrix:
    """Rows by increasing fitness, columns by increasing complexity.

    Equal values fall back to label order so the output is deterministic.
    """
    if m.shape != (len(res.fitness), len(res.complexity)):
        raise ValueError(f"matrix shape {m.shape} does not match result dimensions")
    if tuple(m.countries) != tuple(res.countries) or tuple(m.products) != tuple(res.products):
        raise ValueError("matrix labels do not match the fitness result")
    rows = sorted(range(m.shape[0]), key=lambda i: (res.fitness[i], m.countries[i]))
    cols = sorted(range(m.shape[1]), key=lambda j: (res.complexity[j], m.products[j]))
    return m.take(rows, cols)


def is_lower_staircase(values) -> bool:
    """True if each row is a run of ones followed by zeros, with runs non-decreasing downward."""
    A = np.asarray(values)
    prev = 0
    for row in A:
        d = int(row.sum())
        if not np.all(row[:d] == 1) or d < prev:
            return False
        prev = d
    return True


class FitnessComplexity(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`compute_fitness`.

    ``fit`` takes a pruned 0/1 country x product matrix. ``transform`` scores
    the rows of a (possibly new) matrix against the fitted complexities,
    scaled with the normalization constant of the training matrix; on the
    training matrix this reproduces ``fitness_`` up to one sweep.

    Attributes
    ----------
    fitness_ : ndarray of shape (n_countries,)
    complexity_ : ndarray of shape (n_products,)
    n_iter_ : int
    converged_by_ : str
    result_ : FitnessResult
    """

    def __init__(
        self,
        max_iterations=1000,
        value_tolerance=1e-9,
        rank_stability_window=10,
        initial_q="uniform",
        update="sequential",
    ):
        self.max_iterations = max_iterations
        self.value_tolerance = value_tolerance
        self.rank_stability_window = rank_stability_window
        self.initial_q = initial_q
        self.update = update

    def _config(self) -> FitnessConfig:
        return FitnessConfig(
            max_iterations=self.max_iterations,
            value_tolerance=self.value_tolerance,
            rank_stability_window=self.rank_stability_window,
            initial_q=self.initial_q,
            update=self.update,
        )

    def fit(self, X, y=None):
        M = _as_values(X)
        res = compute_fitness(M, self._config())
        self.result_ = res
        self.fitness_ = np.array(res.fitness)
        self.complexity_ = np.array(res.complexity)
        self.n_iter_ = res.iterations_run
        self.converged_by_ = res.converged_by
        self.n_features_in_ = M.shape[1]
        self._scale = float(np.add.reduce(M * self.complexity_[None, :], axis=1).mean())
        return self

    def transform(self, X):
        check_is_fitted(self, "complexity_")
        M = _as_values(X)
        if M.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {M.shape[1]} products, expected {self.n_features_in_}")
        return (np.add.reduce(M * self.complexity_[None, :], axis=1) / self._scale)[:, None]
