"""Fitness-Complexity metric and growth-regression toolkit."""

__version__ = "0.1.0"

from .econometrics import GrowthPanel, RegressionResult, RobustOLS, build_growth_panel, ols_robust, within_transform
from .exceptions import (
    CollinearityError,
    ConfigError,
    DataError,
    DuplicateKeyError,
    EconfitError,
    EmptyYearError,
    NumericalError,
    ParseError,
    UnprunedMatrixError,
)
from .fitness import (
    FitnessComplexity,
    FitnessConfig,
    FitnessResult,
    compute_fitness,
    iterate_once,
    rank_countries,
    triangular_order,
)
from .ingest import ExportMatrix, MacroPanel, TradeFlow, build_export_matrix, parse_macro_panel, parse_trade_flows
from .kernelmap import KernelSurface, NadarayaWatsonRegressor, build_colormap, nw_estimate
from .rca import BinaryMatrix, RCATransformer, RcaMatrix, binarize, compute_rca, prune
from .synthetic import CapabilityModel, generate_nested, generate_study, generate_tripartite

__all__ = [
    "BinaryMatrix", "CapabilityModel", "CollinearityError", "ConfigError", "DataError", "DuplicateKeyError",
    "EconfitError", "EmptyYearError", "ExportMatrix", "FitnessComplexity", "FitnessConfig", "FitnessResult",
    "GrowthPanel", "KernelSurface", "MacroPanel", "NadarayaWatsonRegressor", "NumericalError", "ParseError",
    "RCATransformer", "RcaMatrix", "RegressionResult", "RobustOLS", "TradeFlow", "UnprunedMatrixError",
    "binarize", "build_colormap", "build_export_matrix", "build_growth_panel", "compute_fitness", "compute_rca",
    "generate_nested", "generate_study", "generate_tripartite", "iterate_once", "nw_estimate", "ols_robust",
    "parse_macro_panel", "parse_trade_flows", "prune", "rank_countries", "triangular_order", "within_transform",
]
