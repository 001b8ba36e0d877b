"""Hybrid dual coordinate ascent for L2-regularized linear models."""

from hybrid_dca._core import (
    ConfigError,
    Dataset,
    DivergenceError,
    ParseError,
    dual_objective,
    duality_gap,
    from_dense,
    load_libsvm,
    parse_libsvm,
    primal_from_dual,
    primal_objective,
    run,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "DivergenceError",
    "ParseError",
    "dual_objective",
    "duality_gap",
    "from_dense",
    "load_libsvm",
    "parse_libsvm",
    "primal_from_dual",
    "primal_objective",
    "run",
]

__version__ = "0.1.0"
