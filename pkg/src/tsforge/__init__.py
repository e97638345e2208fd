"""Synthetic multivariate time series from symbolic equations, with labelled anomalies."""

__version__ = "0.1.0"

from .engine import GenerationResult, generate, generate_dataset, generate_manual  # noqa: E402
from .expr import evaluate, to_string  # noqa: E402
from .params import GenerationParams, ManualSpec  # noqa: E402
from .parser import parse_expression  # noqa: E402

__all__ = [
    "GenerationParams",
    "GenerationResult",
    "ManualSpec",
    "evaluate",
    "generate",
    "generate_dataset",
    "generate_manual",
    "parse_expression",
    "to_string",
]
