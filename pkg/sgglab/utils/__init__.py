"""Support utilities: logging, exceptions, configuration and file helpers."""

from .exceptions import (
    ConfigurationError,
    DegenerateInputError,
    DimensionMismatchError,
    GenerationError,
    GraphValidationError,
    LossInputError,
    NonFiniteGradientError,
    PredictionMismatchError,
    ReportSchemaError,
    SGGLabError,
    UnseenPairError,
)
from .logger import log_execution_time, setup_logger

__all__ = [
    "ConfigurationError",
    "DegenerateInputError",
    "DimensionMismatchError",
    "GenerationError",
    "GraphValidationError",
    "LossInputError",
    "NonFiniteGradientError",
    "PredictionMismatchError",
    "ReportSchemaError",
    "SGGLabError",
    "UnseenPairError",
    "log_execution_time",
    "setup_logger",
]
