"""
Custom exceptions for the sgglab scene-graph laboratory.

These exceptions provide specific error handling for the different
failure scenarios of graph validation, loss computation, training,
evaluation and the command-line runners.
"""


class SGGLabError(Exception):
    """Base exception for sgglab errors."""
    pass


class GraphValidationError(SGGLabError):
    """Raised when a scene-graph record violates the graph invariants."""
    pass


class DegenerateInputError(SGGLabError):
    """Raised when a quantity is undefined for the given input (no pairs, no FG edges, empty sets)."""
    pass


class UnseenPairError(SGGLabError):
    """Raised when the frequency model is queried on an unseen class pair without smoothing."""
    pass


class LossInputError(SGGLabError):
    """Raised when per-edge losses do not cover the batch exactly or are negative."""
    pass


class DimensionMismatchError(SGGLabError):
    """Raised when feature, model or vocabulary dimensions disagree."""
    pass


class NonFiniteGradientError(SGGLabError):
    """Raised when an optimizer step receives NaN or infinite gradients."""
    pass


class PredictionMismatchError(SGGLabError):
    """Raised when predictions and ground-truth graphs do not line up."""
    pass


class GenerationError(SGGLabError):
    """Raised when the synthetic world or dataset cannot be generated."""
    pass


class ReportSchemaError(SGGLabError):
    """Raised when metric reports cannot be joined."""
    pass


class ConfigurationError(SGGLabError):
    """Raised when configuration is invalid or missing."""
    pass
