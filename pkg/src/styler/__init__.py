"""Composable image stylization: filter blocks, trainable fast filters,
style pipelines, procedural style generation, CLI, and preview server."""

from ._alloc import tune_malloc as _tune_malloc

_tune_malloc()

from .errors import (
    ConfigurationError,
    FormatError,
    InvalidInputError,
    NumericError,
    ScoringError,
    StateError,
    StylerError,
)
from .image import Image

__all__ = [
    "Image",
    "StylerError",
    "InvalidInputError",
    "StateError",
    "FormatError",
    "ConfigurationError",
    "NumericError",
    "ScoringError",
]

__version__ = "0.1.0"
