"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so raising the right class
matters more than the message text.
"""


class StylerError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(StylerError):
    """A parameter or input image violates an operation's contract."""


class StateError(StylerError):
    """An operation needs state (e.g. stashed chroma) that is not present."""


class FormatError(StylerError):
    """A model or style file is malformed, truncated, or the wrong version."""


class ConfigurationError(StylerError):
    """A pipeline references a model or resource that cannot be resolved."""


class NumericError(StylerError):
    """Training or solving failed numerically (non-finite accumulator, ...)."""


class ScoringError(StylerError):
    """An external scorer command failed or produced unusable output."""
