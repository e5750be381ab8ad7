"""Shared exception types."""


class ResourceLimitError(RuntimeError):
    """A state or expansion would exceed the supported size bounds."""


class IllPosedError(ValueError):
    """The supplied data cannot identify the requested fit."""


class SingularFisherError(RuntimeError):
    """A vanishing outcome probability has a non-vanishing derivative."""
