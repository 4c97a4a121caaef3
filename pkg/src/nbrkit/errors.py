"""Shared exception types."""


class ValidationError(ValueError):
    """Bad user input or contract violation detectable before/while running.

    The CLI maps this to exit code 2; every other exception exits 1.
    """
