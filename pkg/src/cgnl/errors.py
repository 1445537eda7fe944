"""Exception hierarchy shared by every module."""


class CgnlError(Exception):
    pass


class ShapeError(CgnlError, ValueError):
    """Array dimensions do not fit the operation."""


class ConfigError(CgnlError, ValueError):
    """Invalid or unsupported kernel/group configuration."""


class DegenerateInputError(CgnlError, ValueError):
    """Input for which the operation is undefined (zero vector, N=1 batch stats)."""


class NumericError(CgnlError, ArithmeticError):
    """A non-finite value appeared in an intermediate stage."""

    def __init__(self, stage, message=None):
        self.stage = stage
        super().__init__(message or f"non-finite values in stage '{stage}'")


class OracleLimitError(CgnlError, ValueError):
    """Brute-force materialization would exceed the configured size cap."""


class GeometryError(CgnlError, ValueError):
    """Spatial fold does not match the number of positions."""


class FormatError(CgnlError, ValueError):
    """Malformed feature-map file."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
