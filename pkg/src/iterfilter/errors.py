"""Exception types shared across the package."""


class IterFilterError(Exception):
    """Base class for all package errors."""


class InvalidInput(IterFilterError, ValueError):
    pass


class ShapeError(IterFilterError, ValueError):
    pass


class CoverError(IterFilterError, RuntimeError):
    """A stitch plan left some cloud point outside every patch."""


class FormatError(IterFilterError, ValueError):
    """Malformed XYZ/OFF/checkpoint content. Carries the offending line number when known."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ConfigError(IterFilterError, ValueError):
    pass
